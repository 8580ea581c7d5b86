"""Convergent multi-writer editing of blank regions.

The server is the single transformation authority: it assigns each
accepted op a server_version and broadcasts the transformed op. Clients
apply their own edits optimistically and reconcile incoming broadcasts
against their in-flight ops (SyncClient below implements that side).

Transform rules form a consistent pair: for any two concurrent ops a, b
on the same blank, applying a then transform(b, a) equals applying b
then transform(a, b). One consequence worth knowing: an insert landing
strictly inside a span a concurrent delete removed is dropped (the
delete wins). Keeping it would require splitting the delete into two
ops, which the single-op wire format does not allow.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

INSERT = "insert"
DELETE = "delete"

# Out-of-order ops buffered per client before a forced resync.
REORDER_WINDOW = 64


@dataclass(slots=True)
class EditOp:
    client_id: str
    client_seq: int
    problem_id: str
    blank_id: str
    kind: str  # INSERT or DELETE
    position: int
    text: str = ""
    length: int = 0
    base_version: int = 0

    def is_noop(self) -> bool:
        return self.kind == INSERT and self.text == ""

    def to_dict(self) -> dict:
        d = {
            "client_id": self.client_id,
            "client_seq": self.client_seq,
            "problem_id": self.problem_id,
            "blank_id": self.blank_id,
            "kind": self.kind,
            "position": self.position,
            "base_version": self.base_version,
        }
        if self.kind == INSERT:
            d["text"] = self.text
        else:
            d["length"] = self.length
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EditOp":
        kind = d["kind"]
        if kind not in (INSERT, DELETE):
            raise ValueError(f"unknown op kind {kind!r}")
        return cls(
            client_id=d["client_id"],
            client_seq=int(d["client_seq"]),
            problem_id=d["problem_id"],
            blank_id=d["blank_id"],
            kind=kind,
            position=int(d["position"]),
            text=d.get("text", ""),
            length=int(d.get("length", 0)),
            base_version=int(d.get("base_version", 0)),
        )


def transform(op: EditOp, against: EditOp) -> EditOp:
    """Adjust ``op`` so it applies after ``against`` has been applied.

    Ops on different blanks commute untouched. Insert ties at the same
    position break by lexicographic client_id: the smaller id's text
    ends up at the earlier index regardless of server arrival order.
    """
    if op.blank_id != against.blank_id or against.is_noop():
        return op

    if op.kind == INSERT:
        p = op.position
        if against.kind == INSERT:
            q = against.position
            if q < p or (q == p and against.client_id < op.client_id):
                return replace(op, position=p + len(against.text))
            return op
        q, n = against.position, against.length
        if p <= q:
            return op
        if p >= q + n:
            return replace(op, position=p - n)
        # Strict interior of a deleted span: the delete wins.
        return replace(op, kind=INSERT, position=q, text="", length=0)

    # op is a delete
    p, n = op.position, op.length
    if against.kind == INSERT:
        q, t = against.position, len(against.text)
        if q <= p:
            return replace(op, position=p + t)
        if q >= p + n:
            return op
        # Concurrent insert strictly inside our span: widen to cover it,
        # pairing with the interior-insert drop above.
        return replace(op, length=n + t)

    q, m = against.position, against.length
    if q + m <= p:
        return replace(op, position=p - m)
    if q >= p + n:
        return op
    # Overlap: keep only the surviving part of our span.
    overlap = min(p + n, q + m) - max(p, q)
    remaining = n - overlap
    new_pos = p if p < q else q
    if remaining == 0:
        return replace(op, kind=INSERT, position=new_pos, text="", length=0)
    return replace(op, position=new_pos, length=remaining)


class OpRangeError(ValueError):
    """Op positions fall outside the target blank's current text."""


def apply_op(text: str, op: EditOp) -> str:
    if op.kind == INSERT:
        if not 0 <= op.position <= len(text):
            raise OpRangeError(f"insert at {op.position} outside text of length {len(text)}")
        if not op.text:
            return text
        return text[: op.position] + op.text + text[op.position:]
    if op.position < 0 or op.position + op.length > len(text):
        raise OpRangeError(
            f"delete [{op.position}, {op.position + op.length}) outside text of length {len(text)}"
        )
    return text[: op.position] + text[op.position + op.length:]


@dataclass
class DocumentState:
    """Converged per-problem document: one text per blank region.

    applied_ops[i] holds the op that produced server_version i+1;
    replaying the log from the initial texts reproduces ``texts``.
    """

    texts: dict[str, str]
    initial_texts: dict[str, str]
    server_version: int = 0
    applied_ops: list[EditOp] = field(default_factory=list)
    seen: dict[str, int] = field(default_factory=dict)
    pending: dict[str, dict[int, EditOp]] = field(default_factory=dict)

    @classmethod
    def fresh(cls, blank_texts: dict[str, str]) -> "DocumentState":
        return cls(texts=dict(blank_texts), initial_texts=dict(blank_texts))

    def snapshot(self) -> tuple[int, dict[str, str]]:
        """Consistent point-in-time copy for client (re)sync."""
        return self.server_version, dict(self.texts)

    def to_dict(self) -> dict:
        return {
            "texts": dict(self.texts),
            "initial_texts": dict(self.initial_texts),
            "server_version": self.server_version,
            "applied_ops": [op.to_dict() for op in self.applied_ops],
            "seen": dict(self.seen),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DocumentState":
        return cls(
            texts=dict(d["texts"]),
            initial_texts=dict(d["initial_texts"]),
            server_version=d["server_version"],
            applied_ops=[EditOp.from_dict(o) for o in d["applied_ops"]],
            seen=dict(d["seen"]),
        )


@dataclass(slots=True)
class Applied:
    server_version: int
    op: EditOp


@dataclass(slots=True)
class IntegrateResult:
    applied: list[Applied]
    duplicate: bool = False
    buffered: bool = False
    error: Optional[str] = None
    error_code: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _reject(code: str, msg: str) -> IntegrateResult:
    return IntegrateResult(applied=[], error=msg, error_code=code)


def integrate(doc: DocumentState, op: EditOp) -> IntegrateResult:
    """Transform an incoming client op against concurrent history and apply.

    Duplicate delivery (client_seq at or below the highest applied seq)
    is a silent no-op. Ops arriving ahead of a gap in the client's seq
    stream are buffered, up to REORDER_WINDOW per client; filling the
    gap drains the buffer in order, so one call may apply several ops.
    """
    if op.kind == INSERT and op.text == "":
        return _reject("invalid_op", "insert text must be non-empty")
    if op.kind == DELETE and op.length < 1:
        return _reject("invalid_op", "delete length must be >= 1")
    if op.kind not in (INSERT, DELETE):
        return _reject("invalid_op", f"unknown op kind {op.kind!r}")

    seen = doc.seen.get(op.client_id, 0)
    if op.client_seq <= seen:
        return IntegrateResult(applied=[], duplicate=True)

    bucket = doc.pending.setdefault(op.client_id, {})
    if op.client_seq > seen + 1:
        if op.client_seq in bucket:
            return IntegrateResult(applied=[], duplicate=True)
        if len(bucket) >= REORDER_WINDOW:
            return _reject(
                "resync_required",
                f"reorder buffer full for client {op.client_id}; resnapshot required",
            )
        bucket[op.client_seq] = op
        return IntegrateResult(applied=[], buffered=True)

    applied: list[Applied] = []
    result = _apply_one(doc, op)
    if result is not None:
        return result
    applied.append(Applied(doc.server_version, doc.applied_ops[-1]))

    # Drain any buffered successors now that the gap is filled.
    while True:
        nxt = doc.seen[op.client_id] + 1
        queued = bucket.pop(nxt, None)
        if queued is None:
            break
        result = _apply_one(doc, queued)
        if result is not None:
            result.applied = applied
            return result
        applied.append(Applied(doc.server_version, doc.applied_ops[-1]))
    if not bucket:
        doc.pending.pop(op.client_id, None)
    return IntegrateResult(applied=applied)


def _apply_one(doc: DocumentState, op: EditOp) -> Optional[IntegrateResult]:
    """Transform + apply a single in-order op. Returns a rejection or None."""
    if op.blank_id not in doc.texts:
        return _reject("unknown_blank", f"unknown blank_id {op.blank_id!r}")
    if op.base_version > doc.server_version:
        return _reject(
            "bad_base_version",
            f"base_version {op.base_version} ahead of server version {doc.server_version}",
        )

    t = op
    for concurrent in doc.applied_ops[op.base_version:]:
        t = transform(t, concurrent)

    try:
        new_text = apply_op(doc.texts[t.blank_id], t)
    except OpRangeError as e:
        return _reject("range", str(e))

    doc.texts[t.blank_id] = new_text
    doc.server_version += 1
    doc.applied_ops.append(t)
    doc.seen[op.client_id] = op.client_seq
    return None


def replay_ops(initial_texts: dict[str, str], ops: Iterable[EditOp]) -> dict[str, str]:
    """Oracle: sequentially apply a server-ordered transformed op log."""
    texts = dict(initial_texts)
    for op in ops:
        texts[op.blank_id] = apply_op(texts[op.blank_id], op)
    return texts


def replay_applied(doc: DocumentState, server_version: int, op: EditOp) -> None:
    """Re-apply an already-transformed op from the event log.

    Event records store ops post-transformation, so recovery is a plain
    fold; this must keep exactly the bookkeeping _apply_one does.
    """
    if server_version != doc.server_version + 1:
        raise ValueError(
            f"edit record at server_version {server_version} does not follow {doc.server_version}"
        )
    doc.texts[op.blank_id] = apply_op(doc.texts[op.blank_id], op)
    doc.server_version = server_version
    doc.applied_ops.append(op)
    if op.client_seq > doc.seen.get(op.client_id, 0):
        doc.seen[op.client_id] = op.client_seq


class SyncClient:
    """Client-side replica for one problem's document.

    Local edits apply to the local view immediately and queue up; at
    most one op is on the wire at a time (the next departs only after
    the previous one's broadcast comes back). Queued ops are kept
    rebased against incoming foreign broadcasts, so the op sent next is
    always expressed against the exact server state it names in
    base_version, and the server never needs to transform an op against
    the sender's own history.
    """

    def __init__(
        self,
        client_id: str,
        problem_id: str,
        server_version: int,
        texts: dict[str, str],
    ):
        self.client_id = client_id
        self.problem_id = problem_id
        self.synced_version = server_version
        self.texts = dict(texts)
        self.next_seq = 1
        self.in_flight: Optional[EditOp] = None
        self.queue: deque[EditOp] = deque()

    def _make_op(self, blank_id: str, kind: str, position: int, text: str, length: int) -> None:
        # client_seq and base_version are stamped at send time.
        op = EditOp(
            client_id=self.client_id,
            client_seq=0,
            problem_id=self.problem_id,
            blank_id=blank_id,
            kind=kind,
            position=position,
            text=text,
            length=length,
        )
        self.texts[blank_id] = apply_op(self.texts[blank_id], op)
        self.queue.append(op)

    def local_insert(self, blank_id: str, position: int, text: str) -> None:
        if not text:
            raise ValueError("insert text must be non-empty")
        self._make_op(blank_id, INSERT, position, text, 0)

    def local_delete(self, blank_id: str, position: int, length: int) -> None:
        if length < 1:
            raise ValueError("delete length must be >= 1")
        self._make_op(blank_id, DELETE, position, "", length)

    @property
    def pending_count(self) -> int:
        return len(self.queue) + (1 if self.in_flight is not None else 0)

    def take_op(self) -> Optional[EditOp]:
        """Next op to put on the wire, or None while one is in flight.

        Queued ops cancelled outright by concurrent edits (an insert
        swallowed by a covering delete, a delete whose span is gone)
        are dropped here rather than sent.
        """
        if self.in_flight is not None:
            return None
        while self.queue:
            op = self.queue.popleft()
            if op.is_noop() or (op.kind == DELETE and op.length == 0):
                continue
            op = replace(op, client_seq=self.next_seq, base_version=self.synced_version)
            self.next_seq += 1
            self.in_flight = op
            return op
        return None

    def receive(self, server_version: int, op: EditOp) -> None:
        if server_version != self.synced_version + 1:
            raise ValueError(
                f"broadcast {server_version} out of order (synced {self.synced_version})"
            )
        if op.client_id == self.client_id:
            own = self.in_flight
            if own is None or own.client_seq != op.client_seq:
                raise ValueError(f"unexpected ack for seq {op.client_seq}")
            self.in_flight = None
        else:
            t = op
            if self.in_flight is not None:
                rebased = transform(self.in_flight, t)
                t = transform(t, self.in_flight)
                self.in_flight = replace(rebased, base_version=self.synced_version + 1)
            for i, q in enumerate(self.queue):
                self.queue[i] = transform(q, t)
                t = transform(t, q)
            self.texts[t.blank_id] = apply_op(self.texts[t.blank_id], t)
        self.synced_version = server_version
