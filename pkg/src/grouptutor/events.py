"""Append-only event log: one JSON object per line.

Every durable state change is one EventRecord; replaying a room's
records from empty reconstructs its state exactly (see core.apply_event).
The log is written by a single owner and flushed per append, so a crash
can lose at most a partially written final line, which reads back as a
clean truncation.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

EVENT_KINDS = {
    "join",
    "leave",
    "edit",
    "chat_student",
    "chat_ai",
    "chat_ta",
    "grader_run",
    "student_label",
    "ta_review",
    "select_problem",
}


@dataclass(slots=True)
class EventRecord:
    seq: int
    room_id: str
    kind: str
    at: int
    payload: dict

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "room_id": self.room_id,
            "kind": self.kind,
            "at": self.at,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EventRecord":
        rec = cls(
            seq=int(d["seq"]),
            room_id=d["room_id"],
            kind=d["kind"],
            at=int(d["at"]),
            payload=d["payload"],
        )
        if rec.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {rec.kind!r}")
        return rec


@dataclass
class Truncation:
    line: int
    reason: str


class EventLog:
    """Write side of the log. path=None keeps records in memory only
    (simulator runs that do not need durability)."""

    def __init__(self, path: Optional[Path] = None, fsync: bool = False):
        self.path = Path(path) if path else None
        self.fsync = fsync
        self.records: list[EventRecord] = []
        self._fh = None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, record: EventRecord) -> None:
        self.records.append(record)
        if self._fh:
            self._fh.write(json.dumps(record.to_dict(), separators=(",", ":")) + "\n")
            self._fh.flush()
            if self.fsync:
                os.fsync(self._fh.fileno())

    def close(self) -> None:
        if self._fh:
            self._fh.close()
            self._fh = None


def read_log(path: Path) -> tuple[list[EventRecord], Optional[Truncation]]:
    """Read records up to the first corrupt line.

    A torn or garbled record stops the read; everything before it is
    returned along with where and why reading stopped.
    """
    records: list[EventRecord] = []
    expected_seq: Optional[int] = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                rec = EventRecord.from_dict(json.loads(stripped))
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as e:
                return records, Truncation(lineno, f"corrupt record: {e}")
            if expected_seq is not None and rec.seq <= expected_seq:
                return records, Truncation(lineno, f"non-monotonic seq {rec.seq}")
            expected_seq = rec.seq
            records.append(rec)
    return records, None


def iter_log(path: Path) -> Iterator[EventRecord]:
    records, _ = read_log(path)
    yield from records
