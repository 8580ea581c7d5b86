import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grouptutor.sync import (
    DELETE,
    INSERT,
    DocumentState,
    EditOp,
    SyncClient,
    apply_op,
    integrate,
    replay_ops,
    transform,
)


def ins(pos, text, client="a", seq=1, blank="b1", base=0):
    return EditOp(client, seq, "p1", blank, INSERT, pos, text=text, base_version=base)


def dele(pos, length, client="a", seq=1, blank="b1", base=0):
    return EditOp(client, seq, "p1", blank, DELETE, pos, length=length, base_version=base)


class TestTransform:
    def test_insert_after_earlier_insert_shifts(self):
        # Oracle: server order A then B on "abc" must converge to "aXbYc".
        a = ins(1, "X", client="a")
        b = ins(2, "Y", client="b")
        tb = transform(b, a)
        assert (tb.position, tb.text) == (3, "Y")
        assert apply_op(apply_op("abc", a), tb) == "aXbYc"

    def test_different_blank_untouched(self):
        a = ins(1, "X", blank="b1")
        b = dele(0, 2, blank="b2")
        assert transform(b, a) is b

    def test_double_delete_same_span_is_noop(self):
        a = dele(0, 2, client="a")
        b = dele(0, 2, client="b")
        t = transform(b, a)
        assert t.kind == INSERT and t.text == "" and t.position == 0

    def test_insert_tie_breaks_by_client_id(self):
        lo = ins(1, "L", client="a")
        hi = ins(1, "H", client="z")
        # Whichever lands second, client "a" text ends up first.
        assert apply_op(apply_op("xy", lo), transform(hi, lo)) == "xLHy"
        assert apply_op(apply_op("xy", hi), transform(lo, hi)) == "xLHy"

    def test_delete_truncated_to_surviving_span(self):
        a = dele(0, 3, client="a")  # deletes "abc"
        b = dele(2, 3, client="b")  # deletes "cde"
        tb = transform(b, a)
        assert apply_op(apply_op("abcdef", a), tb) == "f"
        ta = transform(a, b)
        assert apply_op(apply_op("abcdef", b), ta) == "f"


@st.composite
def op_pair(draw):
    """Two concurrent ops valid against the same base text."""
    text = draw(st.text(alphabet="abcdef", min_size=0, max_size=12))
    ops = []
    for client in ("a", "b"):
        if draw(st.booleans()) or not text:
            pos = draw(st.integers(0, len(text)))
            ops.append(ins(pos, draw(st.text(alphabet="XYZ", min_size=1, max_size=3)), client=client))
        else:
            pos = draw(st.integers(0, len(text) - 1))
            length = draw(st.integers(1, len(text) - pos))
            ops.append(dele(pos, length, client=client))
    return text, ops[0], ops[1]


@settings(max_examples=400)
@given(op_pair())
def test_transform_convergence_property(case):
    """Both application orders of a concurrent pair yield the same text."""
    text, a, b = case
    one = apply_op(apply_op(text, a), transform(b, a))
    two = apply_op(apply_op(text, b), transform(a, b))
    assert one == two


def fresh_doc():
    return DocumentState.fresh({"b1": "abc", "b2": ""})


class TestIntegrate:
    def test_in_order_op_applies_untransformed(self):
        doc = fresh_doc()
        r = integrate(doc, ins(1, "X", client="c1", seq=1, base=0))
        assert r.ok and len(r.applied) == 1
        assert r.applied[0].server_version == 1
        assert doc.texts["b1"] == "aXbc"

    def test_duplicate_delivery_is_noop(self):
        doc = fresh_doc()
        op = ins(1, "X", client="c3", seq=5, base=0)
        # seq 5 with no prior ops is out of order: buffered, not applied
        r = integrate(doc, op)
        assert r.buffered
        r2 = integrate(doc, op)
        assert r2.duplicate and doc.server_version == 0

        doc2 = fresh_doc()
        op1 = ins(1, "X", client="c3", seq=1, base=0)
        integrate(doc2, op1)
        r3 = integrate(doc2, op1)
        assert r3.duplicate and not r3.applied
        assert doc2.server_version == 1

    def test_concurrent_inserts_converge(self):
        for first, second in [("a", "b"), ("b", "a")]:
            doc = fresh_doc()
            ops = {
                "a": ins(1, "X", client="a", seq=1, base=0),
                "b": ins(2, "Y", client="b", seq=1, base=0),
            }
            assert integrate(doc, ops[first]).ok
            assert integrate(doc, ops[second]).ok
            assert doc.texts["b1"] == "aXbYc"

    def test_unknown_blank_rejected(self):
        doc = fresh_doc()
        r = integrate(doc, ins(0, "X", blank="nope"))
        assert r.error_code == "unknown_blank"

    def test_future_base_version_rejected(self):
        doc = fresh_doc()
        r = integrate(doc, ins(0, "X", base=3))
        assert r.error_code == "bad_base_version"

    def test_out_of_range_rejected(self):
        doc = fresh_doc()
        r = integrate(doc, ins(99, "X"))
        assert r.error_code == "range"
        r2 = integrate(doc, dele(1, 99, client="b"))
        assert r2.error_code == "range"

    def test_out_of_order_buffered_then_drained(self):
        doc = fresh_doc()
        r2 = integrate(doc, ins(1, "B", client="c", seq=2, base=0))
        assert r2.buffered and doc.server_version == 0
        r1 = integrate(doc, ins(0, "A", client="c", seq=1, base=0))
        assert r1.ok and len(r1.applied) == 2
        # Both ops name base_version 0, so they are independent edits of
        # "abc"; the drained op transforms against the first like any
        # other concurrent op.
        assert doc.texts["b1"] == "AaBbc"
        assert doc.seen["c"] == 2

    def test_reorder_window_overflow_forces_resync(self):
        doc = fresh_doc()
        for seq in range(2, 2 + 64):
            assert integrate(doc, ins(0, "x", client="c", seq=seq, base=0)).buffered
        r = integrate(doc, ins(0, "x", client="c", seq=200, base=0))
        assert r.error_code == "resync_required"

    def test_invalid_ops_rejected(self):
        doc = fresh_doc()
        assert integrate(doc, ins(0, "")).error_code == "invalid_op"
        assert integrate(doc, dele(0, 0)).error_code == "invalid_op"

    def test_snapshot_fresh_and_after_ops(self):
        doc = fresh_doc()
        assert doc.snapshot() == (0, {"b1": "abc", "b2": ""})
        for seq in range(1, 4):
            integrate(doc, ins(0, "x", client="c", seq=seq, base=0))
        version, texts = doc.snapshot()
        assert version == 3
        assert texts["b1"] == "xxxabc"


def random_local_edit(rng, client, blanks):
    blank = rng.choice(blanks)
    text = client.texts[blank]
    if text and rng.random() < 0.45:
        pos = rng.randrange(len(text))
        client.local_delete(blank, pos, rng.randint(1, min(4, len(text) - pos)))
    else:
        client.local_insert(
            blank,
            rng.randint(0, len(text)),
            "".join(rng.choice("nopqrst") for _ in range(rng.randint(1, 3))),
        )


def run_convergence_round(seed, n_clients=4, ops_per_client=80, blanks=("b1", "b2")):
    """Random concurrent editing with laggy in-order delivery.

    Oracle: the server text must equal a sequential replay of its own
    transformed op log, and every client replica must match it after
    quiescence.
    """
    rng = random.Random(seed)
    initial = {b: "seed" for b in blanks}
    doc = DocumentState.fresh(initial)
    clients = [SyncClient(f"c{i}", "p1", 0, initial) for i in range(n_clients)]
    inboxes = {c.client_id: [] for c in clients}
    budgets = {c.client_id: ops_per_client for c in clients}

    def pump(c):
        op = c.take_op()
        if op is not None:
            r = integrate(doc, op)
            assert r.ok, r.error
            for applied in r.applied:
                for q in inboxes.values():
                    q.append(applied)

    def quiescent():
        return (
            not any(budgets.values())
            and not any(inboxes.values())
            and all(c.pending_count == 0 for c in clients)
        )

    while not quiescent():
        c = rng.choice(clients)
        if budgets[c.client_id] and c.pending_count < 3:
            budgets[c.client_id] -= 1
            random_local_edit(rng, c, blanks)
        pump(c)
        # Lossy-latency delivery: each client drains a random amount.
        for cl in clients:
            q = inboxes[cl.client_id]
            while q and rng.random() < 0.6:
                a = q.pop(0)
                cl.receive(a.server_version, a.op)
            pump(cl)

    oracle = replay_ops(doc.initial_texts, doc.applied_ops)
    assert oracle == doc.texts
    for c in clients:
        assert c.texts == doc.texts, f"client {c.client_id} diverged (seed {seed})"
    assert doc.server_version == len(doc.applied_ops)


@pytest.mark.parametrize("seed", range(12))
def test_convergence_with_concurrent_clients(seed):
    run_convergence_round(seed)


def test_replay_oracle_matches_doc():
    doc = fresh_doc()
    rng = random.Random(7)
    clients = {c: SyncClient(c, "p1", 0, doc.texts) for c in ("a", "b", "c")}
    for _ in range(120):
        c = clients[rng.choice("abc")]
        if c.pending_count < 2:
            random_local_edit(rng, c, ["b1", "b2"])
        op = c.take_op()
        if op is None:
            continue
        r = integrate(doc, op)
        assert r.ok
        for applied in r.applied:
            for cl in clients.values():
                cl.receive(applied.server_version, applied.op)
    # Drain remaining queued edits one at a time.
    while any(cl.pending_count for cl in clients.values()):
        for cl in clients.values():
            op = cl.take_op()
            if op is None:
                continue
            r = integrate(doc, op)
            assert r.ok
            for applied in r.applied:
                for recv in clients.values():
                    recv.receive(applied.server_version, applied.op)
    assert replay_ops(doc.initial_texts, doc.applied_ops) == doc.texts
    for cl in clients.values():
        assert cl.texts == doc.texts


def test_late_joiner_snapshot_plus_broadcasts_reaches_live_state():
    """A client that snapshots at version K and applies broadcasts
    K+1..N converges with clients that watched from the start."""
    rng = random.Random(31)
    initial = {"b1": "base", "b2": ""}
    doc = DocumentState.fresh(initial)
    veteran = SyncClient("veteran", "p1", 0, initial)
    broadcasts = []

    def drive(client, n):
        for _ in range(n):
            random_local_edit(rng, client, ["b1", "b2"])
            op = client.take_op()
            if op is None:
                continue
            r = integrate(doc, op)
            assert r.ok
            for applied in r.applied:
                broadcasts.append(applied)
                client.receive(applied.server_version, applied.op)

    drive(veteran, 10)
    snap_version, snap_texts = doc.snapshot()
    late = SyncClient("late", "p1", snap_version, snap_texts)
    watermark = len(broadcasts)
    drive(veteran, 10)
    for applied in broadcasts[watermark:]:
        late.receive(applied.server_version, applied.op)
    assert late.texts == doc.texts == veteran.texts
    assert late.synced_version == doc.server_version


def test_idempotent_redelivery_and_cross_blank_isolation():
    doc = fresh_doc()
    before_b2 = doc.texts["b2"]
    op = ins(0, "Q", client="c9", seq=1)
    r = integrate(doc, op)
    state_after = dict(doc.texts)
    r2 = integrate(doc, op)
    assert r2.duplicate
    assert doc.texts == state_after
    assert doc.texts["b2"] == before_b2
    assert len(r.applied) == 1
