"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s to see them inline)."""

import copy
import json
import random
import time
from contextlib import contextmanager
from pathlib import Path

import pytest

from conftest import build_worksheet
from grouptutor.clock import VirtualClock
from grouptutor.core import CoreConfig, ServerCore, frame, recover
from grouptutor.events import EventLog
from grouptutor.fixtures import replay_fixture
from grouptutor.grader import ExecutorConfig, default_executors, run_tests
from grouptutor.model import DomainError, Problem, TestCase, TestStatus
from grouptutor.sim import ScenarioConfig, Simulation
from grouptutor.sync import DocumentState, SyncClient, integrate, replay_ops
from grouptutor.tutor import TutorPolicy, assemble_context

REPO = Path(__file__).resolve().parent.parent
GOLDEN = Path(__file__).resolve().parent / "golden"


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE FAIL: {name}")
        raise
    print(f"\nACCEPTANCE PASS: {name}")


# ----------------------------------------------------------------------
# 1. Convergence suite


def converge_one_seed(seed, n_clients=7, ops_per_blank=200, blanks=("b1", "b2", "b3")):
    rng = random.Random(seed)
    initial = {b: "starter text" for b in blanks}
    doc = DocumentState.fresh(initial)
    clients = [SyncClient(f"c{i}", "p1", 0, initial) for i in range(n_clients)]
    inboxes = {c.client_id: [] for c in clients}
    budgets = {c.client_id: {b: ops_per_blank for b in blanks} for c in clients}

    def generate(c):
        remaining = [b for b, n in budgets[c.client_id].items() if n]
        if not remaining:
            return
        blank = rng.choice(remaining)
        budgets[c.client_id][blank] -= 1
        text = c.texts[blank]
        if text and rng.random() < 0.45:
            pos = rng.randrange(len(text))
            c.local_delete(blank, pos, rng.randint(1, min(4, len(text) - pos)))
        else:
            c.local_insert(
                blank,
                rng.randint(0, len(text)),
                "".join(rng.choice("worate") for _ in range(rng.randint(1, 3))),
            )

    def pump(c):
        op = c.take_op()
        if op is not None:
            r = integrate(doc, op)
            assert r.ok, r.error
            for a in r.applied:
                for q in inboxes.values():
                    q.append(a)

    def quiescent():
        return (
            all(not any(b.values()) for b in budgets.values())
            and not any(inboxes.values())
            and all(c.pending_count == 0 for c in clients)
        )

    while not quiescent():
        for c in clients:
            if c.pending_count < 2:
                generate(c)
            pump(c)
        for c in clients:
            q = inboxes[c.client_id]
            while q and rng.random() < 0.7:
                a = q.pop(0)
                c.receive(a.server_version, a.op)
            pump(c)

    oracle = replay_ops(doc.initial_texts, doc.applied_ops)
    assert oracle == doc.texts, f"oracle mismatch on seed {seed}"
    for c in clients:
        assert c.texts == doc.texts, f"client {c.client_id} diverged on seed {seed}"


def test_criterion_convergence_suite():
    with criterion(
        "convergence: 7 clients x 200 ops/blank x 3 blanks, 100 seeds, <60s"
    ):
        started = time.monotonic()
        for seed in range(100):
            converge_one_seed(seed)
        elapsed = time.monotonic() - started
        assert elapsed < 60, f"convergence suite took {elapsed:.1f}s"


# ----------------------------------------------------------------------
# 2. Replay fidelity (exact deployment tallies)


def test_criterion_replay_fidelity():
    with criterion(
        "replay fidelity: labels 156/129/39/42, reviews 423/188/3, "
        "reviewed fraction 614/7516"
    ):
        fixture_path = REPO / "fixtures" / "deployment_tables.json.gz"
        report = replay_fixture(fixture_path)
        assert report["error_count"] == 0, report["error_frames"][:3]
        labels = report["metrics"]["student_label_tallies"]
        assert labels == {
            "helpful": 156,
            "unhelpful": 129,
            "too_much_help": 39,
            "incorrect": 42,
        }
        actions = report["metrics"]["ta_action_tallies"]
        assert actions == {"read": 423, "endorsed": 188, "edited": 3}
        assert report["metrics"]["ai_messages"] == 7516
        assert report["metrics"]["reviewed_messages"] == 614
        frac = report["metrics"]["reviewed_fraction"]
        assert frac == 614 / 7516
        assert abs(frac - 0.0817) <= 0.0005
        assert report["metrics"]["labeled_messages"] == 336
        assert report["metrics"]["labelable_messages"] == 7084
        assert abs(report["metrics"]["label_rate"] - 0.047) < 0.001
        assert report["ok"], report["mismatches"]


# ----------------------------------------------------------------------
# 3. Question-volume scenario


def test_criterion_question_volume():
    with criterion(
        "question volume: >=200 simulated groups, mean chats/group within 5.87±0.5, <2min"
    ):
        cfg = ScenarioConfig(
            name="question-volume",
            groups=220,
            students_per_group=7,
            duration_minutes=80,
            questions_per_group_mean=5.87,
            edits_per_student_per_minute=0.3,
            grader_runs_per_group_mean=0.5,
            ta_poll_interval_s=60,
            ta_review_fraction=0.3,
            ta_chat_probability=0.02,
        )
        started = time.monotonic()
        report = Simulation(cfg, seed=42).run()
        elapsed = time.monotonic() - started
        assert report["groups"] >= 200
        mean = report["questions"]["mean"]
        assert abs(mean - 5.87) <= 0.5, f"mean {mean:.3f} outside 5.87±0.5"
        assert report["ok"]
        assert elapsed < 120, f"scenario took {elapsed:.1f}s"


# ----------------------------------------------------------------------
# 4. Context-assembly golden snapshots


def _golden_case_cores():
    import sys

    sys.path.insert(0, str(REPO / "scripts"))
    import make_golden_contexts as g

    return {
        "context_never_graded": g.never_graded,
        "context_graded": g.graded,
        "context_long_history": g.long_history,
    }


def test_criterion_context_golden_snapshots():
    with criterion("context assembly matches goldens; grader block iff grader ran"):
        for name, builder in _golden_case_cores().items():
            core, ws = builder()
            room = core.rooms["room-001"]
            ctx = assemble_context(room, ws, TutorPolicy(turn_window=20))
            expected = json.loads((GOLDEN / f"{name}.json").read_text())
            assert ctx.to_dict() == expected, f"golden mismatch for {name}"
        # presence rule, both directions
        never_core, ws = _golden_case_cores()["context_never_graded"]()
        room = never_core.rooms["room-001"]
        assert room.grader_history == []
        assert assemble_context(room, ws, TutorPolicy()).grader_block is None
        graded_core, ws2 = _golden_case_cores()["context_graded"]()
        room2 = graded_core.rooms["room-001"]
        assert room2.grader_history
        assert assemble_context(room2, ws2, TutorPolicy()).grader_block is not None
        # long-history truncation to the newest 20 turns
        long_expected = json.loads((GOLDEN / "context_long_history.json").read_text())
        assert len(long_expected["turns"]) == 20
        assert long_expected["turns"][-2][1] == "question number 12"


# ----------------------------------------------------------------------
# 5. Prioritization invariant


def test_criterion_prioritization_invariant():
    with criterion(
        "prioritization: 1000 random review/chat sequences keep list order and counter exact"
    ):
        from grouptutor.console import list_rooms, recompute_unreviewed

        ws = build_worksheet()
        for round_no in range(1000):
            rng = random.Random(round_no)
            cfg = CoreConfig(
                active_worksheet_id=ws.worksheet_id,
                groups={1, 2, 3},
                ta_allowlist={"ta@x.edu"},
            )
            core = ServerCore(
                {ws.worksheet_id: ws}, cfg, clock=VirtualClock(round_no), log=EventLog()
            )
            students = {g: core.join(f"s@g{g}.edu", g) for g in (1, 2, 3)}
            ta = core.join("ta@x.edu", 0)
            for _ in range(rng.randint(1, 12)):
                roll = rng.random()
                g = rng.choice([1, 2, 3])
                core.clock.advance(rng.randint(1, 1000))
                if roll < 0.5:
                    core.handle_frame(
                        students[g].session_id, frame("ask_tutor", {"text": "q"})
                    )
                elif roll < 0.8:
                    room = core.rooms[f"room-{g:03d}"]
                    unreviewed = [
                        m
                        for m in room.ai_chat
                        if m.author_kind.value == "ai" and m.review.value == "unreviewed"
                    ]
                    if unreviewed:
                        target = rng.choice(unreviewed)
                        action = rng.choice(["read", "endorse", "edit"])
                        body = {
                            "room_id": room.room_id,
                            "message_id": target.message_id,
                            "action": action,
                        }
                        if action == "edit":
                            body["new_body"] = "edited"
                        core.handle_frame(ta.session_id, frame("review", body))
                else:
                    core.handle_frame(
                        students[g].session_id, frame("ta_chat", {"text": "ping"})
                    )

                # counter invariant, every room, after every event
                for room in core.rooms.values():
                    assert room.unreviewed_count == recompute_unreviewed(room)
                    assert room.unreviewed_count >= 0
                # total order invariant
                order = list_rooms(core.rooms.values())
                key = [
                    (s.unreviewed_count == 0, -s.last_activity, s.room_id) for s in order
                ]
                assert key == sorted(key)


# ----------------------------------------------------------------------
# 6. Grader behavior


def test_criterion_grader_behavior():
    with criterion(
        "grader: timeout within grace, CRLF/trailing-newline normalization, deterministic x10"
    ):
        executor = default_executors()["echo-subprocess"]
        loop_problem = Problem(
            problem_id="p",
            prompt_markdown="",
            language_tag="echo-subprocess",
            starter_code="",
            blanks=[],
            tests=[TestCase("t1", "", "x", timeout_ms=500)],
        )
        started = time.monotonic()
        result = run_tests(loop_problem, "loop", executor)
        elapsed_ms = (time.monotonic() - started) * 1000
        assert result.outcomes[0].status == TestStatus.TIMEOUT
        assert elapsed_ms < 500 + 200, f"timeout took {elapsed_ms:.0f} ms"

        echo = default_executors()["echo"]
        norm_problem = Problem(
            problem_id="p",
            prompt_markdown="",
            language_tag="echo",
            starter_code="",
            blanks=[],
            tests=[
                TestCase("crlf", "", "a\r\nb\r\n", 1000),
                TestCase("trailing", "", "a\nb", 1000),
            ],
        )
        result = run_tests(norm_problem, "print a\nprint b", echo)
        assert [o.status for o in result.outcomes] == [TestStatus.PASS, TestStatus.PASS]

        mixed = Problem(
            problem_id="p",
            prompt_markdown="",
            language_tag="echo",
            starter_code="",
            blanks=[],
            tests=[
                TestCase("ok", "print done", "hi\ndone", 1000),
                TestCase("bad", "", "other", 1000),
                TestCase("err", "exit 2", "hi", 1000),
            ],
        )
        first = run_tests(mixed, "print hi", echo)
        for _ in range(9):
            again = run_tests(mixed, "print hi", echo)
            assert [(o.test_id, o.status, o.detail) for o in again.outcomes] == [
                (o.test_id, o.status, o.detail) for o in first.outcomes
            ]


# ----------------------------------------------------------------------
# 7. Crash recovery at random points


class CapturingLog(EventLog):
    """Tap the log: deep-copy all room state at chosen sequence numbers."""

    def __init__(self, path, core_ref, capture_at):
        super().__init__(path)
        self.core_ref = core_ref
        self.capture_at = set(capture_at)
        self.captures = {}

    def append(self, record):
        super().append(record)
        if record.seq in self.capture_at:
            core = self.core_ref["core"]
            self.captures[record.seq] = {
                rid: copy.deepcopy(room.to_dict()) for rid, room in core.rooms.items()
            }


def test_criterion_crash_recovery(tmp_path):
    with criterion("crash recovery: 5 random kill points rebuild rooms deep-equal"):
        rng = random.Random(2024)
        cfg = ScenarioConfig(
            name="crash",
            groups=4,
            students_per_group=5,
            duration_minutes=10,
            edits_per_student_per_minute=2.0,
            questions_per_group_mean=4.0,
            label_probability=0.3,
        )
        log_path = tmp_path / "events.log"
        # First pass to learn how many events the run produces.
        probe = Simulation(cfg, seed=99, log=EventLog())
        probe_report = probe.run()
        assert probe_report["ok"]
        total_events = len(probe.core.log.records)
        assert total_events > 50
        kill_points = sorted(rng.sample(range(10, total_events), 5))

        core_ref = {}
        log = CapturingLog(log_path, core_ref, kill_points)
        sim = Simulation(cfg, seed=99, log=log)
        core_ref["core"] = sim.core
        report = sim.run()
        assert report["ok"]
        assert set(kill_points) <= set(log.captures)

        all_lines = log_path.read_text().splitlines()
        worksheets = {sim.worksheet.worksheet_id: sim.worksheet}
        for seq in kill_points:
            truncated = tmp_path / f"truncated-{seq}.log"
            truncated.write_text("\n".join(all_lines[:seq]) + "\n")
            rooms, truncation, applied = recover(truncated, worksheets)
            assert truncation is None
            assert applied == seq
            recovered = {rid: room.to_dict() for rid, room in rooms.items()}
            assert recovered == log.captures[seq], f"mismatch at kill point {seq}"


# ----------------------------------------------------------------------
# 8. Room capacity


def test_criterion_room_capacity():
    with criterion("room capacity: 8th student rejected, TA join bypasses"):
        ws = build_worksheet()
        cfg = CoreConfig(
            active_worksheet_id=ws.worksheet_id, groups={1}, ta_allowlist={"ta@x.edu"}
        )
        core = ServerCore({ws.worksheet_id: ws}, cfg, clock=VirtualClock(0), log=EventLog())
        for i in range(7):
            core.join(f"s{i}@x.edu", 1)
        with pytest.raises(DomainError) as e:
            core.join("s7@x.edu", 1)
        assert e.value.code == "room_full"
        ta_session = core.join("ta@x.edu", 1)
        assert ta_session.room_id == "room-001"
        assert core.rooms["room-001"].student_count() == 7
        assert len(core.rooms["room-001"].members) == 8
