"""Deterministic headless section simulator.

Bot students and a bot TA drive a full tutoring section against a real
ServerCore through the actual JSON wire frames; only the transport is
simulated (a discrete-event queue with per-connection latency and FIFO
delivery). Under a fixed seed and virtual time the whole run, report
included, is byte-reproducible.
"""

from __future__ import annotations

import heapq
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import yaml

from . import cms
from .clock import RealClock, VirtualClock
from .console import metrics_summary
from .core import CoreConfig, ServerCore, frame
from .events import EventLog
from .model import Worksheet
from .sync import EditOp, SyncClient, replay_ops
from .tutor import ScriptedMockBackend

BUILTIN_WORKSHEET = """---
title: Section Worksheet
worksheet_id: ws-section
published: true
---

## warmup
id: warmup

Fill in both lines so the program prints the same word twice.

```starter echo
print {{blank:first}}
print {{blank:second}}
print {{blank:third}}
```

```test
id: t1
suffix: print done
expect: |
  done
timeout_ms: 1000
```
"""

LABEL_NAMES = ["helpful", "unhelpful", "too_much_help", "incorrect"]


@dataclass
class ScenarioConfig:
    name: str = "section"
    groups: int = 15
    students_per_group: int = 7
    duration_minutes: float = 80.0
    questions_per_group_mean: float = 5.87
    edits_per_student_per_minute: float = 2.0
    grader_runs_per_group_mean: float = 1.5
    label_probability: float = 0.05
    label_mix: dict = field(
        default_factory=lambda: {
            "helpful": 0.43,
            "unhelpful": 0.35,
            "too_much_help": 0.11,
            "incorrect": 0.11,
        }
    )
    ta_poll_interval_s: float = 30.0
    ta_review_fraction: float = 0.5
    ta_action_mix: dict = field(
        default_factory=lambda: {"read": 0.69, "endorse": 0.30, "edit": 0.01}
    )
    ta_chat_probability: float = 0.05
    latency_ms_min: int = 10
    latency_ms_max: int = 80
    worksheet_path: Optional[str] = None

    @classmethod
    def from_file(cls, path: Path) -> "ScenarioConfig":
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
        known = {f_.name for f_ in cls.__dataclass_fields__.values()}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**data)


def _poisson(rng: random.Random, mean: float) -> int:
    """Knuth's method; fine for the small means scenarios use."""
    if mean <= 0:
        return 0
    limit = math.exp(-mean)
    k, p = 0, 1.0
    while True:
        p *= rng.random()
        if p <= limit:
            return k
        k += 1


def _weighted_choice(rng: random.Random, mix: dict[str, float]) -> str:
    names = sorted(mix)
    total = sum(mix[n] for n in names)
    roll = rng.random() * total
    acc = 0.0
    for name in names:
        acc += mix[name]
        if roll <= acc:
            return name
    return names[-1]


class EventQueue:
    def __init__(self, clock: VirtualClock):
        self.clock = clock
        self._heap: list = []
        self._tick = 0

    def at(self, at_ms: int, fn: Callable[[], None]) -> None:
        self._tick += 1
        heapq.heappush(self._heap, (max(at_ms, self.clock.now_ms()), self._tick, fn))

    def run(self) -> int:
        processed = 0
        while self._heap:
            at_ms, _, fn = heapq.heappop(self._heap)
            self.clock.advance_to(at_ms)
            fn()
            processed += 1
        return processed


class Wire:
    """Simulated transport: JSON-encodes every frame both ways, delivers
    per-recipient in FIFO order with random latency."""

    def __init__(self, rng, queue: EventQueue, cfg: ScenarioConfig):
        self.rng = rng
        self.queue = queue
        self.cfg = cfg
        self.bots: dict[str, "Bot"] = {}
        self._last_delivery: dict[str, int] = {}
        self.frames_sent = 0

    def latency(self) -> int:
        return self.rng.randint(self.cfg.latency_ms_min, self.cfg.latency_ms_max)

    def deliver(self, session_id: str, fr: dict) -> None:
        encoded = json.dumps(fr, separators=(",", ":"))
        bot = self.bots.get(session_id)
        if bot is None:
            return
        at = max(
            self.queue.clock.now_ms() + self.latency(),
            self._last_delivery.get(session_id, 0),
        )
        self._last_delivery[session_id] = at
        self.frames_sent += 1
        self.queue.at(at, lambda: bot.on_frame(json.loads(encoded)))

    def deliver_all(self, outbound) -> None:
        for session_id, fr in outbound:
            self.deliver(session_id, fr)


class Bot:
    def __init__(self, sim: "Simulation", session):
        self.sim = sim
        self.session = session

    def send(self, fr: dict) -> None:
        """Uplink: encode, dispatch after latency, fan out the results."""
        encoded = json.dumps(fr, separators=(",", ":"))
        at = self.sim.queue.clock.now_ms() + self.sim.wire.latency()

        def dispatch():
            outbound = self.sim.core.handle_frame(self.session.session_id, json.loads(encoded))
            self.sim.wire.deliver_all(outbound)

        self.sim.queue.at(at, dispatch)

    def on_frame(self, fr: dict) -> None:
        raise NotImplementedError


class StudentBot(Bot):
    def __init__(self, sim, session, problem_id: str, initial: dict[str, str]):
        super().__init__(sim, session)
        self.problem_id = problem_id
        self.replica = SyncClient(session.participant.participant_id, problem_id, 0, initial)
        self.edit_sent_at: dict[int, int] = {}
        self.errors: list[dict] = []

    def generate_edit(self) -> None:
        rng = self.sim.rng
        blank = rng.choice(sorted(self.replica.texts))
        text = self.replica.texts[blank]
        if text and rng.random() < 0.4:
            pos = rng.randrange(len(text))
            self.replica.local_delete(blank, pos, rng.randint(1, min(3, len(text) - pos)))
        else:
            payload = "".join(rng.choice("abcdefg ") for _ in range(rng.randint(1, 4)))
            self.replica.local_insert(blank, rng.randint(0, len(text)), payload)
        self.pump()

    def pump(self) -> None:
        op = self.replica.take_op()
        if op is None:
            return
        self.edit_sent_at[op.client_seq] = self.sim.queue.clock.now_ms()
        body = op.to_dict()
        body.pop("client_id")
        self.send(frame("edit", body))

    def ask(self, text: str) -> None:
        self.send(frame("ask_tutor", {"text": text}))

    def on_frame(self, fr: dict) -> None:
        kind = fr["kind"]
        body = fr["body"]
        if kind == "edit_applied":
            edit = EditOp.from_dict(body["op"])
            if edit.problem_id == self.problem_id:
                self.replica.receive(body["server_version"], edit)
                if edit.client_id == self.replica.client_id:
                    sent = self.edit_sent_at.pop(edit.client_seq, None)
                    if sent is not None:
                        self.sim.latencies.append(self.sim.queue.clock.now_ms() - sent)
                self.pump()
        elif kind == "chat_message":
            msg = body["message"]
            if (
                msg["channel"] == "ai_tutor"
                and msg["author_kind"] == "ai"
                and not msg.get("system_notice")
                and msg.get("labelable", True)
                and self.sim.rng.random() < self.sim.cfg.label_probability
            ):
                label = _weighted_choice(self.sim.rng, self.sim.cfg.label_mix)
                self.send(frame("label", {"message_id": msg["message_id"], "label": label}))
        elif kind == "error":
            self.errors.append(body)


class TABot(Bot):
    def __init__(self, sim, session):
        super().__init__(sim, session)
        self.actioned: set[str] = set()
        self.errors: list[dict] = []

    def poll(self) -> None:
        self.send(frame("list_rooms"))

    def on_frame(self, fr: dict) -> None:
        kind = fr["kind"]
        body = fr["body"]
        if kind == "room_list":
            for summary in body["rooms"]:
                if summary["unreviewed_count"] > 0:
                    self.send(frame("room_detail", {"room_id": summary["room_id"]}))
            if body["rooms"] and self.sim.rng.random() < self.sim.cfg.ta_chat_probability:
                top = body["rooms"][0]["room_id"]
                self.send(frame("ta_chat", {"room_id": top, "text": "how is it going here?"}))
        elif kind == "room_detail":
            for msg in body["ai_chat"]:
                if (
                    msg["author_kind"] == "ai"
                    and msg["review"] == "unreviewed"
                    and not msg.get("system_notice")
                    and msg["message_id"] not in self.actioned
                    and self.sim.rng.random() < self.sim.cfg.ta_review_fraction
                ):
                    self.actioned.add(msg["message_id"])
                    action = _weighted_choice(self.sim.rng, self.sim.cfg.ta_action_mix)
                    review_body = {
                        "room_id": body["room_id"],
                        "message_id": msg["message_id"],
                        "action": action,
                    }
                    if action == "edit":
                        review_body["new_body"] = msg["body"] + " (clarified by your TA)"
                    self.send(frame("review", review_body))
        elif kind == "error":
            self.errors.append(body)


QUESTION_POOL = [
    "How do we even start this one?",
    "Why does the grader say our output is wrong?",
    "What's the difference between the first and second blank?",
    "Is there a simpler way to write this?",
    "We keep getting an extra line, where does it come from?",
    "Does the order of the print statements matter here?",
    "Can someone explain what the starter code is doing?",
    "What should the loop condition be?",
]


class Simulation:
    def __init__(self, cfg: ScenarioConfig, seed: int, virtual_time: bool = True,
                 log_path: Optional[Path] = None, log: Optional[EventLog] = None):
        self.cfg = cfg
        self.seed = seed
        self.rng = random.Random(seed)
        self.clock = VirtualClock(0)
        self.queue = EventQueue(self.clock)
        self.virtual_time = virtual_time
        self.stamp_clock = self.clock if virtual_time else RealClock()

        worksheet = self._load_worksheet(cfg)
        groups = set(range(1, cfg.groups + 1))
        core_cfg = CoreConfig(
            active_worksheet_id=worksheet.worksheet_id,
            groups=groups,
            ta_allowlist={"ta@course.edu"},
        )
        self.core = ServerCore(
            {worksheet.worksheet_id: worksheet},
            core_cfg,
            clock=self.stamp_clock,
            log=log if log is not None else EventLog(log_path),
            backend=ScriptedMockBackend(),
        )
        self.worksheet = worksheet
        self.wire = Wire(self.rng, self.queue, cfg)
        self.students: list[StudentBot] = []
        self.ta: Optional[TABot] = None
        self.latencies: list[int] = []

    @staticmethod
    def _load_worksheet(cfg: ScenarioConfig) -> Worksheet:
        if cfg.worksheet_path:
            source = Path(cfg.worksheet_path).read_text(encoding="utf-8")
        else:
            source = BUILTIN_WORKSHEET
        result = cms.import_worksheet(source)
        if isinstance(result, list):
            raise ValueError("scenario worksheet failed to parse: " + "; ".join(map(str, result)))
        return result

    # ------------------------------------------------------------------

    def _setup(self) -> None:
        cfg = self.cfg
        duration_ms = int(cfg.duration_minutes * 60_000)
        problem = self.worksheet.problems[0]
        initial = {b.blank_id: b.initial_text for b in problem.blanks}

        for group in range(1, cfg.groups + 1):
            group_bots = []
            for i in range(cfg.students_per_group):
                session = self.core.join(f"s{i}.g{group}@course.edu", group)
                bot = StudentBot(self, session, problem.problem_id, initial)
                self.wire.bots[session.session_id] = bot
                self.students.append(bot)
                group_bots.append(bot)

                n_edits = _poisson(
                    self.rng, cfg.edits_per_student_per_minute * cfg.duration_minutes
                )
                for _ in range(n_edits):
                    self.queue.at(self.rng.randrange(duration_ms), bot.generate_edit)

            n_questions = _poisson(self.rng, cfg.questions_per_group_mean)
            for q in range(n_questions):
                asker = self.rng.choice(group_bots)
                text = f"{self.rng.choice(QUESTION_POOL)} (g{group} q{q})"
                self.queue.at(self.rng.randrange(duration_ms), lambda b=asker, t=text: b.ask(t))

            n_grades = _poisson(self.rng, cfg.grader_runs_per_group_mean)
            for _ in range(n_grades):
                runner = self.rng.choice(group_bots)
                self.queue.at(
                    self.rng.randrange(duration_ms),
                    lambda b=runner: b.send(frame("check_answer", {})),
                )

        ta_session = self.core.join("ta@course.edu", 0)
        self.ta = TABot(self, ta_session)
        self.wire.bots[ta_session.session_id] = self.ta
        poll_ms = int(cfg.ta_poll_interval_s * 1000)
        for at in range(poll_ms, duration_ms, poll_ms):
            self.queue.at(at, self.ta.poll)

    def _check_convergence(self) -> dict:
        failures = []
        rooms_checked = 0
        for room in self.core.rooms.values():
            rooms_checked += 1
            for problem_id, doc in room.doc_states.items():
                oracle = replay_ops(doc.initial_texts, doc.applied_ops)
                if oracle != doc.texts:
                    failures.append(
                        {
                            "room_id": room.room_id,
                            "problem_id": problem_id,
                            "reason": "server text does not match op-log replay",
                            "op_log": [op.to_dict() for op in doc.applied_ops],
                        }
                    )
        for bot in self.students:
            room = self.core.rooms[bot.session.room_id]
            doc = room.doc_states[bot.problem_id]
            if bot.replica.pending_count != 0:
                failures.append(
                    {
                        "room_id": room.room_id,
                        "client": bot.replica.client_id,
                        "reason": f"client still has {bot.replica.pending_count} unsent ops",
                    }
                )
            elif bot.replica.texts != doc.texts:
                failures.append(
                    {
                        "room_id": room.room_id,
                        "client": bot.replica.client_id,
                        "reason": "replica text diverged from server",
                        "replica": bot.replica.texts,
                        "server": doc.texts,
                        "op_log": [op.to_dict() for op in doc.applied_ops],
                    }
                )
        return {"ok": not failures, "rooms_checked": rooms_checked, "failures": failures}

    @staticmethod
    def _percentile(values: list[int], q: float) -> float:
        if not values:
            return 0.0
        ordered = sorted(values)
        idx = min(len(ordered) - 1, max(0, math.ceil(q * len(ordered)) - 1))
        return float(ordered[idx])

    def run(self) -> dict:
        self._setup()
        processed = self.queue.run()

        metrics = metrics_summary(self.core.rooms.values())
        convergence = self._check_convergence()
        bot_errors = [e for b in self.students for e in b.errors] + (
            self.ta.errors if self.ta else []
        )
        report = {
            "scenario": self.cfg.name,
            "seed": self.seed,
            "virtual_time": self.virtual_time,
            "groups": self.cfg.groups,
            "students_per_group": self.cfg.students_per_group,
            "duration_minutes": self.cfg.duration_minutes,
            "events_processed": processed,
            "frames_delivered": self.wire.frames_sent,
            "questions": metrics["questions_per_group"],
            "label_tallies": metrics["student_label_tallies"],
            "review_tallies": metrics["ta_action_tallies"],
            "ai_messages": metrics["ai_messages"],
            "reviewed_fraction": metrics["reviewed_fraction"],
            "convergence": convergence,
            "bot_errors": bot_errors,
            "latency_ms": {
                "count": len(self.latencies),
                "p50": self._percentile(self.latencies, 0.50),
                "p90": self._percentile(self.latencies, 0.90),
                "p99": self._percentile(self.latencies, 0.99),
            },
            "ok": convergence["ok"] and not bot_errors,
        }
        return report


def run_scenario(
    cfg: ScenarioConfig,
    seed: int,
    virtual_time: bool = True,
    log_path: Optional[Path] = None,
    log: Optional[EventLog] = None,
) -> dict:
    return Simulation(cfg, seed, virtual_time=virtual_time, log_path=log_path, log=log).run()


def report_to_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
