#!/usr/bin/env python3
"""Regenerate the frozen tutor-context golden files.

Builds the three canonical room states (never graded; graded; 25-turn
history with a 20-turn window) through the real dispatch path with a
virtual clock, then writes the assembled contexts to tests/golden/.
Rerun only when the context-assembly contract intentionally changes.
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from conftest import build_worksheet  # noqa: E402

from grouptutor.clock import VirtualClock  # noqa: E402
from grouptutor.core import CoreConfig, ServerCore, frame  # noqa: E402
from grouptutor.events import EventLog  # noqa: E402
from grouptutor.tutor import TutorPolicy, assemble_context  # noqa: E402

GOLDEN_DIR = ROOT / "tests" / "golden"


def build_core():
    ws = build_worksheet()
    cfg = CoreConfig(active_worksheet_id=ws.worksheet_id, groups={1})
    return ServerCore({ws.worksheet_id: ws}, cfg, clock=VirtualClock(1_000_000), log=EventLog()), ws


def edit(blank, text, seq, base):
    return frame(
        "edit",
        {
            "problem_id": "sum-twice",
            "blank_id": blank,
            "kind": "insert",
            "position": 0,
            "text": text,
            "client_seq": seq,
            "base_version": base,
        },
    )


def never_graded():
    core, ws = build_core()
    s = core.join("golden@school.edu", 1)
    core.handle_frame(s.session_id, edit("value", "3", 1, 0))
    core.handle_frame(s.session_id, edit("again", "3", 2, 1))
    core.handle_frame(s.session_id, frame("ask_tutor", {"text": "does this look right?"}))
    return core, ws


def graded():
    core, ws = never_graded()
    core.clock.advance(5_000)
    session = next(iter(core.sessions.values()))
    core.handle_frame(session.session_id, frame("check_answer", {}))
    core.handle_frame(session.session_id, frame("ask_tutor", {"text": "why did it fail?"}))
    return core, ws


def long_history():
    core, ws = build_core()
    s = core.join("golden@school.edu", 1)
    # 13 asks -> 26 turns in the channel; only 12 asks fit hand-made
    # numbering, so drive 13 and let the window cut to the newest 20.
    for i in range(13):
        core.clock.advance(1_000)
        core.handle_frame(s.session_id, frame("ask_tutor", {"text": f"question number {i}"}))
    return core, ws


def main():
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    cases = {
        "context_never_graded": never_graded,
        "context_graded": graded,
        "context_long_history": long_history,
    }
    for name, builder in cases.items():
        core, ws = builder()
        room = core.rooms["room-001"]
        ctx = assemble_context(room, ws, TutorPolicy(turn_window=20))
        path = GOLDEN_DIR / f"{name}.json"
        path.write_text(json.dumps(ctx.to_dict(), indent=2, sort_keys=True) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
