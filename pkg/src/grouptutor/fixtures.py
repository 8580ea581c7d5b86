"""Deployment-shaped replay fixtures.

A fixture is a recorded command stream (joins plus wire frames with
virtual timestamps) bundled with the exact usage tallies replaying it
must reproduce. The bundled deployment fixture mirrors the reference
deployment's shape: 7516 AI replies across 115 groups, of which the
first 432 predate the labeling feature, 336 carry student labels (366
label instances: helpful 156, unhelpful 129, too much help 39,
incorrect 42), and 614 were reviewed (read 423, endorsed 188, edited 3).

Replay pushes every command through the real server dispatch path and
compares metrics_summary output against the embedded expectations.
"""

from __future__ import annotations

import gzip
import json
import random
from pathlib import Path
from typing import Union

from .clock import VirtualClock
from .cms import import_worksheet
from .core import CoreConfig, ServerCore, frame
from .sim import BUILTIN_WORKSHEET, QUESTION_POOL
from .tutor import ScriptedMockBackend

DEPLOYMENT_SHAPE = {
    "rooms": 115,
    "asks": 7516,
    "unlabelable": 432,
    "labels": {"helpful": 156, "unhelpful": 129, "too_much_help": 39, "incorrect": 42},
    "labeled_messages": 336,
    "reviews": {"read": 423, "endorsed": 188, "edited": 3},
}

TA_EMAIL = "ta@course.edu"
ASK_SPACING_MS = 1000


def _reply_message_id(ask_index: int) -> str:
    # Each ask mints exactly two message ids: the student turn then the
    # AI reply. Nothing else in a fixture mints message ids, so the
    # reply id is a closed form; replay errors out loudly if that ever
    # stops holding.
    return f"m-{2 * ask_index + 2:06d}"


def make_deployment_fixture(
    seed: int = 20240501,
    rooms: int = DEPLOYMENT_SHAPE["rooms"],
    asks: int = DEPLOYMENT_SHAPE["asks"],
    unlabelable: int = DEPLOYMENT_SHAPE["unlabelable"],
    labels: dict[str, int] | None = None,
    labeled_messages: int | None = None,
    reviews: dict[str, int] | None = None,
) -> dict:
    """Build a fixture with exact label/review tallies.

    Scaled-down shapes (fewer rooms/asks) are used by fast tests; the
    defaults reproduce the full deployment tables.
    """
    labels = dict(labels if labels is not None else DEPLOYMENT_SHAPE["labels"])
    reviews = dict(reviews if reviews is not None else DEPLOYMENT_SHAPE["reviews"])
    total_labels = sum(labels.values())
    if labeled_messages is None:
        labeled_messages = (
            DEPLOYMENT_SHAPE["labeled_messages"]
            if labels == DEPLOYMENT_SHAPE["labels"]
            else total_labels
        )
    if not labeled_messages <= total_labels <= 2 * labeled_messages:
        raise ValueError("label instances must fit on labeled messages at <=2 per message")
    if labeled_messages > asks - unlabelable:
        raise ValueError("not enough labelable messages")
    if sum(reviews.values()) > asks:
        raise ValueError("more reviews than messages")

    rng = random.Random(seed)
    label_feature_since_ms = unlabelable * ASK_SPACING_MS + ASK_SPACING_MS // 2

    commands: list[dict] = []
    for room in range(1, rooms + 1):
        for s in range(2):
            commands.append(
                {"at": 0, "kind": "join", "email": f"s{s}.g{room}@course.edu", "group": room}
            )
    commands.append({"at": 0, "kind": "join", "email": TA_EMAIL, "group": 0})

    labelable_indices = list(range(unlabelable, asks))
    labeled_idx = sorted(rng.sample(labelable_indices, labeled_messages))
    double_labeled = set(rng.sample(labeled_idx, total_labels - labeled_messages))

    label_pool = [name for name, count in sorted(labels.items()) for _ in range(count)]
    rng.shuffle(label_pool)
    label_assignment: dict[int, list[str]] = {}
    cursor = 0
    for idx in labeled_idx:
        label_assignment[idx] = [label_pool[cursor]]
        cursor += 1
    for idx in sorted(double_labeled):
        label_assignment[idx].append(label_pool[cursor])
        cursor += 1
    assert cursor == total_labels

    reviewed_idx = sorted(rng.sample(range(asks), sum(reviews.values())))
    action_pool = [name for name, count in sorted(reviews.items()) for _ in range(count)]
    rng.shuffle(action_pool)
    action_map = {"read": "read", "endorsed": "endorse", "edited": "edit"}
    review_assignment = {idx: action_map[action_pool[i]] for i, idx in enumerate(reviewed_idx)}

    for i in range(asks):
        room = (i % rooms) + 1
        at = (i + 1) * ASK_SPACING_MS
        asker = f"s{i % 2}.g{room}@course.edu"
        commands.append(
            {
                "at": at,
                "kind": "frame",
                "email": asker,
                "frame": frame("ask_tutor", {"text": rng.choice(QUESTION_POOL)}),
            }
        )
        reply_id = _reply_message_id(i)
        for who, label in enumerate(label_assignment.get(i, [])):
            commands.append(
                {
                    "at": at + 200 + who,
                    "kind": "frame",
                    "email": f"s{who}.g{room}@course.edu",
                    "frame": frame("label", {"message_id": reply_id, "label": label}),
                }
            )
        action = review_assignment.get(i)
        if action is not None:
            body = {"room_id": f"room-{room:03d}", "message_id": reply_id, "action": action}
            if action == "edit":
                body["new_body"] = "Careful: re-check the expected output before changing code."
            commands.append(
                {"at": at + 500, "kind": "frame", "email": TA_EMAIL, "frame": frame("review", body)}
            )

    labelable_count = asks - unlabelable
    return {
        "version": 1,
        "name": "deployment-tables",
        "seed": seed,
        "worksheet": BUILTIN_WORKSHEET,
        "config": {
            "groups": rooms,
            "ta_allowlist": [TA_EMAIL],
            "label_feature_since_ms": label_feature_since_ms,
            "max_group_size": 7,
        },
        "commands": commands,
        "expected": {
            "ai_messages": asks,
            "labelable_messages": labelable_count,
            "labeled_messages": labeled_messages,
            "student_label_tallies": labels,
            "reviewed_messages": sum(reviews.values()),
            "ta_action_tallies": reviews,
            "reviewed_fraction": sum(reviews.values()) / asks if asks else 0.0,
            "label_rate": labeled_messages / labelable_count if labelable_count else 0.0,
        },
    }


def write_fixture(fixture: dict, path: Path) -> None:
    data = json.dumps(fixture, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".gz":
        path.write_bytes(gzip.compress(data, mtime=0))
    else:
        path.write_bytes(data)


def load_fixture(path: Union[Path, str]) -> dict:
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".gz":
        raw = gzip.decompress(raw)
    return json.loads(raw)


def replay_fixture(fixture: Union[dict, Path, str]) -> dict:
    """Run the command stream through real dispatch and diff the metrics.

    The returned report carries the computed metrics, the embedded
    expectations, any mismatches, and every error frame the replay
    produced; ok means zero mismatches and zero errors.
    """
    if not isinstance(fixture, dict):
        fixture = load_fixture(fixture)

    worksheet = import_worksheet(fixture["worksheet"])
    if isinstance(worksheet, list):
        raise ValueError("fixture worksheet failed to parse")
    cfg_in = fixture.get("config", {})
    config = CoreConfig(
        active_worksheet_id=worksheet.worksheet_id,
        groups=set(range(1, cfg_in.get("groups", 0) + 1)),
        ta_allowlist=set(cfg_in.get("ta_allowlist", [])),
        max_group_size=cfg_in.get("max_group_size", 7),
        label_feature_since_ms=cfg_in.get("label_feature_since_ms", 0),
    )
    clock = VirtualClock(0)
    core = ServerCore(
        {worksheet.worksheet_id: worksheet},
        config,
        clock=clock,
        backend=ScriptedMockBackend(),
    )

    sessions: dict[str, object] = {}
    errors: list[dict] = []
    commands = sorted(fixture["commands"], key=lambda c: c["at"])
    for cmd in commands:
        clock.advance_to(cmd["at"])
        if cmd["kind"] == "join":
            sessions[cmd["email"]] = core.join(cmd["email"], cmd["group"])
        elif cmd["kind"] == "frame":
            session = sessions[cmd["email"]]
            for _, fr in core.handle_frame(session.session_id, cmd["frame"]):
                if fr["kind"] == "error":
                    errors.append({"email": cmd["email"], "command": cmd, "error": fr["body"]})
        else:
            raise ValueError(f"unknown fixture command kind {cmd['kind']!r}")

    metrics = core.metrics()
    expected = fixture["expected"]
    mismatches = {}
    for key, want in expected.items():
        got = metrics.get(key)
        if isinstance(want, float):
            if got is None or abs(got - want) > 1e-12:
                mismatches[key] = {"expected": want, "actual": got}
        elif got != want:
            mismatches[key] = {"expected": want, "actual": got}

    return {
        "fixture": fixture.get("name", "fixture"),
        "commands": len(commands),
        "metrics": {k: metrics[k] for k in expected},
        "questions_per_group": metrics["questions_per_group"]["mean"],
        "expected": expected,
        "mismatches": mismatches,
        "error_frames": errors[:20],
        "error_count": len(errors),
        "ok": not mismatches and not errors,
    }
