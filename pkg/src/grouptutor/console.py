"""TA-facing logic: room prioritization, AI-message moderation, metrics.

Rooms with unreviewed AI activity sort ahead of everything else so a TA
covering many groups sees where attention is needed; within each
partition the most recently active room comes first, with room_id as a
final deterministic tiebreak.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import mean, median
from typing import Iterable, Optional

from .model import (
    REVIEW_TRANSITIONS,
    AuthorKind,
    ChatMessage,
    DomainError,
    SessionRoom,
    StudentFeedbackLabel,
    TAReviewState,
)

REVIEW_ACTIONS = {
    "read": TAReviewState.READ,
    "endorse": TAReviewState.ENDORSED,
    "edit": TAReviewState.EDITED,
}


@dataclass
class RoomSummary:
    room_id: str
    group_number: int
    unreviewed_count: int
    selected_problem: str
    member_count: int
    last_activity: int
    last_grader_pass: Optional[bool]

    def to_dict(self) -> dict:
        return {
            "room_id": self.room_id,
            "group_number": self.group_number,
            "unreviewed_count": self.unreviewed_count,
            "selected_problem": self.selected_problem,
            "member_count": self.member_count,
            "last_activity": self.last_activity,
            "last_grader_pass": self.last_grader_pass,
        }


def summarize_room(room: SessionRoom) -> RoomSummary:
    last = room.grader_history[-1] if room.grader_history else None
    return RoomSummary(
        room_id=room.room_id,
        group_number=room.group_number,
        unreviewed_count=room.unreviewed_count,
        selected_problem=room.selected_problem,
        member_count=len(room.members),
        last_activity=room.last_activity,
        last_grader_pass=None if last is None else last.overall_pass,
    )


def list_rooms(rooms: Iterable[SessionRoom]) -> list[RoomSummary]:
    """Total order: unread rooms first, then recency, then room_id."""
    return [
        summarize_room(r)
        for r in sorted(
            rooms,
            key=lambda r: (r.unreviewed_count == 0, -r.last_activity, r.room_id),
        )
    ]


def recompute_unreviewed(room: SessionRoom) -> int:
    """From-scratch count; must always agree with the maintained counter."""
    return sum(
        1
        for m in room.ai_chat
        if m.author_kind == AuthorKind.AI and m.review == TAReviewState.UNREVIEWED
    )


def apply_review(
    room: SessionRoom,
    message_id: str,
    action: str,
    new_body: Optional[str] = None,
) -> ChatMessage:
    """Apply a read/endorse/edit action, enforcing state transitions.

    The first action on an unreviewed message clears it from the unread
    counter; later actions only move the state machine.
    """
    target = REVIEW_ACTIONS.get(action)
    if target is None:
        raise DomainError("unknown_action", f"unknown review action {action!r}")
    msg = room.find_message(message_id)
    if msg is None:
        raise DomainError("unknown_message", f"no message {message_id!r} in room")
    if msg.author_kind != AuthorKind.AI:
        raise DomainError("not_ai_message", "review actions apply to AI messages only")
    if target not in REVIEW_TRANSITIONS[msg.review]:
        raise DomainError(
            "invalid_transition", f"cannot move review state {msg.review.value} -> {target.value}"
        )
    if target == TAReviewState.EDITED:
        if new_body is None:
            raise DomainError("missing_body", "edit action requires a replacement body")
        msg.revisions.append(msg.body)
        msg.body = new_body

    was_unreviewed = msg.review == TAReviewState.UNREVIEWED
    msg.review = target
    if was_unreviewed:
        room.unreviewed_count -= 1
        if room.unreviewed_count < 0:
            raise AssertionError("unreviewed_count went negative")
    return msg


def metrics_summary(rooms: Iterable[SessionRoom]) -> dict:
    """Aggregate usage tallies across rooms.

    Counts student questions to the AI per group, student feedback
    labels by variant, review states by variant, and how much of the AI
    traffic has been reviewed or labeled.
    """
    rooms = list(rooms)
    per_group: list[int] = []
    label_tallies = {label.value: 0 for label in StudentFeedbackLabel}
    action_tallies = {"read": 0, "endorsed": 0, "edited": 0}
    ai_messages = 0
    labelable_messages = 0
    labeled_messages = 0
    reviewed_messages = 0

    for room in sorted(rooms, key=lambda r: r.room_id):
        questions = 0
        for msg in room.ai_chat:
            if msg.author_kind == AuthorKind.STUDENT:
                questions += 1
            elif msg.author_kind == AuthorKind.AI and not msg.system_notice:
                ai_messages += 1
                if msg.labelable:
                    labelable_messages += 1
                if msg.student_labels:
                    labeled_messages += 1
                for label in msg.student_labels.values():
                    label_tallies[label.value] += 1
                if msg.review != TAReviewState.UNREVIEWED:
                    reviewed_messages += 1
                    action_tallies[msg.review.value] += 1
        per_group.append(questions)

    histogram: dict[str, int] = {}
    for count in per_group:
        histogram[str(count)] = histogram.get(str(count), 0) + 1

    return {
        "rooms": len(rooms),
        "questions_per_group": {
            "per_group": per_group,
            "mean": mean(per_group) if per_group else 0.0,
            "median": float(median(per_group)) if per_group else 0.0,
            "histogram": histogram,
        },
        "student_label_tallies": label_tallies,
        "ai_messages": ai_messages,
        "labelable_messages": labelable_messages,
        "labeled_messages": labeled_messages,
        "label_rate": (labeled_messages / labelable_messages) if labelable_messages else 0.0,
        "reviewed_messages": reviewed_messages,
        "reviewed_fraction": (reviewed_messages / ai_messages) if ai_messages else 0.0,
        "ta_action_tallies": action_tallies,
    }
