"""Shared domain types for worksheets, rooms, chat, and grading.

Everything here is plain data: values can be copied between threads or
serialized without surprises. Mutation of live room state is owned by
the server core, which serializes access per room.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

BLANK_MARKER_RE = re.compile(r"\{\{blank:([A-Za-z0-9_.-]+)\}\}")

DEFAULT_MAX_GROUP_SIZE = 7


class Role(str, Enum):
    STUDENT = "student"
    TA = "ta"


class StudentFeedbackLabel(str, Enum):
    HELPFUL = "helpful"
    UNHELPFUL = "unhelpful"
    TOO_MUCH_HELP = "too_much_help"
    INCORRECT = "incorrect"


class TAReviewState(str, Enum):
    UNREVIEWED = "unreviewed"
    READ = "read"
    ENDORSED = "endorsed"
    EDITED = "edited"


# Allowed review transitions. Endorsed -> Edited is permitted so a later
# TA can still correct a message another TA endorsed; Edited is terminal.
REVIEW_TRANSITIONS = {
    TAReviewState.UNREVIEWED: {TAReviewState.READ, TAReviewState.ENDORSED, TAReviewState.EDITED},
    TAReviewState.READ: {TAReviewState.ENDORSED, TAReviewState.EDITED},
    TAReviewState.ENDORSED: {TAReviewState.EDITED},
    TAReviewState.EDITED: set(),
}


class Channel(str, Enum):
    AI_TUTOR = "ai_tutor"
    TA_CHAT = "ta_chat"


class AuthorKind(str, Enum):
    STUDENT = "student"
    AI = "ai"
    TA = "ta"


class TestStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    ERROR = "error"
    TIMEOUT = "timeout"


@dataclass
class BlankRegion:
    blank_id: str
    placeholder: str = ""
    initial_text: str = ""


@dataclass
class TestCase:
    test_id: str
    program_suffix: str
    expected_stdout: str
    timeout_ms: int = 5000


@dataclass
class Problem:
    problem_id: str
    prompt_markdown: str
    language_tag: str
    starter_code: str
    blanks: list[BlankRegion] = field(default_factory=list)
    tests: list[TestCase] = field(default_factory=list)


@dataclass
class Worksheet:
    worksheet_id: str
    title: str
    problems: list[Problem] = field(default_factory=list)
    published: bool = False

    def problem(self, problem_id: str) -> Optional[Problem]:
        for p in self.problems:
            if p.problem_id == problem_id:
                return p
        return None


@dataclass
class Participant:
    participant_id: str
    email: str
    role: Role
    display_name: str = ""


@dataclass
class TestOutcome:
    test_id: str
    status: TestStatus
    detail: str = ""


@dataclass
class GraderResult:
    result_id: str
    problem_id: str
    outcomes: list[TestOutcome]
    overall_pass: bool
    ran_at: int

    def to_dict(self) -> dict:
        return {
            "result_id": self.result_id,
            "problem_id": self.problem_id,
            "outcomes": [
                {"test_id": o.test_id, "status": o.status.value, "detail": o.detail}
                for o in self.outcomes
            ],
            "overall_pass": self.overall_pass,
            "ran_at": self.ran_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GraderResult":
        return cls(
            result_id=d["result_id"],
            problem_id=d["problem_id"],
            outcomes=[
                TestOutcome(o["test_id"], TestStatus(o["status"]), o.get("detail", ""))
                for o in d["outcomes"]
            ],
            overall_pass=d["overall_pass"],
            ran_at=d["ran_at"],
        )


@dataclass
class ChatMessage:
    message_id: str
    channel: Channel
    author_kind: AuthorKind
    body: str
    created_at: int
    author_id: Optional[str] = None  # participant id for student/ta authors
    student_labels: dict[str, StudentFeedbackLabel] = field(default_factory=dict)
    review: TAReviewState = TAReviewState.UNREVIEWED
    revisions: list[str] = field(default_factory=list)
    # System notices ("tutor unavailable") are AI-channel messages that are
    # exempt from the review queue: they are born Read so they never count
    # as unreviewed activity.
    system_notice: bool = False
    # Whether students may attach feedback labels. Deployments can disable
    # labeling before a rollout cutoff (see CoreConfig.label_feature_since_ms).
    labelable: bool = True

    def to_dict(self) -> dict:
        return {
            "message_id": self.message_id,
            "channel": self.channel.value,
            "author_kind": self.author_kind.value,
            "author_id": self.author_id,
            "body": self.body,
            "created_at": self.created_at,
            "student_labels": {k: v.value for k, v in sorted(self.student_labels.items())},
            "review": self.review.value,
            "revisions": list(self.revisions),
            "system_notice": self.system_notice,
            "labelable": self.labelable,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChatMessage":
        return cls(
            message_id=d["message_id"],
            channel=Channel(d["channel"]),
            author_kind=AuthorKind(d["author_kind"]),
            author_id=d.get("author_id"),
            body=d["body"],
            created_at=d["created_at"],
            student_labels={
                k: StudentFeedbackLabel(v) for k, v in d.get("student_labels", {}).items()
            },
            review=TAReviewState(d.get("review", "unreviewed")),
            revisions=list(d.get("revisions", [])),
            system_notice=d.get("system_notice", False),
            labelable=d.get("labelable", True),
        )


@dataclass
class SessionRoom:
    """One group's live session: membership, documents, chats, grading.

    All mutation happens on the owning server core, one event at a time;
    everything here except the in-flight tutor flag is durable state that
    event replay reconstructs exactly.
    """

    room_id: str
    group_number: int
    worksheet_id: str
    selected_problem: str
    members: list[Participant] = field(default_factory=list)
    doc_states: dict = field(default_factory=dict)  # problem_id -> sync.DocumentState
    ai_chat: list[ChatMessage] = field(default_factory=list)
    ta_chat: list[ChatMessage] = field(default_factory=list)
    grader_history: list[GraderResult] = field(default_factory=list)
    unreviewed_count: int = 0
    last_activity: int = 0
    # Transport-level guard, never persisted: one tutor request at a time.
    ai_in_flight: bool = field(default=False, compare=False, repr=False)

    def member(self, participant_id: str) -> Optional[Participant]:
        for m in self.members:
            if m.participant_id == participant_id:
                return m
        return None

    def member_by_email(self, email: str) -> Optional[Participant]:
        for m in self.members:
            if m.email == email:
                return m
        return None

    def student_count(self) -> int:
        return sum(1 for m in self.members if m.role == Role.STUDENT)

    def find_message(self, message_id: str) -> Optional[ChatMessage]:
        for msg in self.ai_chat:
            if msg.message_id == message_id:
                return msg
        for msg in self.ta_chat:
            if msg.message_id == message_id:
                return msg
        return None

    def latest_grader_result(self, problem_id: str) -> Optional[GraderResult]:
        for result in reversed(self.grader_history):
            if result.problem_id == problem_id:
                return result
        return None

    def to_dict(self) -> dict:
        return {
            "room_id": self.room_id,
            "group_number": self.group_number,
            "worksheet_id": self.worksheet_id,
            "selected_problem": self.selected_problem,
            "members": [
                {
                    "participant_id": m.participant_id,
                    "email": m.email,
                    "role": m.role.value,
                    "display_name": m.display_name,
                }
                for m in self.members
            ],
            "doc_states": {pid: doc.to_dict() for pid, doc in self.doc_states.items()},
            "ai_chat": [m.to_dict() for m in self.ai_chat],
            "ta_chat": [m.to_dict() for m in self.ta_chat],
            "grader_history": [g.to_dict() for g in self.grader_history],
            "unreviewed_count": self.unreviewed_count,
            "last_activity": self.last_activity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SessionRoom":
        from .sync import DocumentState

        return cls(
            room_id=d["room_id"],
            group_number=d["group_number"],
            worksheet_id=d["worksheet_id"],
            selected_problem=d["selected_problem"],
            members=[
                Participant(m["participant_id"], m["email"], Role(m["role"]), m["display_name"])
                for m in d["members"]
            ],
            doc_states={pid: DocumentState.from_dict(doc) for pid, doc in d["doc_states"].items()},
            ai_chat=[ChatMessage.from_dict(m) for m in d["ai_chat"]],
            ta_chat=[ChatMessage.from_dict(m) for m in d["ta_chat"]],
            grader_history=[GraderResult.from_dict(g) for g in d["grader_history"]],
            unreviewed_count=d["unreviewed_count"],
            last_activity=d["last_activity"],
        )


@dataclass
class ValidationError:
    field: str
    rule: str

    def __str__(self) -> str:
        return f"{self.field}: {self.rule}"


class DomainError(Exception):
    """A rejected operation: carries a machine-readable code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


def blank_marker(blank_id: str) -> str:
    return "{{blank:%s}}" % blank_id


def starter_blank_ids(starter_code: str) -> list[str]:
    """Blank ids in marker order of appearance in the starter code."""
    return BLANK_MARKER_RE.findall(starter_code)


def validate_problem(problem: Problem) -> list[ValidationError]:
    """Check all Problem invariants; empty list means the problem is valid."""
    errors: list[ValidationError] = []
    if not problem.language_tag:
        errors.append(ValidationError("language_tag", "must be non-empty"))

    marker_ids = starter_blank_ids(problem.starter_code)
    region_ids = [b.blank_id for b in problem.blanks]
    if marker_ids != region_ids:
        errors.append(
            ValidationError(
                "blanks",
                "blank regions must match starter markers 1:1 in order "
                f"(markers {marker_ids}, regions {region_ids})",
            )
        )
    seen: set[str] = set()
    for b in problem.blanks:
        if b.blank_id in seen:
            errors.append(ValidationError("blanks", f"duplicate blank_id {b.blank_id!r}"))
        seen.add(b.blank_id)

    test_seen: set[str] = set()
    for t in problem.tests:
        if t.timeout_ms < 1:
            errors.append(
                ValidationError(f"tests[{t.test_id}].timeout_ms", "must be >= 1")
            )
        if t.test_id in test_seen:
            errors.append(ValidationError("tests", f"duplicate test_id {t.test_id!r}"))
        test_seen.add(t.test_id)
    return errors


def validate_worksheet(w: Worksheet) -> list[ValidationError]:
    errors: list[ValidationError] = []
    if w.published and not w.problems:
        errors.append(ValidationError("problems", "published worksheet must have problems"))
    seen: set[str] = set()
    for p in w.problems:
        if p.problem_id in seen:
            errors.append(ValidationError("problems", f"duplicate problem_id {p.problem_id!r}"))
        seen.add(p.problem_id)
        for e in validate_problem(p):
            errors.append(ValidationError(f"problems[{p.problem_id}].{e.field}", e.rule))
    return errors


class BlankMissingError(KeyError):
    """Raised when a document lacks text for one of the problem's blanks."""


def render_solution(problem: Problem, blank_texts: dict[str, str]) -> str:
    """Substitute each blank marker with its current text.

    Pure function: the starter scaffold passes through byte-for-byte, only
    the ``{{blank:ID}}`` markers are replaced.
    """

    def sub(m: re.Match) -> str:
        bid = m.group(1)
        if bid not in blank_texts:
            raise BlankMissingError(bid)
        return blank_texts[bid]

    return BLANK_MARKER_RE.sub(sub, problem.starter_code)
