"""AI tutor gateway: per-query context assembly and pluggable backends.

Every query re-renders the live solution and attaches the latest grader
output (only if the group has graded the selected problem), so the
backend always sees the room as it is at ask time. Backends are
swappable: ScriptedMockBackend answers deterministically for tests and
simulation, HttpChatBackend talks to a chat-completions endpoint.
"""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Protocol

import httpx

from .model import (
    AuthorKind,
    ChatMessage,
    DomainError,
    SessionRoom,
    StudentFeedbackLabel,
    Worksheet,
    render_solution,
)

DEFAULT_TURN_WINDOW = 20
GRADER_DETAIL_LINES = 20


def default_system_prompt() -> str:
    return resources.files("grouptutor.data").joinpath("system_prompt.txt").read_text("utf-8")


@dataclass
class TutorPolicy:
    system_prompt: str = field(default_factory=default_system_prompt)
    turn_window: int = DEFAULT_TURN_WINDOW

    @classmethod
    def from_prompt_file(cls, path: str, turn_window: int = DEFAULT_TURN_WINDOW) -> "TutorPolicy":
        with open(path, encoding="utf-8") as f:
            return cls(system_prompt=f.read(), turn_window=turn_window)


@dataclass
class TutorContext:
    system_prompt: str
    turns: list[tuple[str, str]]  # ("student" | "ai", body)
    question_block: str
    solution_block: str
    grader_block: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "system_prompt": self.system_prompt,
            "turns": [list(t) for t in self.turns],
            "question_block": self.question_block,
            "solution_block": self.solution_block,
            "grader_block": self.grader_block,
        }


def summarize_grader(result) -> str:
    """Pass/fail per test plus the first few detail lines, bounded."""
    lines = [
        f"overall: {'pass' if result.overall_pass else 'fail'}",
    ]
    for o in result.outcomes:
        lines.append(f"{o.test_id}: {o.status.value}")
    detail_lines: list[str] = []
    for o in result.outcomes:
        if o.detail:
            detail_lines.append(f"--- {o.test_id} ---")
            detail_lines.extend(o.detail.splitlines())
    lines.extend(detail_lines[:GRADER_DETAIL_LINES])
    return "\n".join(lines)


def assemble_context(room: SessionRoom, worksheet: Worksheet, policy: TutorPolicy) -> TutorContext:
    """Build the backend request context from the room's live state."""
    problem = worksheet.problem(room.selected_problem)
    if problem is None:
        raise DomainError("unknown_problem", f"room has no problem {room.selected_problem!r}")

    turns: list[tuple[str, str]] = []
    for msg in room.ai_chat:
        if msg.system_notice:
            continue
        if msg.author_kind == AuthorKind.STUDENT:
            turns.append(("student", msg.body))
        elif msg.author_kind == AuthorKind.AI:
            turns.append(("ai", msg.body))
    turns = turns[-policy.turn_window:]

    doc = room.doc_states[room.selected_problem]
    grader_block = None
    latest = room.latest_grader_result(room.selected_problem)
    if latest is not None:
        grader_block = summarize_grader(latest)

    return TutorContext(
        system_prompt=policy.system_prompt,
        turns=turns,
        question_block=problem.prompt_markdown + "\n\n" + problem.starter_code,
        solution_block=render_solution(problem, doc.texts),
        grader_block=grader_block,
    )


class TutorBackend(Protocol):
    backend_id: str

    def complete(self, context: TutorContext) -> str: ...


class BackendUnavailable(Exception):
    """The backend failed after retries; the caller posts a notice instead."""


_HINT_TEMPLATES = [
    "What would the very first test print if you ran your current code by hand? "
    "Try tracing it line by line.",
    "Look closely at the blank you changed last. What value does it hold on the "
    "first pass through the code?",
    "Good question. What does the expected output tell you about the order in "
    "which things must happen?",
    "Before changing anything else, can someone in the group explain what the "
    "starter code around the blank already does?",
    "Compare the grader's expected output with yours. Where is the first place "
    "they differ, and which line produces that part?",
    "What happens at the boundary case, when the input is empty or the smallest "
    "it can be? Does your blank handle it?",
    "You are close. Which variable changes between iterations, and is your blank "
    "using it, or a stale copy?",
    "Try saying out loud, as a group, what each blank is supposed to compute. "
    "Does the code you typed actually say that?",
]


class ScriptedMockBackend:
    """Deterministic stand-in tutor: the reply is keyed by a hash of the
    last student turn, so identical transcripts always get identical
    replies and no two distinct questions look accidentally alike."""

    backend_id = "scripted-mock"

    def complete(self, context: TutorContext) -> str:
        last_student = ""
        for speaker, body in reversed(context.turns):
            if speaker == "student":
                last_student = body
                break
        digest = hashlib.sha256(last_student.encode("utf-8")).hexdigest()
        template = _HINT_TEMPLATES[int(digest[:8], 16) % len(_HINT_TEMPLATES)]
        return f"{template} [hint:{digest[:8]}]"


class FailingBackend:
    """Always raises; used to exercise the unavailable-tutor path."""

    backend_id = "failing"

    def complete(self, context: TutorContext) -> str:
        raise BackendUnavailable("backend configured to fail")


class HttpChatBackend:
    """Chat-completions HTTP client.

    Request shape: POST {base_url}/chat/completions with a messages
    array (system prompt, one context message carrying the question /
    solution / grader blocks, then the dialogue turns). Bearer token
    comes from the environment. Retries twice with exponential backoff
    on 5xx and timeouts.
    """

    backend_id = "http"

    def __init__(
        self,
        base_url: str,
        model: str = "default",
        api_key_env: str = "GROUPTUTOR_API_KEY",
        timeout_s: float = 60.0,
        max_retries: int = 2,
        backoff_s: float = 0.5,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.model = model
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        api_key = os.environ.get(api_key_env, "")
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(
            base_url=base_url, timeout=timeout_s, headers=headers, transport=transport
        )

    def _messages(self, context: TutorContext) -> list[dict]:
        blocks = [
            "The group is working on this problem:",
            context.question_block,
            "Their current solution:",
            context.solution_block,
        ]
        if context.grader_block is not None:
            blocks += ["Latest autograder output:", context.grader_block]
        messages = [
            {"role": "system", "content": context.system_prompt},
            {"role": "user", "content": "\n\n".join(blocks)},
        ]
        for speaker, body in context.turns:
            role = "user" if speaker == "student" else "assistant"
            messages.append({"role": role, "content": body})
        return messages

    def complete(self, context: TutorContext) -> str:
        payload = {"model": self.model, "messages": self._messages(context)}
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff_s * (2 ** (attempt - 1)))
            try:
                resp = self._client.post("/chat/completions", json=payload)
            except httpx.TimeoutException as e:
                last_error = e
                continue
            if resp.status_code >= 500:
                last_error = RuntimeError(f"server error {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise BackendUnavailable(f"backend rejected request: {resp.status_code}")
            data = resp.json()
            try:
                return data["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as e:
                raise BackendUnavailable(f"malformed backend response: {e}") from e
        raise BackendUnavailable(f"backend unavailable after retries: {last_error}")


def make_backend(name: str, **kwargs) -> TutorBackend:
    if name == "scripted-mock":
        return ScriptedMockBackend()
    if name == "http":
        return HttpChatBackend(**kwargs)
    if name == "failing":
        return FailingBackend()
    raise ValueError(f"unknown tutor backend {name!r}")


def apply_label(
    room: SessionRoom,
    participant_id: str,
    message_id: str,
    label: StudentFeedbackLabel,
) -> ChatMessage:
    """Insert or replace one student's feedback label on an AI message."""
    msg = room.find_message(message_id)
    if msg is None:
        raise DomainError("unknown_message", f"no message {message_id!r} in room")
    if msg.author_kind != AuthorKind.AI:
        raise DomainError("not_ai_message", "feedback labels apply to AI messages only")
    if not msg.labelable:
        raise DomainError("not_labelable", "labeling is disabled for this message")
    msg.student_labels[participant_id] = label
    return msg
