"""Transport-agnostic server core.

One ServerCore owns all room state for a deployment. Commands arrive as
wire frames (dicts shaped ``{"v": 1, "kind": ..., "body": ...}``) and
come back as (recipient session id, frame) pairs; the websocket layer
and the simulator both drive this same dispatch path.

State changes are event-sourced: each mutation becomes an EventRecord,
applied through apply_event (the single transition function live
dispatch and crash recovery share) and appended to the log before any
broadcast leaves the core. Anything non-deterministic — grader output,
tutor replies, generated ids, timestamps — is captured inside the event
payload, which makes recovery a pure function of the log.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from . import console, grader, sync, tutor
from .clock import RealClock
from .events import EventLog, EventRecord, Truncation, read_log
from .model import (
    AuthorKind,
    Channel,
    ChatMessage,
    DomainError,
    GraderResult,
    Participant,
    Role,
    SessionRoom,
    StudentFeedbackLabel,
    Worksheet,
    render_solution,
)

PROTOCOL_VERSION = 1
TUTOR_UNAVAILABLE_NOTICE = "tutor unavailable"


def frame(kind: str, body: Optional[dict] = None) -> dict:
    return {"v": PROTOCOL_VERSION, "kind": kind, "body": body or {}}


def error_frame(code: str, message: str, in_reply_to: Optional[str] = None) -> dict:
    body = {"code": code, "message": message}
    if in_reply_to:
        body["in_reply_to"] = in_reply_to
    return frame("error", body)


@dataclass
class CoreConfig:
    active_worksheet_id: str = ""
    groups: set[int] = field(default_factory=set)
    ta_allowlist: set[str] = field(default_factory=set)
    max_group_size: int = 7
    label_feature_since_ms: int = 0
    executors: dict = field(default_factory=grader.default_executors)
    grader_work_dir: Optional[Path] = None


@dataclass
class Session:
    session_id: str
    participant: Participant
    room_id: Optional[str]
    watching: set[str] = field(default_factory=set)


Outbound = tuple[str, dict]  # (session_id, frame)


class CloseConnection(Exception):
    """Transport should drop the connection (protocol version mismatch)."""


class ServerCore:
    def __init__(
        self,
        worksheets: dict[str, Worksheet],
        config: CoreConfig,
        clock=None,
        log: Optional[EventLog] = None,
        backend: Optional[tutor.TutorBackend] = None,
        policy: Optional[tutor.TutorPolicy] = None,
    ):
        self.worksheets = worksheets
        self.config = config
        self.clock = clock or RealClock()
        self.log = log or EventLog()
        self.backend = backend or tutor.ScriptedMockBackend()
        self.policy = policy or tutor.TutorPolicy()
        self.rooms: dict[str, SessionRoom] = {}
        self.sessions: dict[str, Session] = {}
        self._counters = {"u": 0, "m": 0, "g": 0, "s": 0}
        self._next_seq = 1

    # ------------------------------------------------------------------
    # id and event plumbing

    def _next_id(self, prefix: str) -> str:
        self._counters[prefix] += 1
        return f"{prefix}-{self._counters[prefix]:06d}"

    def _note_id(self, ident: str) -> None:
        m = re.fullmatch(r"([a-z])-(\d+)", ident)
        if m and m.group(1) in self._counters:
            self._counters[m.group(1)] = max(self._counters[m.group(1)], int(m.group(2)))

    def _commit(self, room_id: str, kind: str, payload: dict, at: Optional[int] = None) -> EventRecord:
        """Apply a new event to state, then make it durable.

        apply_event validates-then-mutates, so a DomainError here leaves
        neither state change nor log entry behind.
        """
        record = EventRecord(
            seq=self._next_seq,
            room_id=room_id,
            kind=kind,
            at=self.clock.now_ms() if at is None else at,
            payload=payload,
        )
        apply_event(self.rooms, self.worksheets, record, note_id=self._note_id)
        self._next_seq += 1
        self.log.append(record)
        return record

    # ------------------------------------------------------------------
    # session lifecycle

    def join(self, email: str, group_number: int, display_name: str = "") -> Session:
        """Sign-in: email plus group number; TAs come from the allowlist.

        An email already present in the room reattaches to its existing
        participant. The group-size cap applies to students only.
        """
        email = email.strip().lower()
        if not email:
            raise DomainError("bad_email", "email must be non-empty")
        role = Role.TA if email in self.config.ta_allowlist else Role.STUDENT

        room: Optional[SessionRoom] = None
        if role == Role.TA and group_number == 0:
            room_id = None  # unbound TA console session
        else:
            if group_number not in self.config.groups:
                raise DomainError("unknown_group", f"group {group_number} is not registered")
            room_id = f"room-{group_number:03d}"
            room = self.rooms.get(room_id)

        participant: Optional[Participant] = None
        if room is not None:
            participant = room.member_by_email(email)
        if participant is None and room_id is not None:
            if (
                role == Role.STUDENT
                and room is not None
                and room.student_count() >= self.config.max_group_size
            ):
                raise DomainError(
                    "room_full",
                    f"group {group_number} already has {self.config.max_group_size} students",
                )
            participant = Participant(
                participant_id=self._next_id("u"),
                email=email,
                role=role,
                display_name=display_name or email.split("@")[0],
            )
            self._commit(
                room_id,
                "join",
                {
                    "participant": {
                        "participant_id": participant.participant_id,
                        "email": participant.email,
                        "role": participant.role.value,
                        "display_name": participant.display_name,
                    },
                    "group_number": group_number,
                    "worksheet_id": self.config.active_worksheet_id,
                },
            )
        elif participant is None:
            participant = Participant(
                participant_id=self._next_id("u"),
                email=email,
                role=role,
                display_name=display_name or email.split("@")[0],
            )

        session = Session(self._next_id("s"), participant, room_id)
        self.sessions[session.session_id] = session
        return session

    def leave(self, session_id: str) -> list[Outbound]:
        session = self.sessions.pop(session_id, None)
        if session is None or session.room_id is None:
            return []
        room = self.rooms.get(session.room_id)
        if room is None or room.member(session.participant.participant_id) is None:
            return []
        # Only record a departure when no other live session remains for
        # this participant (multiple tabs are legitimate).
        still_here = any(
            s.participant.participant_id == session.participant.participant_id
            and s.room_id == session.room_id
            for s in self.sessions.values()
        )
        if still_here:
            return []
        self._commit(
            session.room_id, "leave", {"participant_id": session.participant.participant_id}
        )
        return self._room_broadcast(
            session.room_id,
            frame(
                "member_left",
                {"room_id": session.room_id, "participant_id": session.participant.participant_id},
            ),
        )

    def welcome_frame(self, session: Session) -> dict:
        body: dict = {
            "session": {
                "participant_id": session.participant.participant_id,
                "role": session.participant.role.value,
                "display_name": session.participant.display_name,
                "room_id": session.room_id,
            },
            "worksheet_id": self.config.active_worksheet_id,
        }
        if session.room_id:
            body["room"] = self._room_state_body(self.rooms[session.room_id])
        return frame("welcome", body)

    def _room_state_body(self, room: SessionRoom) -> dict:
        docs = {}
        for pid, doc in room.doc_states.items():
            version, texts = doc.snapshot()
            docs[pid] = {"server_version": version, "texts": texts}
        return {
            "room_id": room.room_id,
            "group_number": room.group_number,
            "worksheet_id": room.worksheet_id,
            "selected_problem": room.selected_problem,
            "members": [
                {
                    "participant_id": m.participant_id,
                    "role": m.role.value,
                    "display_name": m.display_name,
                }
                for m in room.members
            ],
            "docs": docs,
            "ai_chat": [m.to_dict() for m in room.ai_chat],
            "ta_chat": [m.to_dict() for m in room.ta_chat],
            "grader_history": [g.to_dict() for g in room.grader_history],
            "unreviewed_count": room.unreviewed_count,
        }

    # ------------------------------------------------------------------
    # broadcast targeting

    def _room_session_ids(self, room_id: str) -> list[str]:
        ids = []
        for sid, session in self.sessions.items():
            if session.room_id == room_id or room_id in session.watching:
                ids.append(sid)
        return ids

    def _room_broadcast(self, room_id: str, fr: dict) -> list[Outbound]:
        return [(sid, fr) for sid in self._room_session_ids(room_id)]

    # ------------------------------------------------------------------
    # frame dispatch

    def handle_frame(self, session_id: str, fr: dict) -> list[Outbound]:
        """Dispatch one client frame; returns every frame to deliver.

        Domain rejections come back as error frames to the sender; only
        a protocol version mismatch tears the connection down.
        """
        session = self.sessions.get(session_id)
        if session is None:
            return [(session_id, error_frame("no_session", "unknown session"))]
        if not isinstance(fr, dict):
            return [(session_id, error_frame("malformed", "frame must be an object"))]
        if fr.get("v") != PROTOCOL_VERSION:
            raise CloseConnection(f"unsupported protocol version {fr.get('v')!r}")
        kind = fr.get("kind")
        body = fr.get("body")
        if not isinstance(kind, str) or not isinstance(body, dict):
            return [(session_id, error_frame("malformed", "frame needs kind and body"))]

        handler = self._HANDLERS.get(kind)
        if handler is None:
            return [(session_id, error_frame("unknown_kind", f"unknown frame kind {kind!r}", kind))]
        try:
            return handler(self, session, body)
        except DomainError as e:
            return [(session_id, error_frame(e.code, e.message, kind))]
        except (KeyError, TypeError, ValueError) as e:
            return [(session_id, error_frame("malformed", f"bad {kind} body: {e}", kind))]

    # -- helpers ---------------------------------------------------------

    def _require_room(self, session: Session, body: dict, ta_may_target: bool = True) -> SessionRoom:
        room_id = session.room_id
        if ta_may_target and session.participant.role == Role.TA and body.get("room_id"):
            room_id = body["room_id"]
        if room_id is None or room_id not in self.rooms:
            raise DomainError("no_room", "session is not attached to a room")
        return self.rooms[room_id]

    def _require_ta(self, session: Session) -> None:
        if session.participant.role != Role.TA:
            raise DomainError("forbidden", "TA-only operation")

    def _require_member(self, session: Session, room: SessionRoom) -> Participant:
        member = room.member(session.participant.participant_id)
        if member is None:
            raise DomainError("not_member", "participant is not a member of this room")
        return member

    # -- student-surface handlers ----------------------------------------

    def _handle_edit(self, session: Session, body: dict) -> list[Outbound]:
        room = self._require_room(session, body, ta_may_target=False)
        self._require_member(session, room)
        op = sync.EditOp.from_dict({**body, "client_id": session.participant.participant_id})
        if op.problem_id not in room.doc_states:
            raise DomainError("unknown_problem", f"no document for problem {op.problem_id!r}")
        doc = room.doc_states[op.problem_id]
        result = sync.integrate(doc, op)
        if not result.ok:
            return [(session.session_id, error_frame(result.error_code, result.error, "edit"))]
        if result.duplicate or result.buffered:
            return []
        out: list[Outbound] = []
        at = self.clock.now_ms()
        for applied in result.applied:
            # integrate already mutated the document; record the applied
            # (post-transform) op so recovery is a plain fold.
            record = EventRecord(
                seq=self._next_seq,
                room_id=room.room_id,
                kind="edit",
                at=at,
                payload={"server_version": applied.server_version, "op": applied.op.to_dict()},
            )
            self._next_seq += 1
            room.last_activity = at
            self.log.append(record)
            out.extend(
                self._room_broadcast(
                    room.room_id,
                    frame(
                        "edit_applied",
                        {
                            "room_id": room.room_id,
                            "server_version": applied.server_version,
                            "op": applied.op.to_dict(),
                        },
                    ),
                )
            )
        return out

    def _handle_snapshot(self, session: Session, body: dict) -> list[Outbound]:
        room = self._require_room(session, body)
        problem_id = body.get("problem_id") or room.selected_problem
        doc = room.doc_states.get(problem_id)
        if doc is None:
            raise DomainError("unknown_problem", f"no document for problem {problem_id!r}")
        version, texts = doc.snapshot()
        return [
            (
                session.session_id,
                frame(
                    "snapshot",
                    {
                        "room_id": room.room_id,
                        "problem_id": problem_id,
                        "server_version": version,
                        "texts": texts,
                    },
                ),
            )
        ]

    def _handle_select_problem(self, session: Session, body: dict) -> list[Outbound]:
        room = self._require_room(session, body, ta_may_target=False)
        self._require_member(session, room)
        problem_id = body["problem_id"]
        worksheet = self.worksheets[room.worksheet_id]
        if worksheet.problem(problem_id) is None:
            raise DomainError("unknown_problem", f"worksheet has no problem {problem_id!r}")
        self._commit(
            room.room_id,
            "select_problem",
            {"problem_id": problem_id, "participant_id": session.participant.participant_id},
        )
        return self._room_broadcast(
            room.room_id,
            frame("problem_selected", {"room_id": room.room_id, "problem_id": problem_id}),
        )

    def _handle_ask_tutor(self, session: Session, body: dict) -> list[Outbound]:
        out, context, room = self.begin_ask(session, str(body["text"]))
        try:
            reply = self.backend.complete(context)
        except tutor.BackendUnavailable:
            reply = None
        out.extend(self.finish_ask(room.room_id, reply))
        return out

    def begin_ask(self, session: Session, text: str) -> tuple[list[Outbound], tutor.TutorContext, SessionRoom]:
        """Record and broadcast the student question, mark the room busy,
        and assemble the backend context. finish_ask completes the pair."""
        room = self._require_room(session, {}, ta_may_target=False)
        member = self._require_member(session, room)
        if member.role != Role.STUDENT:
            raise DomainError("forbidden", "only students query the tutor")
        if room.ai_in_flight:
            raise DomainError("tutor_busy", "a tutor request for this room is already in flight")
        if not text.strip():
            raise DomainError("empty_message", "message must be non-empty")

        message_id = self._next_id("m")
        self._commit(
            room.room_id,
            "chat_student",
            {
                "message": {
                    "message_id": message_id,
                    "channel": Channel.AI_TUTOR.value,
                    "author_kind": AuthorKind.STUDENT.value,
                    "author_id": member.participant_id,
                    "body": text,
                    "created_at": self.clock.now_ms(),
                }
            },
        )
        room.ai_in_flight = True
        context = tutor.assemble_context(room, self.worksheets[room.worksheet_id], self.policy)
        out = self._room_broadcast(
            room.room_id,
            frame(
                "chat_message",
                {"room_id": room.room_id, "message": room.ai_chat[-1].to_dict()},
            ),
        )
        return out, context, room

    def finish_ask(self, room_id: str, reply: Optional[str]) -> list[Outbound]:
        """Append the AI reply (or the unavailable notice) and broadcast."""
        room = self.rooms[room_id]
        room.ai_in_flight = False
        at = self.clock.now_ms()
        message = {
            "message_id": self._next_id("m"),
            "channel": Channel.AI_TUTOR.value,
            "author_kind": AuthorKind.AI.value,
            "created_at": at,
        }
        if reply is None:
            message.update(
                {"body": TUTOR_UNAVAILABLE_NOTICE, "system_notice": True, "review": "read"}
            )
        else:
            message.update(
                {"body": reply, "labelable": at >= self.config.label_feature_since_ms}
            )
        self._commit(room_id, "chat_ai", {"message": message})
        return self._room_broadcast(
            room_id,
            frame("chat_message", {"room_id": room_id, "message": room.ai_chat[-1].to_dict()}),
        )

    def _handle_label(self, session: Session, body: dict) -> list[Outbound]:
        room = self._require_room(session, body, ta_may_target=False)
        member = self._require_member(session, room)
        label = StudentFeedbackLabel(body["label"])
        message_id = body["message_id"]
        self._commit(
            room.room_id,
            "student_label",
            {
                "participant_id": member.participant_id,
                "message_id": message_id,
                "label": label.value,
            },
        )
        msg = room.find_message(message_id)
        return self._room_broadcast(
            room.room_id,
            frame("message_updated", {"room_id": room.room_id, "message": msg.to_dict()}),
        )

    def _handle_check_answer(self, session: Session, body: dict) -> list[Outbound]:
        room = self._require_room(session, body, ta_may_target=False)
        self._require_member(session, room)
        result = self.run_grader(room)
        return self._room_broadcast(
            room.room_id,
            frame("grader_result", {"room_id": room.room_id, "result": result.to_dict()}),
        )

    def run_grader(self, room: SessionRoom) -> GraderResult:
        worksheet = self.worksheets[room.worksheet_id]
        problem = worksheet.problem(room.selected_problem)
        executor = self.config.executors.get(problem.language_tag)
        if executor is None:
            raise DomainError(
                "no_executor", f"no executor configured for language {problem.language_tag!r}"
            )
        solution = render_solution(problem, room.doc_states[problem.problem_id].texts)
        result = grader.run_tests(
            problem,
            solution,
            executor,
            work_dir=self.config.grader_work_dir,
            result_id=self._next_id("g"),
            ran_at=self.clock.now_ms(),
        )
        self._commit(room.room_id, "grader_run", {"result": result.to_dict()})
        return result

    # -- TA-surface handlers ---------------------------------------------

    def _handle_ta_chat(self, session: Session, body: dict) -> list[Outbound]:
        # TAs may target any room; students post to their own room's TA
        # channel. The AI tutor never sees this channel.
        room = self._require_room(session, body)
        if session.participant.role != Role.TA:
            self._require_member(session, room)
        text = str(body["text"])
        if not text.strip():
            raise DomainError("empty_message", "message must be non-empty")
        author = session.participant
        self._commit(
            room.room_id,
            "chat_ta",
            {
                "message": {
                    "message_id": self._next_id("m"),
                    "channel": Channel.TA_CHAT.value,
                    "author_kind": (
                        AuthorKind.TA.value if author.role == Role.TA else AuthorKind.STUDENT.value
                    ),
                    "author_id": author.participant_id,
                    "body": text,
                    "created_at": self.clock.now_ms(),
                }
            },
        )
        chat_frame = frame(
            "chat_message", {"room_id": room.room_id, "message": room.ta_chat[-1].to_dict()}
        )
        out = self._room_broadcast(room.room_id, chat_frame)
        # An unbound TA targeting a room still sees their own message.
        if all(sid != session.session_id for sid, _ in out):
            out.append((session.session_id, chat_frame))
        return out

    def _handle_review(self, session: Session, body: dict) -> list[Outbound]:
        self._require_ta(session)
        room = self._require_room(session, body)
        action = body["action"]
        new_body = body.get("new_body")
        self._commit(
            room.room_id,
            "ta_review",
            {
                "ta_id": session.participant.participant_id,
                "message_id": body["message_id"],
                "action": action,
                "new_body": new_body,
            },
        )
        updated = room.find_message(body["message_id"])
        return self._room_broadcast(
            room.room_id,
            frame(
                "message_updated",
                {
                    "room_id": room.room_id,
                    "message": updated.to_dict(),
                    "edited_by_ta": action == "edit",
                },
            ),
        )

    def _handle_list_rooms(self, session: Session, body: dict) -> list[Outbound]:
        self._require_ta(session)
        summaries = [s.to_dict() for s in console.list_rooms(self.rooms.values())]
        return [(session.session_id, frame("room_list", {"rooms": summaries}))]

    def _handle_watch(self, session: Session, body: dict) -> list[Outbound]:
        self._require_ta(session)
        room_id = body["room_id"]
        if room_id not in self.rooms:
            raise DomainError("no_room", f"unknown room {room_id!r}")
        session.watching.add(room_id)
        return [
            (
                session.session_id,
                frame("room_detail", self._room_state_body(self.rooms[room_id])),
            )
        ]

    def _handle_unwatch(self, session: Session, body: dict) -> list[Outbound]:
        self._require_ta(session)
        session.watching.discard(body["room_id"])
        return [(session.session_id, frame("ok", {"unwatched": body["room_id"]}))]

    def _handle_room_detail(self, session: Session, body: dict) -> list[Outbound]:
        self._require_ta(session)
        room_id = body["room_id"]
        if room_id not in self.rooms:
            raise DomainError("no_room", f"unknown room {room_id!r}")
        return [
            (session.session_id, frame("room_detail", self._room_state_body(self.rooms[room_id])))
        ]

    def metrics(self) -> dict:
        return console.metrics_summary(self.rooms.values())

    # ------------------------------------------------------------------
    # durability

    def snapshot_state(self) -> dict:
        """Point-in-time dump for periodic snapshot files."""
        return {
            "upto_seq": self._next_seq - 1,
            "counters": dict(self._counters),
            "rooms": {rid: room.to_dict() for rid, room in self.rooms.items()},
        }

    def restore_state(self, snapshot: dict) -> None:
        self.rooms = {
            rid: SessionRoom.from_dict(d) for rid, d in snapshot["rooms"].items()
        }
        self._counters.update(snapshot["counters"])
        self._next_seq = snapshot["upto_seq"] + 1

    @classmethod
    def from_log(
        cls,
        log_path: Path,
        worksheets: dict[str, Worksheet],
        config: CoreConfig,
        snapshot: Optional[dict] = None,
        **kwargs,
    ) -> tuple["ServerCore", Optional[Truncation]]:
        """Boot a core from durable storage: optional snapshot plus the
        event log tail; reopens the log for appending."""
        core = cls(worksheets, config, log=EventLog(log_path), **kwargs)
        if snapshot is not None:
            core.restore_state(snapshot)
        truncation = None
        if Path(log_path).exists():
            records, truncation = read_log(log_path)
            applied = 0
            for record in records:
                if record.seq < core._next_seq:
                    continue  # already covered by the snapshot
                try:
                    apply_event(core.rooms, core.worksheets, record, note_id=core._note_id)
                except (DomainError, ReplayError, ValueError, KeyError) as e:
                    truncation = Truncation(
                        applied + 1, f"record seq {record.seq} failed to apply: {e}"
                    )
                    break
                core._next_seq = record.seq + 1
                applied += 1
        return core, truncation

    _HANDLERS: dict[str, Callable] = {
        "edit": _handle_edit,
        "snapshot": _handle_snapshot,
        "select_problem": _handle_select_problem,
        "ask_tutor": _handle_ask_tutor,
        "label": _handle_label,
        "check_answer": _handle_check_answer,
        "ta_chat": _handle_ta_chat,
        "review": _handle_review,
        "list_rooms": _handle_list_rooms,
        "watch": _handle_watch,
        "unwatch": _handle_unwatch,
        "room_detail": _handle_room_detail,
    }


# ----------------------------------------------------------------------
# event application (shared by live dispatch and recovery)


class ReplayError(Exception):
    pass


def apply_event(
    rooms: dict[str, SessionRoom],
    worksheets: dict[str, Worksheet],
    record: EventRecord,
    note_id=None,
) -> None:
    """The single state-transition function.

    Raises DomainError/ReplayError if the record cannot apply; live
    dispatch prevents that by validating commands first, so hitting one
    during recovery means the log is corrupt from this record on.
    """
    kind = record.kind
    payload = record.payload

    if kind == "join":
        room = rooms.get(record.room_id)
        if room is None:
            worksheet = worksheets.get(payload["worksheet_id"])
            if worksheet is None:
                raise ReplayError(f"unknown worksheet {payload['worksheet_id']!r}")
            room = SessionRoom(
                room_id=record.room_id,
                group_number=payload["group_number"],
                worksheet_id=worksheet.worksheet_id,
                selected_problem=worksheet.problems[0].problem_id,
                doc_states={
                    p.problem_id: sync.DocumentState.fresh(
                        {b.blank_id: b.initial_text for b in p.blanks}
                    )
                    for p in worksheet.problems
                },
            )
            rooms[record.room_id] = room
        p = payload["participant"]
        if room.member(p["participant_id"]) is None:
            room.members.append(
                Participant(p["participant_id"], p["email"], Role(p["role"]), p["display_name"])
            )
        if note_id:
            note_id(p["participant_id"])
    else:
        room = rooms.get(record.room_id)
        if room is None:
            raise ReplayError(f"event for unknown room {record.room_id!r}")

        if kind == "leave":
            room.members = [
                m for m in room.members if m.participant_id != payload["participant_id"]
            ]
        elif kind == "edit":
            op = sync.EditOp.from_dict(payload["op"])
            doc = room.doc_states.get(op.problem_id)
            if doc is None:
                raise ReplayError(f"edit for unknown problem {op.problem_id!r}")
            sync.replay_applied(doc, payload["server_version"], op)
        elif kind in ("chat_student", "chat_ai", "chat_ta"):
            msg = ChatMessage.from_dict(payload["message"])
            if kind == "chat_ta":
                room.ta_chat.append(msg)
            else:
                room.ai_chat.append(msg)
                if (
                    kind == "chat_ai"
                    and msg.review.value == "unreviewed"
                ):
                    room.unreviewed_count += 1
            if note_id:
                note_id(msg.message_id)
        elif kind == "grader_run":
            result = GraderResult.from_dict(payload["result"])
            room.grader_history.append(result)
            if note_id:
                note_id(result.result_id)
        elif kind == "student_label":
            tutor.apply_label(
                room,
                payload["participant_id"],
                payload["message_id"],
                StudentFeedbackLabel(payload["label"]),
            )
        elif kind == "ta_review":
            console.apply_review(
                room, payload["message_id"], payload["action"], payload.get("new_body")
            )
        elif kind == "select_problem":
            room.selected_problem = payload["problem_id"]
        else:
            raise ReplayError(f"unknown event kind {kind!r}")

    room.last_activity = record.at


def recover(
    log_path: Path, worksheets: dict[str, Worksheet]
) -> tuple[dict[str, SessionRoom], Optional[Truncation], int]:
    """Rebuild all rooms from the event log.

    Stops at the first corrupt or inapplicable record and reports the
    truncation point; everything up to it is reconstructed exactly.
    """
    records, truncation = read_log(log_path)
    rooms: dict[str, SessionRoom] = {}
    applied = 0
    for record in records:
        try:
            apply_event(rooms, worksheets, record)
        except (DomainError, ReplayError, ValueError, KeyError) as e:
            truncation = Truncation(applied + 1, f"record seq {record.seq} failed to apply: {e}")
            break
        applied += 1
    return rooms, truncation, applied
