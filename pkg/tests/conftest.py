import pytest

from grouptutor.model import (
    AuthorKind,
    BlankRegion,
    Channel,
    ChatMessage,
    Participant,
    Problem,
    Role,
    SessionRoom,
    TestCase,
    Worksheet,
)
from grouptutor.sync import DocumentState


def build_worksheet() -> Worksheet:
    p1 = Problem(
        problem_id="sum-twice",
        prompt_markdown="Print the sum, then print it again.",
        language_tag="echo",
        starter_code="print {{blank:value}}\nprint {{blank:again}}\n",
        blanks=[
            BlankRegion("value", placeholder="first line"),
            BlankRegion("again", placeholder="second line"),
        ],
        tests=[TestCase("t1", "print done", "3\n3\ndone", 1000)],
    )
    p2 = Problem(
        problem_id="greeting",
        prompt_markdown="Make it greet.",
        language_tag="echo",
        starter_code="print {{blank:word}}\n",
        blanks=[BlankRegion("word", initial_text="hello")],
        tests=[TestCase("t1", "", "hello", 1000)],
    )
    return Worksheet("ws-demo", "Demo Worksheet", problems=[p1, p2], published=True)


def build_room(worksheet: Worksheet, group_number: int = 1) -> SessionRoom:
    return SessionRoom(
        room_id=f"room-{group_number:03d}",
        group_number=group_number,
        worksheet_id=worksheet.worksheet_id,
        selected_problem=worksheet.problems[0].problem_id,
        doc_states={
            p.problem_id: DocumentState.fresh({b.blank_id: b.initial_text for b in p.blanks})
            for p in worksheet.problems
        },
    )


def student(n: int = 1) -> Participant:
    return Participant(f"s{n}", f"student{n}@school.edu", Role.STUDENT, f"Student {n}")


def ta(n: int = 1) -> Participant:
    return Participant(f"ta{n}", f"ta{n}@school.edu", Role.TA, f"TA {n}")


def ai_message(mid: str, body: str = "a hint", created_at: int = 0, **kw) -> ChatMessage:
    return ChatMessage(
        message_id=mid,
        channel=Channel.AI_TUTOR,
        author_kind=AuthorKind.AI,
        body=body,
        created_at=created_at,
        **kw,
    )


def student_message(mid: str, body: str, author_id: str = "s1", created_at: int = 0) -> ChatMessage:
    return ChatMessage(
        message_id=mid,
        channel=Channel.AI_TUTOR,
        author_kind=AuthorKind.STUDENT,
        author_id=author_id,
        body=body,
        created_at=created_at,
    )


@pytest.fixture
def worksheet():
    return build_worksheet()


@pytest.fixture
def room(worksheet):
    r = build_room(worksheet)
    r.members.append(student(1))
    return r
