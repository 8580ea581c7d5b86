"""Real-time small-group tutoring service.

Groups edit scaffolded fill-in-the-blank problems in a synchronized
editor, grade their work, and talk to an AI tutor; TAs monitor rooms
and moderate AI replies. See README.md for the tour.
"""

__version__ = "0.1.0"

from .core import CoreConfig, ServerCore
from .model import (
    BlankRegion,
    ChatMessage,
    GraderResult,
    Participant,
    Problem,
    SessionRoom,
    StudentFeedbackLabel,
    TAReviewState,
    TestCase,
    Worksheet,
    render_solution,
    validate_problem,
)
from .sync import DocumentState, EditOp, SyncClient, integrate, transform

__all__ = [
    "__version__",
    "BlankRegion",
    "ChatMessage",
    "CoreConfig",
    "DocumentState",
    "EditOp",
    "GraderResult",
    "Participant",
    "Problem",
    "ServerCore",
    "SessionRoom",
    "StudentFeedbackLabel",
    "SyncClient",
    "TAReviewState",
    "TestCase",
    "Worksheet",
    "integrate",
    "render_solution",
    "transform",
    "validate_problem",
]
