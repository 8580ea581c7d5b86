"""Test-suite execution against a rendered group solution.

Each test case appends its program suffix to the solution, writes the
combined program to a fresh file in a per-run temp directory, and runs
the configured executor command on it. Sandboxing beyond wall-clock
timeout and output caps is the executor command's job (a deployment can
point it at a container wrapper).

The ``builtin:echo`` executor interprets the bundled echoscript toy
language in-process; it exists so the full stack, simulator included,
grades quickly and hermetically. Subprocess executors cover everything
else.
"""

from __future__ import annotations

import difflib
import shlex
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import echoscript
from .model import GraderResult, Problem, TestOutcome, TestStatus

BUILTIN_ECHO = "builtin:echo"
PATH_PLACEHOLDER = "{path}"


@dataclass
class ExecutorConfig:
    language_tag: str
    command_template: str
    hard_timeout_ms: int = 10_000
    max_output_bytes: int = 16_384

    def __post_init__(self):
        if self.command_template != BUILTIN_ECHO:
            n = self.command_template.count(PATH_PLACEHOLDER)
            if n != 1:
                raise ValueError(
                    f"command_template must contain exactly one {PATH_PLACEHOLDER} placeholder, found {n}"
                )
        if self.hard_timeout_ms < 1:
            raise ValueError("hard_timeout_ms must be >= 1")
        if self.max_output_bytes < 1:
            raise ValueError("max_output_bytes must be >= 1")


def default_executors() -> dict[str, ExecutorConfig]:
    return {
        "echo": ExecutorConfig("echo", BUILTIN_ECHO),
        "echo-subprocess": ExecutorConfig(
            "echo-subprocess", f"{sys.executable} -m grouptutor.echoscript {PATH_PLACEHOLDER}"
        ),
        "python": ExecutorConfig("python", f"{sys.executable} {PATH_PLACEHOLDER}"),
    }


def normalize_output(text: str) -> str:
    """CRLF to LF, strip per-line trailing whitespace and trailing blank lines."""
    lines = [line.rstrip() for line in text.replace("\r\n", "\n").split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines)


def _cap(text: str, max_bytes: int) -> str:
    raw = text.encode("utf-8")
    if len(raw) <= max_bytes:
        return text
    return raw[:max_bytes].decode("utf-8", errors="ignore")


def _diff_detail(expected: str, actual: str) -> str:
    diff = difflib.unified_diff(
        expected.splitlines(keepends=True),
        actual.splitlines(keepends=True),
        fromfile="expected",
        tofile="actual",
        lineterm="\n",
    )
    return "".join(diff)


class SpawnFailure(Exception):
    pass


def _run_subprocess(command: str, source_path: Path, timeout_ms: int) -> tuple[int, str, str, bool]:
    args = [a.replace(PATH_PLACEHOLDER, str(source_path)) for a in shlex.split(command)]
    try:
        proc = subprocess.run(
            args,
            capture_output=True,
            timeout=timeout_ms / 1000.0,
            cwd=source_path.parent,
        )
    except subprocess.TimeoutExpired as e:
        out = (e.stdout or b"").decode("utf-8", errors="replace")
        err = (e.stderr or b"").decode("utf-8", errors="replace")
        return 1, out, err, True
    except OSError as e:
        raise SpawnFailure(f"failed to spawn {args[0]!r}: {e}") from e
    return (
        proc.returncode,
        proc.stdout.decode("utf-8", errors="replace"),
        proc.stderr.decode("utf-8", errors="replace"),
        False,
    )


def run_tests(
    problem: Problem,
    solution: str,
    executor: ExecutorConfig,
    *,
    work_dir: Optional[Path] = None,
    result_id: str = "",
    ran_at: int = 0,
) -> GraderResult:
    """Run every test case, in order, with no fail-fast.

    Statuses: Pass on exit 0 with matching normalized stdout, Fail on
    exit 0 with a mismatch (detail carries a unified diff), Error on a
    nonzero exit (detail carries capped stderr), Timeout when wall time
    exceeds min(test timeout, executor hard timeout).
    """
    if executor.language_tag != problem.language_tag:
        raise ValueError(
            f"executor language {executor.language_tag!r} does not match "
            f"problem language {problem.language_tag!r}"
        )

    outcomes: list[TestOutcome] = []
    cap = executor.max_output_bytes
    with tempfile.TemporaryDirectory(prefix="grader-", dir=work_dir) as tmp:
        tmpdir = Path(tmp)
        for i, test in enumerate(problem.tests):
            program = solution + "\n" + test.program_suffix
            timeout_ms = min(test.timeout_ms, executor.hard_timeout_ms)

            if executor.command_template == BUILTIN_ECHO:
                res = echoscript.run_source(program, deadline_ms=timeout_ms)
                code, stdout, stderr, timed_out = res.exit_code, res.stdout, res.stderr, res.timed_out
            else:
                source_path = tmpdir / f"test_{i}_{test.test_id}.txt"
                source_path.write_text(program, encoding="utf-8")
                started = time.monotonic()
                try:
                    code, stdout, stderr, timed_out = _run_subprocess(
                        executor.command_template, source_path, timeout_ms
                    )
                except SpawnFailure as e:
                    outcomes = [
                        TestOutcome(t.test_id, TestStatus.ERROR, _cap(str(e), cap))
                        for t in problem.tests
                    ]
                    return GraderResult(
                        result_id=result_id,
                        problem_id=problem.problem_id,
                        outcomes=outcomes,
                        overall_pass=False,
                        ran_at=ran_at,
                    )
                if not timed_out and (time.monotonic() - started) * 1000 > timeout_ms:
                    timed_out = True

            if timed_out:
                outcomes.append(
                    TestOutcome(
                        test.test_id, TestStatus.TIMEOUT, f"timed out after {timeout_ms} ms"
                    )
                )
            elif code != 0:
                outcomes.append(TestOutcome(test.test_id, TestStatus.ERROR, _cap(stderr, cap)))
            else:
                got = normalize_output(stdout)
                want = normalize_output(test.expected_stdout)
                if got == want:
                    outcomes.append(TestOutcome(test.test_id, TestStatus.PASS))
                else:
                    outcomes.append(
                        TestOutcome(test.test_id, TestStatus.FAIL, _cap(_diff_detail(want, got), cap))
                    )

    return GraderResult(
        result_id=result_id,
        problem_id=problem.problem_id,
        outcomes=outcomes,
        overall_pass=all(o.status == TestStatus.PASS for o in outcomes),
        ran_at=ran_at,
    )
