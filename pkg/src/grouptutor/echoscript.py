"""Tiny line-oriented script language used as the bundled test executor.

The grader needs a runtime that exists on every machine the test suite
runs on; this is it. Programs are lines of:

    print TEXT     write TEXT and a newline to stdout
    stderr TEXT    write TEXT and a newline to stderr
    sleep MS       block for MS milliseconds
    exit CODE      stop with the given exit code
    loop           spin forever (for exercising timeouts)
    # comment      ignored, as are blank lines

Anything else is a syntax error (exit code 2). Runs both as a real
subprocess (``python -m grouptutor.echoscript file``) and in-process via
``run_source`` for fast simulator grading.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass


@dataclass
class EchoResult:
    exit_code: int
    stdout: str
    stderr: str
    timed_out: bool = False


def run_source(source: str, deadline_ms: int | None = None) -> EchoResult:
    """Interpret a program in-process.

    ``sleep`` and ``loop`` consume simulated milliseconds against
    deadline_ms instead of real time, so grading inside the simulator
    never blocks.
    """
    out: list[str] = []
    err: list[str] = []
    elapsed = 0
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cmd, _, arg = line.partition(" ")
        if cmd == "print":
            out.append(arg + "\n")
        elif cmd == "stderr":
            err.append(arg + "\n")
        elif cmd == "sleep":
            try:
                elapsed += int(arg)
            except ValueError:
                err.append(f"line {lineno}: bad sleep duration {arg!r}\n")
                return EchoResult(2, "".join(out), "".join(err))
            if deadline_ms is not None and elapsed > deadline_ms:
                return EchoResult(1, "".join(out), "".join(err), timed_out=True)
        elif cmd == "exit":
            try:
                return EchoResult(int(arg or 0), "".join(out), "".join(err))
            except ValueError:
                err.append(f"line {lineno}: bad exit code {arg!r}\n")
                return EchoResult(2, "".join(out), "".join(err))
        elif cmd == "loop":
            return EchoResult(1, "".join(out), "".join(err), timed_out=True)
        else:
            err.append(f"line {lineno}: unknown statement {cmd!r}\n")
            return EchoResult(2, "".join(out), "".join(err))
    return EchoResult(0, "".join(out), "".join(err))


def main(argv: list[str]) -> int:
    if len(argv) != 1:
        print("usage: echoscript FILE", file=sys.stderr)
        return 2
    with open(argv[0], encoding="utf-8") as f:
        source = f.read()
    exit_code = 0
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cmd, _, arg = line.partition(" ")
        if cmd == "print":
            print(arg)
        elif cmd == "stderr":
            print(arg, file=sys.stderr)
        elif cmd == "sleep":
            time.sleep(int(arg) / 1000.0)
        elif cmd == "exit":
            return int(arg or 0)
        elif cmd == "loop":
            while True:
                time.sleep(0.05)
        else:
            print(f"line {lineno}: unknown statement {cmd!r}", file=sys.stderr)
            return 2
    return exit_code


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
