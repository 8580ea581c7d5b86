"""Worksheet ingestion and storage.

The worksheet file format is markdown-shaped so existing handouts paste
straight in:

* YAML front-matter between ``---`` lines: ``title``, optional
  ``worksheet_id`` (defaults to a slug of the title), ``published``.
* Each problem starts at a level-2 heading. An ``id: <problem-id>``
  line directly under the heading overrides the heading slug.
* Prompt markdown runs until the first fenced code block.
* One fence tagged ``starter <language>`` holds the scaffold with
  ``{{blank:ID}}`` markers.
* An optional fence tagged ``blanks`` holds a YAML mapping of blank id
  to ``placeholder`` / ``initial`` metadata.
* Zero or more fences tagged ``test``, each a YAML mapping with
  ``suffix``, ``expect``, ``timeout_ms``, and optional ``id``.

Import accumulates line-numbered errors instead of bailing at the
first problem; export emits the canonical form, and the two compose
into stable round trips.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import yaml

from .model import (
    BlankRegion,
    Problem,
    TestCase,
    Worksheet,
    starter_blank_ids,
    validate_problem,
    validate_worksheet,
)

_FENCE_OPEN = re.compile(r"^```([A-Za-z][\w-]*)(?:[ \t]+(\S+))?\s*$")
_FENCE_CLOSE = re.compile(r"^```\s*$")
_HEADING = re.compile(r"^##\s+(.+?)\s*$")
_ID_LINE = re.compile(r"^id:\s*(\S+)\s*$")

DEFAULT_TEST_TIMEOUT_MS = 5000


@dataclass
class ParseError:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


def slugify(text: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
    return slug or "untitled"


def _parse_front_matter(lines: list[str], errors: list[ParseError]) -> tuple[dict, int]:
    if not lines or lines[0].strip() != "---":
        errors.append(ParseError(1, "missing front-matter (expected leading ---)"))
        return {}, 0
    for i in range(1, len(lines)):
        if lines[i].strip() == "---":
            try:
                meta = yaml.safe_load("\n".join(lines[1:i])) or {}
            except yaml.YAMLError as e:
                errors.append(ParseError(2, f"front-matter is not valid YAML: {e}"))
                return {}, i + 1
            if not isinstance(meta, dict):
                errors.append(ParseError(2, "front-matter must be a YAML mapping"))
                return {}, i + 1
            return meta, i + 1
    errors.append(ParseError(1, "unterminated front-matter"))
    return {}, len(lines)


@dataclass
class _RawFence:
    tag: str
    arg: str
    line: int
    body: str


@dataclass
class _RawProblem:
    heading: str
    heading_line: int
    explicit_id: str
    prompt_lines: list[str]
    fences: list[_RawFence]


def _scan(lines: list[str], start: int, errors: list[ParseError]) -> list[_RawProblem]:
    problems: list[_RawProblem] = []
    current: _RawProblem | None = None
    i = start
    n = len(lines)
    while i < n:
        line = lines[i]
        heading = _HEADING.match(line)
        if heading:
            current = _RawProblem(heading.group(1), i + 1, "", [], [])
            problems.append(current)
            i += 1
            continue
        fence = _FENCE_OPEN.match(line)
        if fence:
            if current is None:
                errors.append(ParseError(i + 1, "code fence before any problem heading"))
            open_line = i + 1
            body_lines = []
            i += 1
            while i < n and not _FENCE_CLOSE.match(lines[i]):
                body_lines.append(lines[i])
                i += 1
            if i >= n:
                errors.append(ParseError(open_line, "unterminated code fence"))
            else:
                i += 1
            if current is not None:
                current.fences.append(
                    _RawFence(fence.group(1), fence.group(2) or "", open_line, "\n".join(body_lines))
                )
            continue
        if current is not None:
            if not current.prompt_lines and not current.fences and not current.explicit_id:
                id_match = _ID_LINE.match(line.strip())
                if id_match:
                    current.explicit_id = id_match.group(1)
                    i += 1
                    continue
            if not current.fences:
                current.prompt_lines.append(line)
            elif line.strip():
                errors.append(
                    ParseError(i + 1, f"unexpected text after code fences in {current.heading!r}")
                )
        elif line.strip():
            errors.append(ParseError(i + 1, "content before first problem heading"))
        i += 1
    return problems


def _build_problem(raw: _RawProblem, errors: list[ParseError]) -> Problem | None:
    problem_id = raw.explicit_id or slugify(raw.heading)
    starter_code = ""
    language_tag = ""
    blanks_meta: dict = {}
    tests: list[TestCase] = []
    starter_seen = False

    for fence in raw.fences:
        if fence.tag == "starter":
            if starter_seen:
                errors.append(
                    ParseError(fence.line, f"duplicate starter block in {raw.heading!r}")
                )
                continue
            starter_seen = True
            if not fence.arg:
                errors.append(
                    ParseError(
                        fence.line, f"starter block in {raw.heading!r} is missing a language tag"
                    )
                )
            language_tag = fence.arg
            starter_code = fence.body + ("\n" if fence.body else "")
        elif fence.tag == "blanks":
            try:
                blanks_meta = yaml.safe_load(fence.body) or {}
            except yaml.YAMLError as e:
                errors.append(ParseError(fence.line, f"blanks block is not valid YAML: {e}"))
            if not isinstance(blanks_meta, dict):
                errors.append(ParseError(fence.line, "blanks block must be a YAML mapping"))
                blanks_meta = {}
        elif fence.tag == "test":
            try:
                spec = yaml.safe_load(fence.body) or {}
            except yaml.YAMLError as e:
                errors.append(ParseError(fence.line, f"test block is not valid YAML: {e}"))
                continue
            if not isinstance(spec, dict):
                errors.append(ParseError(fence.line, "test block must be a YAML mapping"))
                continue
            timeout = spec.get("timeout_ms", DEFAULT_TEST_TIMEOUT_MS)
            if not isinstance(timeout, int) or timeout < 1:
                errors.append(ParseError(fence.line, f"bad timeout_ms {timeout!r}"))
                timeout = DEFAULT_TEST_TIMEOUT_MS
            tests.append(
                TestCase(
                    test_id=str(spec.get("id", f"t{len(tests) + 1}")),
                    program_suffix=str(spec.get("suffix", "")),
                    expected_stdout=str(spec.get("expect", "")),
                    timeout_ms=timeout,
                )
            )
        else:
            errors.append(
                ParseError(fence.line, f"unknown fence tag {fence.tag!r} in {raw.heading!r}")
            )

    if not starter_seen:
        errors.append(ParseError(raw.heading_line, f"problem {raw.heading!r} has no starter block"))
        return None

    blanks = []
    for bid in starter_blank_ids(starter_code):
        meta = blanks_meta.get(bid) or {}
        if not isinstance(meta, dict):
            errors.append(ParseError(raw.heading_line, f"blank metadata for {bid!r} must be a mapping"))
            meta = {}
        blanks.append(
            BlankRegion(
                blank_id=bid,
                placeholder=str(meta.get("placeholder", "")),
                initial_text=str(meta.get("initial", "")),
            )
        )

    problem = Problem(
        problem_id=problem_id,
        prompt_markdown="\n".join(raw.prompt_lines).strip(),
        language_tag=language_tag,
        starter_code=starter_code,
        blanks=blanks,
        tests=tests,
    )
    for err in validate_problem(problem):
        errors.append(ParseError(raw.heading_line, f"{raw.heading!r}: {err}"))
    return problem


def import_worksheet(source: str) -> Union[Worksheet, list[ParseError]]:
    """Parse worksheet text; returns the worksheet or every error found."""
    errors: list[ParseError] = []
    lines = source.split("\n")
    meta, body_start = _parse_front_matter(lines, errors)

    title = str(meta.get("title", "")) if meta.get("title") is not None else ""
    if not title:
        errors.append(ParseError(2, "front-matter must set a title"))
    worksheet_id = str(meta.get("worksheet_id") or slugify(title))
    published = bool(meta.get("published", False))

    raw_problems = _scan(lines, body_start, errors)
    problems = []
    for raw in raw_problems:
        p = _build_problem(raw, errors)
        if p is not None:
            problems.append(p)

    worksheet = Worksheet(
        worksheet_id=worksheet_id, title=title, problems=problems, published=published
    )
    for err in validate_worksheet(worksheet):
        if err.field == "problems" or not problems:
            errors.append(ParseError(1, str(err)))
    if errors:
        return errors
    return worksheet


def _dump_yaml(data: dict) -> str:
    return yaml.safe_dump(data, sort_keys=True, default_flow_style=False, allow_unicode=True)


def export_worksheet(w: Worksheet) -> str:
    """Emit the canonical worksheet file; import(export(w)) equals w."""
    out = [
        "---",
        _dump_yaml(
            {"title": w.title, "worksheet_id": w.worksheet_id, "published": w.published}
        ).rstrip("\n"),
        "---",
        "",
    ]
    for p in w.problems:
        out.append(f"## {p.problem_id}")
        out.append(f"id: {p.problem_id}")
        out.append("")
        if p.prompt_markdown:
            out.append(p.prompt_markdown)
            out.append("")
        out.append(f"```starter {p.language_tag}")
        if p.starter_code:
            out.append(p.starter_code.rstrip("\n"))
        out.append("```")
        out.append("")
        blank_meta = {
            b.blank_id: {"placeholder": b.placeholder, "initial": b.initial_text}
            for b in p.blanks
            if b.placeholder or b.initial_text
        }
        if blank_meta:
            out.append("```blanks")
            out.append(_dump_yaml(blank_meta).rstrip("\n"))
            out.append("```")
            out.append("")
        for t in p.tests:
            out.append("```test")
            out.append(
                _dump_yaml(
                    {
                        "id": t.test_id,
                        "suffix": t.program_suffix,
                        "expect": t.expected_stdout,
                        "timeout_ms": t.timeout_ms,
                    }
                ).rstrip("\n")
            )
            out.append("```")
            out.append("")
    return "\n".join(out)


class WorksheetNotFound(KeyError):
    pass


class WorksheetStore:
    """Flat-file persistence: one canonical worksheet file per id."""

    def __init__(self, content_dir: Path):
        self.root = Path(content_dir) / "worksheets"
        self.root.mkdir(parents=True, exist_ok=True)

    def path_for(self, worksheet_id: str) -> Path:
        if not re.fullmatch(r"[\w.-]+", worksheet_id):
            raise ValueError(f"unsafe worksheet id {worksheet_id!r}")
        return self.root / f"{worksheet_id}.md"

    def store(self, w: Worksheet) -> Path:
        path = self.path_for(w.worksheet_id)
        tmp = path.with_suffix(".md.tmp")
        tmp.write_text(export_worksheet(w), encoding="utf-8")
        tmp.replace(path)
        return path

    def load(self, worksheet_id: str) -> Worksheet:
        path = self.path_for(worksheet_id)
        if not path.exists():
            raise WorksheetNotFound(worksheet_id)
        result = import_worksheet(path.read_text(encoding="utf-8"))
        if isinstance(result, list):
            raise ValueError(
                f"stored worksheet {worksheet_id!r} no longer parses: "
                + "; ".join(str(e) for e in result)
            )
        return result

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.md"))
