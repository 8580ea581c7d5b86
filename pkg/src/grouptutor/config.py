"""Deployment configuration: one YAML file describes a whole service.

Example:

    listen:
      host: 127.0.0.1
      port: 8800
    content_dir: ./content
    data_dir: ./data
    active_worksheet: ws-demo
    groups: [1, 2, 3, 4]          # or {from: 1, to: 115}
    ta_allowlist: [ta@course.edu]
    max_group_size: 7
    turn_window: 20
    prompt_file: null              # defaults to the bundled hint-only prompt
    backend:
      name: scripted-mock          # or: http
      # base_url: https://llm.internal/v1
      # model: tutor-large
      # api_key_env: GROUPTUTOR_API_KEY
    executors:
      python:
        command: "python3 {path}"
        hard_timeout_ms: 10000
    snapshot_every: 500
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .core import CoreConfig
from .grader import ExecutorConfig, default_executors
from .tutor import TutorPolicy, make_backend


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8800
    content_dir: Path = Path("./content")
    data_dir: Path = Path("./data")
    frontend_dir: Optional[Path] = None
    active_worksheet: str = ""
    groups: set[int] = field(default_factory=set)
    ta_allowlist: set[str] = field(default_factory=set)
    max_group_size: int = 7
    turn_window: int = 20
    label_feature_since_ms: int = 0
    prompt_file: Optional[Path] = None
    backend_name: str = "scripted-mock"
    backend_options: dict = field(default_factory=dict)
    executors: dict = field(default_factory=default_executors)
    snapshot_every: int = 500
    fsync: bool = False

    @property
    def log_path(self) -> Path:
        return Path(self.data_dir) / "events.log"

    @property
    def snapshot_path(self) -> Path:
        return Path(self.data_dir) / "snapshot.json"

    def core_config(self) -> CoreConfig:
        return CoreConfig(
            active_worksheet_id=self.active_worksheet,
            groups=set(self.groups),
            ta_allowlist={e.lower() for e in self.ta_allowlist},
            max_group_size=self.max_group_size,
            label_feature_since_ms=self.label_feature_since_ms,
            executors=self.executors,
            grader_work_dir=None,
        )

    def tutor_policy(self) -> TutorPolicy:
        if self.prompt_file:
            return TutorPolicy.from_prompt_file(str(self.prompt_file), self.turn_window)
        return TutorPolicy(turn_window=self.turn_window)

    def tutor_backend(self):
        return make_backend(self.backend_name, **self.backend_options)


def _parse_groups(raw) -> set[int]:
    if raw is None:
        return set()
    if isinstance(raw, dict):
        return set(range(int(raw["from"]), int(raw["to"]) + 1))
    return {int(g) for g in raw}


def load_config(path: Path) -> ServiceConfig:
    with open(path, encoding="utf-8") as f:
        raw = yaml.safe_load(f) or {}

    executors = default_executors()
    for tag, spec in (raw.get("executors") or {}).items():
        executors[tag] = ExecutorConfig(
            language_tag=tag,
            command_template=spec["command"],
            hard_timeout_ms=int(spec.get("hard_timeout_ms", 10_000)),
            max_output_bytes=int(spec.get("max_output_bytes", 16_384)),
        )

    listen = raw.get("listen") or {}
    backend = raw.get("backend") or {}
    base = Path(path).resolve().parent

    def _dir(key: str, default: str) -> Path:
        value = raw.get(key)
        return (base / value).resolve() if value else (base / default).resolve()

    return ServiceConfig(
        host=listen.get("host", "127.0.0.1"),
        port=int(listen.get("port", 8800)),
        content_dir=_dir("content_dir", "content"),
        data_dir=_dir("data_dir", "data"),
        frontend_dir=(base / raw["frontend_dir"]).resolve() if raw.get("frontend_dir") else None,
        active_worksheet=raw.get("active_worksheet", ""),
        groups=_parse_groups(raw.get("groups")),
        ta_allowlist=set(raw.get("ta_allowlist") or []),
        max_group_size=int(raw.get("max_group_size", 7)),
        turn_window=int(raw.get("turn_window", 20)),
        label_feature_since_ms=int(raw.get("label_feature_since_ms", 0)),
        prompt_file=(base / raw["prompt_file"]).resolve() if raw.get("prompt_file") else None,
        backend_name=backend.get("name", "scripted-mock"),
        backend_options={k: v for k, v in backend.items() if k != "name"},
        executors=executors,
        snapshot_every=int(raw.get("snapshot_every", 500)),
        fsync=bool(raw.get("fsync", False)),
    )
