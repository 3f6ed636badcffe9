"""Task bundles, run configuration, and the append-only run trace."""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError, EmptySources, IoFailure, MissingTaskFile, OutputDirExists, UnknownModality

EXTENSION_MODALITIES = {
    ".csv": "csv",
    ".json": "json",
    ".txt": "txt",
    ".sqlite": "sql_db",
    ".db": "sql_db",
    ".png": "image",
    ".jpg": "image",
    ".jpeg": "image",
}

MODALITIES = ("csv", "sql_db", "json", "txt", "image")


@dataclass
class DataSource:
    name: str
    modality: str
    path: Path
    size_bytes: int


@dataclass
class TaskBundle:
    goal: str
    sources: list[DataSource]
    bundle_id: str
    context: Optional[str] = None
    ground_truth_path: Optional[Path] = None


@dataclass
class RunConfig:
    rounds: int = 2
    questions_per_round: int = 2
    temperature: float = 0.0
    max_code_retries: int = 3
    lambda_sem: float = 15.0
    enable_rereact_inner: bool = True
    enable_key_identification: bool = True
    enable_cross_pollination: bool = True
    text_summary_budget: int = 4000
    max_cross_pairs: Optional[int] = None

    def validate(self) -> None:
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.questions_per_round < 1:
            raise ConfigError("questions_per_round must be >= 1")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_code_retries < 0:
            raise ConfigError("max_code_retries must be >= 0")


@dataclass
class RunContext:
    run_id: str
    bundle: TaskBundle
    config: RunConfig
    output_dir: Path
    trace_path: Path
    _trace_lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _trace_seq: int = 0

    @property
    def profiles_dir(self) -> Path:
        return self.output_dir / "profiles"

    @property
    def explorations_dir(self) -> Path:
        return self.output_dir / "explorations"

    @property
    def cross_dir(self) -> Path:
        return self.output_dir / "cross"

    @property
    def report_path(self) -> Path:
        return self.output_dir / "report.json"


def load_bundle(path: str | Path) -> TaskBundle:
    """Load a bundle directory: ``task.json`` plus a ``sources/`` tree.

    Modalities are inferred from file extensions, with optional per-file
    overrides in ``task.json`` under ``modality_overrides``.
    """
    root = Path(path)
    task_file = root / "task.json"
    if not task_file.is_file():
        raise MissingTaskFile(f"no task.json under {root}")
    with open(task_file, "r", encoding="utf-8") as fh:
        task = json.load(fh)
    goal = (task.get("goal") or "").strip()
    if not goal:
        raise MissingTaskFile(f"task.json in {root} has an empty goal")
    overrides = task.get("modality_overrides") or {}

    sources_dir = root / "sources"
    sources: list[DataSource] = []
    if sources_dir.is_dir():
        for entry in sorted(sources_dir.iterdir()):
            if not entry.is_file():
                continue
            name = entry.stem
            if name in overrides:
                modality = overrides[name]
                if modality not in MODALITIES:
                    raise UnknownModality(f"override for {name!r} names unknown modality {modality!r}")
            else:
                ext = entry.suffix.lower()
                if ext not in EXTENSION_MODALITIES:
                    raise UnknownModality(f"no modality mapping for extension {ext!r} ({entry.name})")
                modality = EXTENSION_MODALITIES[ext]
            sources.append(
                DataSource(name=name, modality=modality, path=entry, size_bytes=entry.stat().st_size)
            )
    if not sources:
        raise EmptySources(f"bundle {root} has no sources")
    names = [s.name for s in sources]
    if len(set(names)) != len(names):
        raise EmptySources(f"duplicate source names in {root}")

    gt = root / "ground_truth.json"
    return TaskBundle(
        goal=goal,
        context=task.get("context"),
        sources=sources,
        bundle_id=root.name,
        ground_truth_path=gt if gt.is_file() else None,
    )


def init_run(bundle: TaskBundle, config: RunConfig, output_dir: str | Path, force: bool = False) -> RunContext:
    """Scaffold the run directory (profiles/, explorations/, cross/, trace.jsonl)."""
    config.validate()
    out = Path(output_dir)
    if out.exists() and any(out.iterdir()):
        if not force:
            raise OutputDirExists(f"{out} already exists; pass force to overwrite")
        import shutil

        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)
    for sub in ("profiles", "explorations", "cross"):
        (out / sub).mkdir()
    trace_path = out / "trace.jsonl"
    trace_path.touch()
    return RunContext(
        run_id=uuid.uuid4().hex,
        bundle=bundle,
        config=config,
        output_dir=out,
        trace_path=trace_path,
    )


def append_trace(run: RunContext, event: dict) -> int:
    """Append one event line to trace.jsonl; thread-safe, returns the sequence number.

    Safe to call from concurrent exploration workers: the line is built first
    and written under a lock with a single write call, so lines never interleave.
    """
    with run._trace_lock:
        run._trace_seq += 1
        record = {"seq": run._trace_seq, **event}
        line = json.dumps(record, ensure_ascii=False) + "\n"
        try:
            with open(run.trace_path, "a", encoding="utf-8") as fh:
                fh.write(line)
        except OSError as exc:
            raise IoFailure(f"cannot append to {run.trace_path}: {exc}") from exc
        return run._trace_seq


def read_trace(trace_path: str | Path) -> list[dict]:
    events = []
    with open(trace_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(json.loads(line))
    return events
