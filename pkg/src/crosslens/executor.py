"""Execution interface for generated analysis scripts.

The engine only speaks this request/artifact contract. `StubExecutor` fulfils
it in-process with deterministic canned artifacts so the whole pipeline runs
offline; `SubprocessExecutor` shells out to the external sandbox runner
(command taken from the CROSSLENS_RUNNER_CMD environment variable) with the
request JSON on stdin and the result JSON on stdout.
"""

from __future__ import annotations

import hashlib
import json
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

DEFAULT_LIMITS = {
    "wall_seconds": 120,
    "memory_bytes": 1 << 30,
    "output_bytes": 10 << 20,
}


@dataclass
class ExecutionRequest:
    script: str
    data_paths: list[str]
    workdir: str
    limits: dict = field(default_factory=lambda: dict(DEFAULT_LIMITS))

    def to_dict(self) -> dict:
        return {
            "script": self.script,
            "data_paths": self.data_paths,
            "workdir": self.workdir,
            "limits": self.limits,
        }


@dataclass
class ExecutionArtifacts:
    status: str  # ok | error | timeout
    stdout: str = ""
    stderr: str = ""
    stat_json: Optional[dict] = None
    x_axis_json: Optional[dict] = None
    y_axis_json: Optional[dict] = None
    plot_file: Optional[str] = None
    violations: list[str] = field(default_factory=list)


class StubExecutor:
    """In-process executor with deterministic artifacts.

    `pattern` is an optional sequence of statuses consumed one per call
    ("error", "timeout", "ok"); after exhaustion every call succeeds. On ok,
    the canonical artifact trio is written into the request workdir so that
    downstream artifact checks exercise real files.
    """

    def __init__(self, pattern: Sequence[str] = ()):
        self.pattern = list(pattern)
        self.calls = 0
        self._lock = threading.Lock()

    def _next_status(self) -> str:
        with self._lock:
            idx = self.calls
            self.calls += 1
        return self.pattern[idx] if idx < len(self.pattern) else "ok"

    def execute(self, req: ExecutionRequest) -> ExecutionArtifacts:
        status = self._next_status()
        workdir = Path(req.workdir)
        workdir.mkdir(parents=True, exist_ok=True)
        if status == "timeout":
            return ExecutionArtifacts(status="timeout", stderr="wall clock limit exceeded")
        if status == "error":
            return ExecutionArtifacts(
                status="error", stderr="Traceback (most recent call last): KeyError: 'column'"
            )
        digest = hashlib.sha256(req.script.encode("utf-8")).hexdigest()[:10]
        stat = {
            "name": f"stat_{digest}",
            "description": f"Deterministic stub statistic for script {digest}",
            "value": f"metric_{digest}={int(digest[:6], 16) % 1000}",
        }
        x_axis = {"name": "x_axis", "description": "stub x axis", "value": [1, 2, 3]}
        y_axis = {"name": "y_axis", "description": "stub y axis", "value": [4, 5, 6]}
        for fname, payload in (("stat.json", stat), ("x_axis.json", x_axis), ("y_axis.json", y_axis)):
            with open(workdir / fname, "w", encoding="utf-8") as fh:
                json.dump(payload, fh)
        return ExecutionArtifacts(
            status="ok",
            stdout=f"stub execution {digest}",
            stat_json=stat,
            x_axis_json=x_axis,
            y_axis_json=y_axis,
        )


class SubprocessExecutor:
    """Client side of the external runner: request on stdin, result on stdout."""

    def __init__(self, command: str):
        self.command = shlex.split(command)

    def execute(self, req: ExecutionRequest) -> ExecutionArtifacts:
        wall = req.limits.get("wall_seconds", DEFAULT_LIMITS["wall_seconds"])
        proc = subprocess.run(
            self.command,
            input=json.dumps(req.to_dict()).encode("utf-8"),
            capture_output=True,
            timeout=wall + 30,  # the runner enforces the real wall limit itself
        )
        if proc.returncode != 0:
            return ExecutionArtifacts(
                status="error",
                stderr=f"runner harness failed (exit {proc.returncode}): "
                + proc.stderr.decode("utf-8", "replace")[-2000:],
            )
        result = json.loads(proc.stdout.decode("utf-8"))
        artifacts = result.get("artifacts", {})
        return ExecutionArtifacts(
            status=result["status"],
            stdout=result.get("stdout", ""),
            stderr=result.get("stderr", ""),
            stat_json=artifacts.get("stat_json"),
            x_axis_json=artifacts.get("x_axis_json"),
            y_axis_json=artifacts.get("y_axis_json"),
            plot_file=artifacts.get("plot_file"),
            violations=result.get("violations", []),
        )
