"""Process-isolation harness for generated analysis scripts.

Contract: one execution request as JSON on stdin, one result document as JSON
on stdout, artifacts left in the request workdir. The harness exits 0 unless
it fails itself; script failures are reported inside the result document.

Isolation model (per-process, desk scale): the script runs in a separate
Python process with its own scratch working directory and rlimit caps on
address space and file size. Every data file is copied read-only into
``workdir/data`` and the script text is rewritten to reference the copies, so
the original bundle files are never handed to untrusted code.
"""

from __future__ import annotations

import json
import shutil
import stat as stat_mod
import subprocess
import sys
from pathlib import Path
from typing import Optional

ARTIFACT_FIELDS = ("name", "description", "value")
ARTIFACT_CHAR_LIMIT = 4500
AXIS_POINT_LIMIT = 50
KILL_GRACE_SECONDS = 2.0

DEFAULT_LIMITS = {
    "wall_seconds": 120,
    "memory_bytes": 1 << 30,
    "output_bytes": 10 << 20,
}


def _set_rlimits(memory_bytes: int, output_bytes: int):
    def apply() -> None:
        import resource

        resource.setrlimit(resource.RLIMIT_AS, (memory_bytes, memory_bytes))
        resource.setrlimit(resource.RLIMIT_FSIZE, (output_bytes, output_bytes))

    return apply


def stage_data(script: str, data_paths: list[str], workdir: Path) -> str:
    """Copy data files into workdir/data as read-only and point the script at
    the copies instead of the originals."""
    data_dir = workdir / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    for original in data_paths:
        source = Path(original)
        if not source.is_file():
            continue
        target = data_dir / source.name
        if not target.exists():
            shutil.copy2(source, target)
            target.chmod(stat_mod.S_IRUSR | stat_mod.S_IRGRP | stat_mod.S_IROTH)
        script = script.replace(original, str(target))
    return script


def _load_artifact(path: Path) -> tuple[Optional[dict], list[str]]:
    violations = []
    if not path.is_file():
        return None, [f"{path.name}: missing"]
    raw = path.read_text(encoding="utf-8", errors="replace")
    if len(raw) >= ARTIFACT_CHAR_LIMIT:
        violations.append(f"{path.name}: {len(raw)} characters, limit {ARTIFACT_CHAR_LIMIT}")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        return None, violations + [f"{path.name}: invalid JSON ({exc})"]
    if not isinstance(doc, dict) or sorted(doc) != sorted(ARTIFACT_FIELDS):
        return doc if isinstance(doc, dict) else None, violations + [
            f"{path.name}: fields must be exactly {list(ARTIFACT_FIELDS)}"
        ]
    return doc, violations


def validate_artifacts(workdir: str | Path) -> dict:
    """Check the canonical artifact trio for presence, schema, size, and axis
    point counts. Returns {artifacts, violations}; never raises."""
    root = Path(workdir)
    violations: list[str] = []
    artifacts: dict = {}
    for fname, key in (
        ("stat.json", "stat_json"),
        ("x_axis.json", "x_axis_json"),
        ("y_axis.json", "y_axis_json"),
    ):
        doc, problems = _load_artifact(root / fname)
        violations.extend(problems)
        artifacts[key] = doc
        if key != "stat_json" and isinstance(doc, dict):
            points = doc.get("value")
            if isinstance(points, list) and len(points) > AXIS_POINT_LIMIT:
                violations.append(f"{fname}: {len(points)} points, limit {AXIS_POINT_LIMIT}")
    plot = root / "plot.png"
    artifacts["plot_file"] = str(plot) if plot.is_file() else None
    return {"artifacts": artifacts, "violations": violations}


def execute(request: dict) -> dict:
    limits = {**DEFAULT_LIMITS, **(request.get("limits") or {})}
    workdir = Path(request["workdir"])
    workdir.mkdir(parents=True, exist_ok=True)
    script = stage_data(request.get("script", ""), request.get("data_paths", []), workdir)
    script_path = workdir / "script.py"
    script_path.write_text(script, encoding="utf-8")

    # the child sees the harness's import paths so `insight.tools` resolves
    import os

    env = dict(os.environ)
    package_root = str(Path(__file__).resolve().parent.parent)
    env["PYTHONPATH"] = package_root + os.pathsep + env.get("PYTHONPATH", "")
    env["MPLBACKEND"] = "Agg"

    proc = subprocess.Popen(
        [sys.executable, str(script_path)],
        cwd=str(workdir),
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        env=env,
        preexec_fn=_set_rlimits(limits["memory_bytes"], limits["output_bytes"]),
    )
    timed_out = False
    try:
        out, err = proc.communicate(timeout=limits["wall_seconds"])
    except subprocess.TimeoutExpired:
        timed_out = True
        proc.terminate()
        try:
            out, err = proc.communicate(timeout=KILL_GRACE_SECONDS)
        except subprocess.TimeoutExpired:
            proc.kill()
            out, err = proc.communicate()

    cap = limits["output_bytes"]
    stdout = out.decode("utf-8", "replace")[:cap]
    stderr = err.decode("utf-8", "replace")[:cap]

    report = validate_artifacts(workdir)
    if timed_out:
        status = "timeout"
        stderr = stderr or f"wall clock limit of {limits['wall_seconds']}s exceeded"
    elif proc.returncode != 0:
        status = "error"
        stderr = stderr or f"script exited with code {proc.returncode}"
    elif report["violations"]:
        status = "error"
    else:
        status = "ok"
    return {
        "status": status,
        "stdout": stdout,
        "stderr": stderr,
        "violations": report["violations"],
        "artifacts": report["artifacts"],
    }


def main() -> int:
    try:
        request = json.load(sys.stdin)
        result = execute(request)
    except Exception as exc:  # harness failure, not script failure
        print(f"runner harness error: {exc}", file=sys.stderr)
        return 1
    json.dump(result, sys.stdout)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
