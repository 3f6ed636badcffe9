"""Engine-to-runner integration through the process I/O contract only."""

import json
import sys
import textwrap

import pytest

from crosslens.bundle import RunConfig, init_run, load_bundle
from crosslens.executor import ExecutionRequest, SubprocessExecutor
from crosslens.gateway import Gateway, ScriptedBackend
from crosslens.pipeline import run_pipeline
from tests.conftest import scripted_pipeline_responses

RUNNER_CMD = f"{sys.executable} -m insight.runner"

pytest.importorskip("insight.runner", reason="the sandbox runner package is not installed")

ARTIFACT_SCRIPT = textwrap.dedent(
    """
    import json
    import insight.tools as tools

    tools.setup()
    json.dump({"name": "trend", "description": "Revenue trend", "value": "up 12.5%"},
              open("stat.json", "w"))
    json.dump({"name": "x_axis", "description": "months", "value": [1, 2, 3]},
              open("x_axis.json", "w"))
    json.dump({"name": "y_axis", "description": "revenue", "value": [10, 20, 30]},
              open("y_axis.json", "w"))
    tools.fix_fnames()
    """
)


class TestSubprocessExecutor:
    def test_roundtrip_artifacts(self, tmp_path):
        executor = SubprocessExecutor(RUNNER_CMD)
        result = executor.execute(
            ExecutionRequest(script=ARTIFACT_SCRIPT, data_paths=[], workdir=str(tmp_path / "w"))
        )
        assert result.status == "ok"
        assert result.stat_json["name"] == "trend"
        assert result.y_axis_json["value"] == [10, 20, 30]

    def test_script_failure_maps_to_error(self, tmp_path):
        executor = SubprocessExecutor(RUNNER_CMD)
        result = executor.execute(
            ExecutionRequest(script="raise RuntimeError('nope')", data_paths=[],
                             workdir=str(tmp_path / "w"))
        )
        assert result.status == "error"
        assert "nope" in result.stderr


class TestPipelineWithRealRunner:
    def test_small_run_end_to_end(self, trio_bundle_dir, tmp_path):
        responses = scripted_pipeline_responses(3)
        responses["generate_code"] = [f"```python\n{ARTIFACT_SCRIPT}```"]
        bundle = load_bundle(trio_bundle_dir)
        config = RunConfig(rounds=1, questions_per_round=1, enable_cross_pollination=False)
        run = init_run(bundle, config, tmp_path / "out")
        report = run_pipeline(
            run, Gateway(backend=ScriptedBackend(responses)), SubprocessExecutor(RUNNER_CMD)
        )
        assert report.insights
        # every node executed for real: attempt dirs hold runner-written artifacts
        stats = list(run.explorations_dir.glob("*/q1/attempt1/stat.json"))
        assert len(stats) == 3
        assert all(json.loads(p.read_text())["name"] == "trend" for p in stats)
