"""Command-line surface: analyze, profile, evaluate."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .bundle import RunConfig, init_run, load_bundle
from .errors import CrosslensError
from .evaluation import evaluate_report
from .executor import StubExecutor, SubprocessExecutor
from .gateway import Gateway, make_backend
from .pipeline import run_pipeline
from .profiler import profile_database, profile_structured, profile_text
from .report import FinalReport

logger = logging.getLogger(__name__)

RUNNER_CMD_ENV = "CROSSLENS_RUNNER_CMD"


def _make_executor(runner_cmd: str | None):
    import os

    command = runner_cmd or os.environ.get(RUNNER_CMD_ENV)
    if command:
        return SubprocessExecutor(command)
    logger.info("no runner command configured; using the in-process stub executor")
    return StubExecutor()


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool):
    """Multi-agent analysis over heterogeneous data sources."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("bundle_path", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Run output directory.")
@click.option("--rounds", default=2, show_default=True, help="Exploration rounds per source.")
@click.option("--questions", default=2, show_default=True, help="Questions per round.")
@click.option("--no-rereact", is_flag=True, help="Disable inner-loop code retry.")
@click.option("--no-key-id", is_flag=True, help="Disable key source identification.")
@click.option("--no-cross", is_flag=True, help="Disable cross-pollination.")
@click.option("--backend", default="openai", show_default=True, help="Model backend (openai | scripted).")
@click.option("--scripted-responses", type=click.Path(exists=True), default=None,
              help="Responses file for the scripted backend.")
@click.option("--runner-cmd", default=None, help="Sandbox runner command (defaults to $CROSSLENS_RUNNER_CMD).")
@click.option("--stub-executor", is_flag=True, help="Force the in-process stub executor.")
@click.option("--force", is_flag=True, help="Overwrite an existing output directory.")
def analyze(bundle_path, out_dir, rounds, questions, no_rereact, no_key_id, no_cross,
            backend, scripted_responses, runner_cmd, stub_executor, force):
    """Run the full pipeline on a task bundle."""
    try:
        bundle = load_bundle(bundle_path)
        config = RunConfig(
            rounds=rounds,
            questions_per_round=questions,
            enable_rereact_inner=not no_rereact,
            enable_key_identification=not no_key_id,
            enable_cross_pollination=not no_cross,
        )
        run = init_run(bundle, config, out_dir, force=force)
        gateway = Gateway(backend=make_backend(backend, scripted_responses))
        executor = StubExecutor() if stub_executor else _make_executor(runner_cmd)
        report = run_pipeline(run, gateway, executor)
    except CrosslensError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"report written to {run.report_path} ({len(report.insights)} insights)")


@main.command()
@click.argument("bundle_path", type=click.Path(exists=True, file_okay=False))
def profile(bundle_path):
    """Profile a bundle's structured and text sources and print the results."""
    try:
        bundle = load_bundle(bundle_path)
    except CrosslensError as exc:
        raise click.ClickException(str(exc)) from exc
    for source in bundle.sources:
        try:
            if source.modality in ("csv", "json"):
                entries = [profile_structured(source)]
            elif source.modality == "sql_db":
                entries = profile_database(source)
            elif source.modality == "txt":
                entries = [profile_text(source)]
            else:
                click.echo(f"# {source.name}: skipped (modality {source.modality} needs a vision backend)")
                continue
        except CrosslensError as exc:
            click.echo(f"# {source.name}: failed ({exc})", err=True)
            continue
        for entry in entries:
            click.echo(json.dumps(entry.to_dict(), ensure_ascii=False, indent=2))


@main.command()
@click.argument("report_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("ground_truth_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", default="openai", show_default=True, help="Judge backend (openai | scripted).")
@click.option("--scripted-responses", type=click.Path(exists=True), default=None)
@click.option("--out", "scores_path", default=None, type=click.Path(),
              help="Where to write scores.json (default: next to the report).")
def evaluate(report_path, ground_truth_path, backend, scripted_responses, scores_path):
    """Score a report against ground truth on the four dimensions."""
    with open(report_path, "r", encoding="utf-8") as fh:
        report = FinalReport.from_dict(json.load(fh))
    with open(ground_truth_path, "r", encoding="utf-8") as fh:
        ground_truth = json.load(fh)
    try:
        gateway = Gateway(backend=make_backend(backend, scripted_responses))
        scores = evaluate_report(report, ground_truth, gateway)
    except CrosslensError as exc:
        raise click.ClickException(str(exc)) from exc
    out = Path(scores_path) if scores_path else Path(report_path).parent / "scores.json"
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(scores.to_dict(), fh, ensure_ascii=False, indent=2)
    rows = [
        ("factuality (numeric)", scores.s_factu_num),
        ("factuality (judge /10)", scores.s_factu_llm),
        ("factuality", scores.s_factu),
        ("completeness", scores.s_comp),
        ("logic", scores.s_logic),
        ("insightfulness", scores.s_ins),
        ("total", scores.s_total),
    ]
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        click.echo(f"{name.ljust(width)}  {value:.4f}" if isinstance(value, float) else f"{name.ljust(width)}  {value}")
    click.echo(f"scores written to {out}")


if __name__ == "__main__":
    sys.exit(main())
