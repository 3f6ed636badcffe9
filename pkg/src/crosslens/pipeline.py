"""End-to-end orchestration of the five-stage analysis run."""

from __future__ import annotations

import json
import logging
from pathlib import Path

from .bundle import RunContext, append_trace
from .cross import run_cross_stage
from .errors import RetriesExhausted
from .explore import ExplorationResult, explore_source
from .gateway import Gateway
from .priority import (
    SourceLabel,
    key_source_identification,
    objective_score,
    preliminary_relevance,
    priority_score,
    rank_sources,
    semantic_score,
)
from .profiler import SourceProfile, profile_database, profile_image, profile_structured, profile_text
from .report import FinalReport, assemble_context, attach_evidence, synthesize_report, write_report
from .text_utils import keyword_set

logger = logging.getLogger(__name__)

STAGES = ("profile", "prioritize", "explore", "key_id", "cross", "synthesize")


class _StageTracer:
    """Adds the current stage name to every trace event."""

    def __init__(self, run: RunContext):
        self.run = run
        self.stage = "init"

    def __call__(self, event: dict) -> None:
        append_trace(self.run, {"stage": self.stage, **event})

    def start(self, stage: str) -> None:
        self.stage = stage
        self(dict(type="stage_start"))


def run_pipeline(run: RunContext, gateway: Gateway, executor) -> FinalReport:
    bundle = run.bundle
    config = run.config
    trace = _StageTracer(run)
    gateway.trace = trace

    # Stage 1: profiling + prioritization inputs
    trace.start("profile")
    profiles: dict[str, SourceProfile] = {}
    data_paths: dict[str, str] = {}
    source_files: dict[str, str] = {}  # bundle-relative, for evidence locators
    for source in bundle.sources:
        rel = f"sources/{source.path.name}"
        if source.modality in ("csv", "json"):
            entries = [profile_structured(source)]
        elif source.modality == "sql_db":
            entries = profile_database(source)
        elif source.modality == "txt":
            entries = [profile_text(source, gateway, budget=config.text_summary_budget, trace=trace)]
        elif source.modality == "image":
            profile, table = profile_image(source, gateway)
            if table is not None:
                import csv as _csv

                extracted = run.profiles_dir / f"{source.name}.extracted.csv"
                with open(extracted, "w", encoding="utf-8", newline="") as fh:
                    writer = _csv.writer(fh)
                    writer.writerow(table.headers)
                    writer.writerows(table.rows)
                data_paths[profile.source_name] = str(extracted)
            entries = [profile]
        else:
            logger.warning("skipping source %s with modality %s", source.name, source.modality)
            continue
        for profile in entries:
            profiles[profile.source_name] = profile
            data_paths.setdefault(profile.source_name, str(source.path))
            source_files[profile.source_name] = rel
            with open(run.profiles_dir / f"{profile.source_name}.json", "w", encoding="utf-8") as fh:
                json.dump(profile.to_dict(), fh, ensure_ascii=False, indent=2)
            trace({"type": "source_profiled", "source": profile.source_name, "modality": profile.modality})

    # Stage 1b: hybrid priority scoring
    trace.start("prioritize")
    goal_keywords = keyword_set(bundle.goal)
    scores = []
    for name in sorted(profiles):
        profile = profiles[name]
        evaluation = preliminary_relevance(profile, bundle.goal, gateway)
        obj = objective_score(profile)
        s_sem = semantic_score(goal_keywords, set(profile.schema_keywords), config.lambda_sem)
        score = priority_score(obj, s_sem, float(evaluation.relevance), source_name=name)
        scores.append(score)
        with open(run.profiles_dir / f"{name}.priority.json", "w", encoding="utf-8") as fh:
            json.dump(
                {
                    **score.to_dict(),
                    "s_quality": obj.s_quality,
                    "s_richness": obj.s_richness,
                    "s_temp": obj.s_temp,
                    "preliminary": vars(evaluation),
                },
                fh,
                ensure_ascii=False,
                indent=2,
            )
        trace({"type": "source_scored", "source": name, "s_priority": score.s_priority})
    ranked = rank_sources(scores)
    rank_order = [s.source_name for s in ranked]
    with open(run.profiles_dir / "_ranking.json", "w", encoding="utf-8") as fh:
        json.dump({"order": rank_order, "source_files": source_files}, fh, ensure_ascii=False, indent=2)
    trace({"type": "ranking", "order": rank_order})

    # Stage 2: per-source deep exploration
    trace.start("explore")
    results: dict[str, ExplorationResult] = {}
    for name in rank_order:
        out_dir = run.explorations_dir / name
        out_dir.mkdir(parents=True, exist_ok=True)
        results[name] = explore_source(
            profiles[name], data_paths[name], bundle.goal, bundle.context or "",
            config, gateway, executor, out_dir, trace=trace,
        )
        trace({"type": "source_explored", "source": name, "nodes": len(results[name].nodes)})

    # Stage 3: key source identification
    labels: dict[str, SourceLabel] = {}
    if config.enable_key_identification:
        trace.start("key_id")
        for name in rank_order:
            try:
                labels[name] = key_source_identification(profiles[name], results[name].summary, bundle.goal, gateway)
            except RetriesExhausted:
                labels[name] = SourceLabel(5, 5, "Secondary", "labeling failed; defaulted")
            trace({"type": "source_labeled", "source": name, "label": labels[name].label})
    else:
        # ablation: every source drives the analysis
        labels = {
            name: SourceLabel(5, 5, "Primary", "key identification disabled") for name in rank_order
        }

    # Stage 4: cross-pollination
    if config.enable_cross_pollination and len(rank_order) >= 2:
        trace.start("cross")
        run_cross_stage(
            bundle.goal, profiles, results, labels, rank_order, data_paths,
            run.cross_dir, gateway, executor, config, trace=trace,
        )

    # Stage 5: synthesis
    trace.start("synthesize")
    context = assemble_context(run.output_dir, trace=trace)
    report = synthesize_report(context, gateway)
    report = attach_evidence(report, run.output_dir)
    write_report(report, run.output_dir)
    trace({"type": "report_written", "insights": len(report.insights)})
    return report
