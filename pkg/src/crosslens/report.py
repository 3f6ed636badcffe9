"""Final report synthesis: context assembly, five-key report generation, and
post-hoc evidence attachment.

Evidence is attached by the engine, never requested from the model: a link is
only emitted when a reported insight lexically matches the insight text of an
exploration node that actually ran, so every link resolves on disk.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .errors import MissingStageArtifacts, RetriesExhausted
from .gateway import Gateway
from .prompts import FINAL_PROMPT_TEMPLATE
from .text_utils import tokenize

REPORT_KEYS = ("summary", "insights", "cross_dataset_discoveries", "limitations", "next_steps")

CONTEXT_SECTION_CAP = 6000  # characters per source/cross section
EVIDENCE_OVERLAP_THRESHOLD = 0.5


@dataclass
class EvidenceLink:
    insight_index: int
    source: str
    locator: dict
    node_ref: str

    def to_dict(self) -> dict:
        return vars(self)


@dataclass
class FinalReport:
    summary: str
    insights: list[str]
    cross_dataset_discoveries: list[str]
    limitations: list[str]
    next_steps: list[str]
    evidence: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "summary": self.summary,
            "insights": self.insights,
            "cross_dataset_discoveries": self.cross_dataset_discoveries,
            "limitations": self.limitations,
            "next_steps": self.next_steps,
            "evidence": self.evidence,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FinalReport":
        return cls(
            summary=data["summary"],
            insights=list(data["insights"]),
            cross_dataset_discoveries=list(data["cross_dataset_discoveries"]),
            limitations=list(data["limitations"]),
            next_steps=list(data["next_steps"]),
            evidence=list(data.get("evidence", [])),
        )


def _truncate(text: str, cap: int, trace: Optional[Callable[[dict], None]], section: str) -> str:
    if len(text) <= cap:
        return text
    if trace is not None:
        trace({"type": "context_truncated", "section": section, "original_length": len(text)})
    return text[:cap] + " ...[truncated]"


def assemble_context(output_dir: Path, trace: Optional[Callable[[dict], None]] = None) -> str:
    """Build the synthesis context from on-disk stage artifacts, ordered by
    priority rank (sources) and node id (findings)."""
    profiles_dir = output_dir / "profiles"
    explorations_dir = output_dir / "explorations"
    if not profiles_dir.is_dir() or not explorations_dir.is_dir():
        raise MissingStageArtifacts(f"run directory {output_dir} lacks stage artifacts")

    ranking_path = profiles_dir / "_ranking.json"
    if not ranking_path.is_file():
        raise MissingStageArtifacts("priority ranking artifact missing")
    with open(ranking_path, "r", encoding="utf-8") as fh:
        rank_order = json.load(fh)["order"]

    sections = []
    for source in rank_order:
        exploration_path = explorations_dir / source / "exploration.json"
        if not exploration_path.is_file():
            raise MissingStageArtifacts(f"exploration artifact missing for {source}")
        with open(exploration_path, "r", encoding="utf-8") as fh:
            exploration = json.load(fh)
        lines = [f"## Source: {source}", f"Summary: {exploration['summary']}"]
        for node in exploration["nodes"]:
            if node.get("insight_text"):
                lines.append(f"- [{node['node_id']}] {node['question']['text']} -> {node['insight_text']}")
        sections.append(_truncate("\n".join(lines), CONTEXT_SECTION_CAP, trace, source))

    cross_dir = output_dir / "cross"
    checklist_path = cross_dir / "checklist.json"
    if checklist_path.is_file():
        with open(checklist_path, "r", encoding="utf-8") as fh:
            checklist = json.load(fh)
        lines = ["## Cross-Source Findings"]
        for item in checklist["items"]:
            node_id = item.get("node_id")
            insight = None
            if node_id:
                node_path = cross_dir / node_id / "node.json"
                if node_path.is_file():
                    with open(node_path, "r", encoding="utf-8") as fh:
                        insight = json.load(fh).get("insight_text")
            status = item["status"]
            lines.append(f"- [{node_id}] ({status}) {item['question']['text']} -> {insight or 'no finding'}")
        annotations_path = cross_dir / "annotations.json"
        if annotations_path.is_file():
            with open(annotations_path, "r", encoding="utf-8") as fh:
                annotations = json.load(fh)
            if annotations:
                lines.append("## Agent Annotations")
                for ann in annotations:
                    lines.append(f"- {ann['annotator']} on {ann['target']}: {ann['comment']}")
        sections.append(_truncate("\n".join(lines), CONTEXT_SECTION_CAP, trace, "cross"))

    return "\n\n".join(sections)


def _parse_report_json(text: str) -> tuple[Optional[str], Optional[dict]]:
    cleaned = text.strip()
    cleaned = re.sub(r"^```(?:json)?\s*", "", cleaned)
    cleaned = re.sub(r"\s*```$", "", cleaned)
    start, end = cleaned.find("{"), cleaned.rfind("}")
    if start == -1 or end <= start:
        return "response contains no JSON object", None
    try:
        data = json.loads(cleaned[start : end + 1])
    except json.JSONDecodeError as exc:
        return f"invalid JSON: {exc}", None
    for key in REPORT_KEYS:
        if key not in data:
            return f"missing required key {key!r}", None
    if not isinstance(data["summary"], str):
        return "summary must be a string", None
    for key in REPORT_KEYS[1:]:
        if not isinstance(data[key], list):
            return f"{key} must be a list", None
    return None, data


def synthesize_report(context: str, gateway: Gateway) -> FinalReport:
    prompt = FINAL_PROMPT_TEMPLATE.format(full_context=context)
    completion = gateway.complete_with_retry(
        prompt, validator=lambda t: _parse_report_json(t)[0], stage_tag="synthesize"
    )
    _, data = _parse_report_json(completion.text)
    return FinalReport(
        summary=data["summary"],
        insights=[str(i) for i in data["insights"]],
        cross_dataset_discoveries=[str(i) for i in data["cross_dataset_discoveries"]],
        limitations=[str(i) for i in data["limitations"]],
        next_steps=[str(i) for i in data["next_steps"]],
    )


def token_overlap(a: str, b: str) -> float:
    """Jaccard overlap of content-token sets; the tie-break oracle for linking."""
    ta, tb = set(tokenize(a)), set(tokenize(b))
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def _source_locator(source: str, profile: dict, bundle_rel_path: str) -> dict:
    modality = profile.get("modality")
    if modality == "csv":
        return {"kind": "csv_rows", "path": bundle_rel_path,
                "rows": [0, max(profile.get("row_count", 1) - 1, 0)]}
    if modality == "json":
        return {"kind": "json_path", "path": bundle_rel_path, "expr": "$"}
    if modality == "txt":
        return {"kind": "text_span", "path": bundle_rel_path, "span": [0, -1]}
    if modality == "image":
        if profile.get("image_kind") == "tabular":
            return {"kind": "extracted_table", "path": f"profiles/{source}.extracted.csv"}
        return {"kind": "image_region", "path": bundle_rel_path, "region": "full"}
    if modality == "sql_db":
        table = source.split(".", 1)[1] if "." in source else source
        return {"kind": "table", "path": bundle_rel_path, "table": table}
    return {"kind": "file", "path": bundle_rel_path}


def attach_evidence(report: FinalReport, output_dir: Path) -> FinalReport:
    """Link each insight to the node whose insight text it lexically matches;
    insights with no resolvable node get an explicit unlinked marker."""
    profiles_dir = output_dir / "profiles"
    with open(profiles_dir / "_ranking.json", "r", encoding="utf-8") as fh:
        ranking = json.load(fh)
    rank_order: list[str] = ranking["order"]
    source_files: dict[str, str] = ranking.get("source_files", {})
    rank_index = {name: i for i, name in enumerate(rank_order)}

    # candidate nodes: (source, node_ref, insight_text, profile)
    candidates = []
    for source in rank_order:
        profile_path = profiles_dir / f"{source}.json"
        profile = {}
        if profile_path.is_file():
            with open(profile_path, "r", encoding="utf-8") as fh:
                profile = json.load(fh)
        exploration_path = output_dir / "explorations" / source / "exploration.json"
        if not exploration_path.is_file():
            continue
        with open(exploration_path, "r", encoding="utf-8") as fh:
            exploration = json.load(fh)
        for node in exploration["nodes"]:
            if node.get("insight_text"):
                candidates.append(
                    (source, f"explorations/{source}/{node['node_id']}", node["insight_text"], profile)
                )
    cross_dir = output_dir / "cross"
    if cross_dir.is_dir():
        for node_path in sorted(cross_dir.glob("q*/node.json")):
            with open(node_path, "r", encoding="utf-8") as fh:
                node = json.load(fh)
            if node.get("insight_text"):
                # cross nodes are attributed to their first source
                source = None
                candidates.append(
                    (source, f"cross/{node['node_id']}", node["insight_text"], {})
                )

    # deterministic candidate order: higher-priority sources first, cross nodes
    # last, so a plain strictly-greater scan resolves ties toward rank
    candidates.sort(key=lambda c: (rank_index.get(c[0], 1 << 30), c[1]))

    evidence: list[dict] = []
    for idx, insight in enumerate(report.insights):
        best = None
        best_score = 0.0
        for source, node_ref, text, profile in candidates:
            score = token_overlap(insight, text)
            if score > best_score + 1e-12:
                best, best_score = (source, node_ref, text, profile), score
        if best is not None and best_score >= EVIDENCE_OVERLAP_THRESHOLD:
            source, node_ref, _, profile = best
            if source is not None:
                locator = _source_locator(source, profile, source_files.get(source, ""))
                evidence.append(
                    EvidenceLink(insight_index=idx, source=source, locator=locator, node_ref=node_ref).to_dict()
                )
            else:
                evidence.append(
                    {"insight_index": idx, "source": "cross", "locator": {"kind": "cross_node"}, "node_ref": node_ref}
                )
        else:
            evidence.append({"insight_index": idx, "unlinked": True})
    report.evidence = evidence
    return report


def serialize_report(report: FinalReport) -> str:
    return json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n"


def write_report(report: FinalReport, output_dir: Path) -> Path:
    path = output_dir / "report.json"
    path.write_text(serialize_report(report), encoding="utf-8")
    (output_dir / "report.md").write_text(render_markdown(report), encoding="utf-8")
    return path


def render_markdown(report: FinalReport) -> str:
    lines = ["# Analysis Report", "", "## Executive Summary", "", report.summary, ""]
    linked = {e["insight_index"]: e for e in report.evidence if not e.get("unlinked")}
    lines.append("## Key Insights")
    for i, insight in enumerate(report.insights):
        ref = linked.get(i)
        suffix = f" _(evidence: {ref['node_ref']})_" if ref else ""
        lines.append(f"- {insight}{suffix}")
    for title, key in (
        ("Cross-Dataset Discoveries", "cross_dataset_discoveries"),
        ("Limitations", "limitations"),
        ("Next Steps", "next_steps"),
    ):
        lines.extend(["", f"## {title}"])
        lines.extend(f"- {item}" for item in getattr(report, key))
    lines.append("")
    return "\n".join(lines)


def verify_evidence(report: FinalReport, output_dir: Path, bundle_dir: Optional[Path] = None) -> list[str]:
    """Pure filesystem walk checking that every link resolves; returns problems."""
    problems = []
    for entry in report.evidence:
        if entry.get("unlinked"):
            continue
        node_ref = entry.get("node_ref", "")
        if not (output_dir / node_ref).is_dir():
            problems.append(f"dangling node_ref {node_ref!r}")
        locator = entry.get("locator", {})
        path = locator.get("path")
        if path:
            resolved = (output_dir / path) if (output_dir / path).exists() else None
            if resolved is None and bundle_dir is not None and (bundle_dir / path).exists():
                resolved = bundle_dir / path
            if resolved is None:
                problems.append(f"dangling locator path {path!r}")
    return problems
