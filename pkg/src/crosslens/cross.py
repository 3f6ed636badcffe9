"""Cross-source question generation, peer annotations, and checklist execution."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .bundle import RunConfig
from .errors import RetriesExhausted
from .explore import (
    FUNCTION_DOCS,
    ExplorationNode,
    ExplorationResult,
    Observation,
    Question,
    _CODE_FENCE_RE,
    _parse_questions,
    run_inner_loop,
    synthesize_node_insight,
)
from .gateway import Gateway, extract_tagged
from .priority import SourceLabel
from .profiler import SourceProfile
from .prompts import ANNOTATION_PROMPT_TEMPLATE, CROSS_CODE_TEMPLATE, CROSS_QUESTION_PROMPT

logger = logging.getLogger(__name__)


@dataclass
class CrossQuestion:
    text: str
    source_a: str
    source_b: str
    rationale: Optional[str] = None


@dataclass
class Annotation:
    annotator: str
    target: str
    comment: str


@dataclass
class ChecklistItem:
    question: CrossQuestion
    status: str = "pending"  # pending | done | failed
    node_id: Optional[str] = None


@dataclass
class Checklist:
    items: list[ChecklistItem] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "items": [
                {
                    "question": vars(item.question),
                    "status": item.status,
                    "node_id": item.node_id,
                }
                for item in self.items
            ]
        }


def _mentions(text: str, profile: SourceProfile) -> bool:
    lowered = text.lower()
    if profile.source_name.lower() in lowered:
        return True
    return any(kw in lowered for kw in profile.schema_keywords)


def generate_cross_questions(
    my_profile: SourceProfile,
    other_profile: SourceProfile,
    my_summary: str,
    other_summary: str,
    my_label: SourceLabel,
    gateway: Gateway,
) -> list[CrossQuestion]:
    """Exactly 3 questions for a Primary source, exactly 1 for a Secondary."""
    quota = my_label.cross_quota
    prompt = CROSS_QUESTION_PROMPT.format(
        my_summary=my_summary, other_summary=other_summary, my_label=my_label.label
    )

    def validator(text: str) -> Optional[str]:
        parsed = [q.strip() for q in extract_tagged(text, "question")]
        if len(parsed) != quota:
            return f"expected exactly {quota} <question> tags for a {my_label.label} source, got {len(parsed)}"
        for q in parsed:
            if not (_mentions(q, my_profile) and _mentions(q, other_profile)):
                return (
                    f"question {q!r} must reference both datasets "
                    f"({my_profile.source_name} and {other_profile.source_name})"
                )
        return None

    completion = gateway.complete_with_retry(prompt, validator, stage_tag="cross_question")
    questions = []
    for q in extract_tagged(completion.text, "question"):
        text = q.strip()
        rationale = None
        if "(Rationale:" in text:
            text, _, tail = text.partition("(Rationale:")
            rationale = tail.rstrip(")").strip()
            text = text.strip()
        questions.append(
            CrossQuestion(
                text=text,
                source_a=my_profile.source_name,
                source_b=other_profile.source_name,
                rationale=rationale,
            )
        )
    return questions


def annotate_peer(
    annotator_profile: SourceProfile,
    annotator_knowledge: str,
    target_profile: SourceProfile,
    target_result: ExplorationResult,
    gateway: Gateway,
) -> Optional[Annotation]:
    """One peer-review pass; a "no comment" response yields no annotation."""
    insights = "\n".join(f"- {n.insight_text}" for n in target_result.nodes if n.insight_text)
    prompt = ANNOTATION_PROMPT_TEMPLATE.format(
        annotator_name=annotator_profile.source_name,
        annotator_knowledge=annotator_knowledge,
        annotator_schema=annotator_profile.schema_text(),
        target_agent_name=target_profile.source_name,
        target_insight=insights or "(no insights)",
        target_summary=target_result.summary,
    )

    def validator(text: str) -> Optional[str]:
        if extract_tagged(text, "comment"):
            return None
        if _is_no_comment(text):
            return None
        return "missing <comment> tag"

    completion = gateway.complete_with_retry(prompt, validator, stage_tag="annotation")
    if _is_no_comment(completion.text):
        return None
    comment = extract_tagged(completion.text, "comment")[0].strip()
    if _is_no_comment(comment):
        return None
    return Annotation(
        annotator=annotator_profile.source_name,
        target=target_profile.source_name,
        comment=comment,
    )


def _is_no_comment(text: str) -> bool:
    return text.strip().strip(".!").lower() == "no comment"


def run_cross_analysis(
    question: CrossQuestion,
    goal: str,
    profiles: dict[str, SourceProfile],
    data_paths: dict[str, str],
    node_id: str,
    out_dir: Path,
    gateway: Gateway,
    executor,
    config: RunConfig,
    trace: Optional[Callable[[dict], None]] = None,
) -> ExplorationNode:
    """Execute one checklist item with a two-source code-generation prompt;
    inner-loop retry semantics match single-source exploration."""
    profile_a = profiles[question.source_a]
    profile_b = profiles[question.source_b]
    path_a = data_paths[question.source_a]
    path_b = data_paths[question.source_b]
    prompt = CROSS_CODE_TEMPLATE.format(
        goal=goal,
        question=question.text,
        schema_a=profile_a.schema_text(),
        schema_b=profile_b.schema_text(),
        path_a=path_a,
        path_b=path_b,
        function_docs=FUNCTION_DOCS,
    )
    node = ExplorationNode(
        node_id=node_id,
        question=Question(text=question.text, origin="cross"),
    )
    node_dir = out_dir / node_id
    node_dir.mkdir(parents=True, exist_ok=True)
    try:
        completion = gateway.complete_with_retry(
            prompt,
            validator=lambda t: None if _CODE_FENCE_RE.search(t) else "response contains no fenced ```python code block",
            stage_tag="generate_code",
        )
        node.script = _CODE_FENCE_RE.search(completion.text).group(1)
        run_inner_loop(
            node, node_dir, [path_a, path_b], prompt, executor, gateway,
            max_code_retries=config.max_code_retries,
            enable_retry=config.enable_rereact_inner,
            trace=trace,
        )
    except RetriesExhausted as exc:
        node.observation = Observation(status="error", error_text=str(exc))
    node.insight_text = synthesize_node_insight(goal, node, gateway)
    (node_dir / "script.py").write_text(node.script, encoding="utf-8")
    with open(node_dir / "node.json", "w", encoding="utf-8") as fh:
        json.dump(node.to_dict(), fh, ensure_ascii=False, indent=2)
    return node


def checklist_size(labels: dict[str, SourceLabel]) -> int:
    """Expected checklist size from labels alone: each source asks its quota
    toward every other source."""
    n = len(labels)
    return sum(label.cross_quota * (n - 1) for label in labels.values())


def run_cross_stage(
    goal: str,
    profiles: dict[str, SourceProfile],
    results: dict[str, ExplorationResult],
    labels: dict[str, SourceLabel],
    rank_order: list[str],
    data_paths: dict[str, str],
    cross_dir: Path,
    gateway: Gateway,
    executor,
    config: RunConfig,
    trace: Optional[Callable[[dict], None]] = None,
) -> tuple[Checklist, list[Annotation], list[ExplorationNode]]:
    """Stage 4: question generation per ordered pair, peer annotations, then
    checklist execution. Pair order follows the priority ranking."""
    checklist = Checklist()
    pairs = [
        (a, b)
        for a in rank_order
        for b in rank_order
        if a != b
    ]
    if config.max_cross_pairs is not None:
        pairs = pairs[: config.max_cross_pairs]
    for a, b in pairs:
        try:
            questions = generate_cross_questions(
                profiles[a], profiles[b], results[a].summary, results[b].summary,
                labels[a], gateway,
            )
        except RetriesExhausted as exc:
            logger.warning("cross-question generation failed for (%s, %s): %s", a, b, exc)
            continue
        for q in questions:
            checklist.items.append(ChecklistItem(question=q))
        if trace is not None:
            trace({"type": "cross_questions", "source_a": a, "source_b": b, "count": len(questions)})

    annotations: list[Annotation] = []
    for a, b in pairs:
        try:
            annotation = annotate_peer(
                profiles[a], results[a].summary, profiles[b], results[b], gateway
            )
        except RetriesExhausted:
            annotation = None
        if annotation is not None:
            annotations.append(annotation)
        if trace is not None:
            trace({"type": "annotation", "annotator": a, "target": b, "stored": annotation is not None})

    nodes: list[ExplorationNode] = []
    for i, item in enumerate(checklist.items, start=1):
        node_id = f"q{i}"
        node = run_cross_analysis(
            item.question, goal, profiles, data_paths, node_id, cross_dir,
            gateway, executor, config, trace=trace,
        )
        item.node_id = node_id
        item.status = "done" if node.ok else "failed"
        nodes.append(node)
        if trace is not None:
            trace({"type": "cross_item", "node": node_id, "status": item.status})

    with open(cross_dir / "checklist.json", "w", encoding="utf-8") as fh:
        json.dump(checklist.to_dict(), fh, ensure_ascii=False, indent=2)
    with open(cross_dir / "annotations.json", "w", encoding="utf-8") as fh:
        json.dump([vars(a) for a in annotations], fh, ensure_ascii=False, indent=2)
    return checklist, annotations, nodes
