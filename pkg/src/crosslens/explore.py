"""Per-source exploration: an outer loop that decomposes the goal into
questions and an inner generate-execute-observe-retry loop per question."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .bundle import RunConfig
from .errors import RetriesExhausted
from .executor import DEFAULT_LIMITS, ExecutionArtifacts, ExecutionRequest
from .gateway import Gateway, extract_tagged, first_number
from .profiler import SourceProfile
from .prompts import (
    FOLLOW_UP_TEMPLATE,
    GENERATE_CODE_SINGLE_TEMPLATE,
    GET_QUESTIONS_TEMPLATE,
    NODE_INSIGHT_TEMPLATE,
    RETRY_TEMPLATE,
    SELECT_A_QUESTION_TEMPLATE,
    SOURCE_SUMMARY_TEMPLATE,
)

logger = logging.getLogger(__name__)

FUNCTION_DOCS = """insight.tools.setup(): configure plot fonts; call before plotting.
insight.tools.fix_fnames(): canonicalize output file names; call at the very end.
insight.tools.safe_datetime_parse(values): robust datetime parsing, never raises.
insight.tools.safe_numeric_convert(values): robust numeric conversion, never raises."""

_CODE_FENCE_RE = re.compile(r"```(?:python)?\s*\n(.*?)```", re.DOTALL)


@dataclass
class Question:
    text: str
    origin: str = "seed"  # seed | followup | cross
    parent: Optional[str] = None  # node id


@dataclass
class Observation:
    status: str  # ok | error | timeout
    stdout: str = ""
    artifacts_dir: str = ""
    stat: Optional[dict] = None
    error_text: Optional[str] = None


@dataclass
class ExplorationNode:
    node_id: str
    question: Question
    script: str = ""
    attempts: int = 0
    observation: Optional[Observation] = None
    insight_text: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.observation is not None and self.observation.status == "ok"

    def answer_text(self) -> str:
        """The answer payload fed to follow-up prompts: stat description + value."""
        if not self.ok or not self.observation.stat:
            return ""
        stat = self.observation.stat
        return f"{stat.get('description', '')} {stat.get('value', '')}".strip()

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "question": vars(self.question),
            "script": self.script,
            "attempts": self.attempts,
            "observation": vars(self.observation) if self.observation else None,
            "insight_text": self.insight_text,
        }


@dataclass
class ExplorationResult:
    source_name: str
    nodes: list[ExplorationNode] = field(default_factory=list)
    summary: str = ""


def valid_single_question(text: str) -> bool:
    stripped = text.strip()
    return stripped.count("?") == 1 and stripped.endswith("?")


def _parse_questions(text: str) -> tuple[Optional[str], list[str]]:
    """Returns (error, questions); error is set when any parsed question breaks
    the single-terminal-'?' rule."""
    parsed = [q.strip() for q in extract_tagged(text, "question")]
    for q in parsed:
        if not valid_single_question(q):
            return f"question {q!r} must end with exactly one '?'", parsed
    return None, parsed


def generate_questions(context: str, goal: str, schema: str, max_q: int, gateway: Gateway) -> list[Question]:
    prompt = GET_QUESTIONS_TEMPLATE.format(
        context=context or "", goal=goal, schema=schema, max_questions=max_q
    )

    def validator(text: str) -> Optional[str]:
        error, parsed = _parse_questions(text)
        if error:
            return error
        if not parsed:
            return "no <question> tags found"
        return None

    completion = gateway.complete_with_retry(prompt, validator, stage_tag="get_questions")
    _, parsed = _parse_questions(completion.text)
    return [Question(text=q, origin="seed") for q in parsed[:max_q]]


def generate_analysis_code(
    goal: str, question: str, schema: str, data_path: str, gateway: Gateway, prompt: Optional[str] = None
) -> tuple[str, str]:
    """Returns (script, prompt). The prompt is kept for inner-loop retry turns."""
    if prompt is None:
        prompt = GENERATE_CODE_SINGLE_TEMPLATE.format(
            goal=goal,
            question=question,
            schema=schema,
            database_path=data_path,
            function_docs=FUNCTION_DOCS,
        )

    def validator(text: str) -> Optional[str]:
        if not _CODE_FENCE_RE.search(text):
            return "response contains no fenced ```python code block"
        return None

    completion = gateway.complete_with_retry(prompt, validator, stage_tag="generate_code")
    return _CODE_FENCE_RE.search(completion.text).group(1), prompt


def run_inner_loop(
    node: ExplorationNode,
    node_dir: Path,
    data_paths: list[str],
    codegen_prompt: str,
    executor,
    gateway: Gateway,
    max_code_retries: int,
    enable_retry: bool = True,
    trace: Optional[Callable[[dict], None]] = None,
) -> ExplorationNode:
    """Execute the node's script, regenerating it on failure until an ok
    observation or retry exhaustion. Failures stay local to this node."""
    max_attempts = 1 + max_code_retries if enable_retry else 1
    script = node.script
    result: Optional[ExecutionArtifacts] = None
    attempt_dir = node_dir
    for attempt in range(1, max_attempts + 1):
        node.attempts = attempt
        attempt_dir = node_dir / f"attempt{attempt}"
        attempt_dir.mkdir(parents=True, exist_ok=True)
        (attempt_dir / "script.py").write_text(script, encoding="utf-8")
        result = executor.execute(
            ExecutionRequest(
                script=script,
                data_paths=list(data_paths),
                workdir=str(attempt_dir),
                limits=dict(DEFAULT_LIMITS),
            )
        )
        with open(attempt_dir / "result.json", "w", encoding="utf-8") as fh:
            json.dump(
                {"status": result.status, "stdout": result.stdout[-4000:], "stderr": result.stderr[-4000:]},
                fh,
            )
        if trace is not None:
            trace({"type": "execution", "node": node.node_id, "attempt": attempt, "status": result.status})
        if result.status == "ok":
            break
        if attempt == max_attempts:
            break
        error_text = result.stderr or result.status
        retry_prompt = RETRY_TEMPLATE.format(
            initial_prompt=codegen_prompt,
            prev_output=f"```python\n{script}```",
            error=error_text,
        )
        try:
            script, _ = generate_analysis_code("", "", "", "", gateway, prompt=retry_prompt)
        except RetriesExhausted:
            logger.warning("code regeneration exhausted for node %s", node.node_id)
            break
    node.script = script
    node.observation = Observation(
        status=result.status,
        stdout=result.stdout,
        artifacts_dir=str(attempt_dir),
        stat=result.stat_json,
        error_text=result.stderr if result.status != "ok" else None,
    )
    return node


def generate_followups(
    context: str,
    goal: str,
    schema: str,
    answered: tuple[str, str],
    max_q: int,
    gateway: Gateway,
) -> list[Question]:
    question, answer = answered
    prompt = FOLLOW_UP_TEMPLATE.format(
        context=context or "", goal=goal, schema=schema, question=question,
        answer=answer, max_questions=max_q,
    )

    def validator(text: str) -> Optional[str]:
        error, parsed = _parse_questions(text)
        if error:
            return error
        if not parsed:
            return "no <question> tags found"
        return None

    try:
        completion = gateway.complete_with_retry(prompt, validator, stage_tag="followup")
    except RetriesExhausted:
        return []  # round ends early, graceful degradation
    _, parsed = _parse_questions(completion.text)
    deduped = [q for q in parsed if q.strip() != question.strip()]
    return [Question(text=q, origin="followup") for q in deduped[:max_q]]


def select_question(prev_questions: list[str], followups: list[Question], gateway: Gateway,
                    context: str = "", goal: str = "") -> int:
    prompt = SELECT_A_QUESTION_TEMPLATE.format(
        context=context or "",
        goal=goal,
        prev_questions_formatted="\n".join(f"{i}: {q}" for i, q in enumerate(prev_questions)),
        followup_questions_formatted="\n".join(f"{i}: {q.text}" for i, q in enumerate(followups)),
    )

    def validator(text: str) -> Optional[str]:
        ids = extract_tagged(text, "question_id")
        if not ids:
            return "missing <question_id> tag"
        value = first_number(ids[0])
        if value is None or int(value) != value:
            return f"question id {ids[0]!r} is not an integer"
        if not 0 <= int(value) < len(followups):
            return f"question id {int(value)} out of range 0-{len(followups) - 1}"
        return None

    completion = gateway.complete_with_retry(prompt, validator, stage_tag="select_question")
    return int(first_number(extract_tagged(completion.text, "question_id")[0]))


def synthesize_node_insight(goal: str, node: ExplorationNode, gateway: Gateway) -> Optional[str]:
    if not node.ok:
        return None
    observation = json.dumps(node.observation.stat or {}, ensure_ascii=False)
    prompt = NODE_INSIGHT_TEMPLATE.format(goal=goal, question=node.question.text, observation=observation)
    try:
        completion = gateway.complete_with_retry(
            prompt,
            validator=lambda t: None if extract_tagged(t, "insight") else "missing <insight> tag",
            stage_tag="node_insight",
        )
    except RetriesExhausted:
        return node.answer_text() or None
    return extract_tagged(completion.text, "insight")[0].strip()


def explore_source(
    profile: SourceProfile,
    data_path: str,
    goal: str,
    context: str,
    config: RunConfig,
    gateway: Gateway,
    executor,
    out_dir: Path,
    trace: Optional[Callable[[dict], None]] = None,
) -> ExplorationResult:
    """Run the full outer loop for one source and persist node directories."""
    schema = profile.schema_text()
    result = ExplorationResult(source_name=profile.source_name)
    counter = 0

    def explore_one(question: Question) -> ExplorationNode:
        nonlocal counter
        counter += 1
        node = ExplorationNode(node_id=f"q{counter}", question=question)
        node_dir = out_dir / node.node_id
        node_dir.mkdir(parents=True, exist_ok=True)
        try:
            script, prompt = generate_analysis_code(goal, question.text, schema, data_path, gateway)
            node.script = script
            run_inner_loop(
                node, node_dir, [data_path], prompt, executor, gateway,
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
        result.nodes.append(node)
        if trace is not None:
            trace(
                {
                    "type": "node_explored",
                    "source": profile.source_name,
                    "node": node.node_id,
                    "origin": question.origin,
                    "status": node.observation.status if node.observation else "none",
                    "attempts": node.attempts,
                }
            )
        return node

    try:
        seeds = generate_questions(context, goal, schema, config.questions_per_round, gateway)
    except RetriesExhausted as exc:
        logger.warning("question generation failed for %s: %s", profile.source_name, exc)
        result.summary = f"Exploration failed: could not generate questions ({exc})."
        return result

    frontier = [explore_one(q) for q in seeds]
    prev_questions = [n.question.text for n in frontier]

    for _ in range(2, config.rounds + 1):
        next_frontier = []
        for node in frontier:
            if not node.ok:
                continue  # failed nodes never block siblings; they just stop branching
            followups = generate_followups(
                context, goal, schema, (node.question.text, node.answer_text()),
                config.questions_per_round, gateway,
            )
            if not followups:
                continue
            try:
                idx = select_question(prev_questions, followups, gateway, context=context, goal=goal)
            except RetriesExhausted:
                idx = 0
            chosen = followups[idx]
            chosen.parent = node.node_id
            child = explore_one(chosen)
            prev_questions.append(chosen.text)
            next_frontier.append(child)
        frontier = next_frontier
        if not frontier:
            break

    insights = [n.insight_text for n in result.nodes if n.insight_text]
    if insights:
        prompt = SOURCE_SUMMARY_TEMPLATE.format(
            goal=goal, source_name=profile.source_name, findings="\n".join(f"- {i}" for i in insights)
        )
        try:
            completion = gateway.complete_with_retry(
                prompt,
                validator=lambda t: None if extract_tagged(t, "summary") else "missing <summary> tag",
                stage_tag="source_summary",
            )
            result.summary = extract_tagged(completion.text, "summary")[0].strip()
        except RetriesExhausted:
            result.summary = " ".join(insights)
    else:
        result.summary = "Exploration completed without any successful analysis for this source."

    with open(out_dir / "exploration.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "source_name": result.source_name,
                "summary": result.summary,
                "nodes": [n.to_dict() for n in result.nodes],
            },
            fh,
            ensure_ascii=False,
            indent=2,
        )
    return result
