"""Hybrid priority scoring and Primary/Secondary source labeling.

Combines an objective richness score computed from profile statistics, a
keyword-overlap semantic score, and a model-judged relevance score into one
priority value per source, then ranks sources deterministically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import EmptyGoalKeywords, OutOfRangeInput
from .gateway import Gateway, extract_tagged, first_number
from .profiler import SourceProfile
from .prompts import FORMAL_ANNOTATION_PROMPT, PRELIMINARY_EVAL_PROMPT

OBJECTIVE_WEIGHTS = (0.4, 0.4, 0.2)  # quality, richness, temporal
PRIORITY_WEIGHTS = (0.4, 0.3, 0.3)  # objective, semantic, model-judged

# richness saturation points: 20 columns wide, 10^5 rows deep
RICHNESS_COL_CAP = 20
RICHNESS_LOG_ROW_CAP = 5.0

CROSS_QUOTA = {"Primary": 3, "Secondary": 1}


@dataclass
class PreliminaryEval:
    relevance: int  # 1-10
    reasoning: str
    priority: str  # High | Medium | Low


@dataclass
class ObjectiveScore:
    s_quality: float
    s_richness: float
    s_temp: float
    s_obj: float


@dataclass
class PriorityScore:
    source_name: str
    s_obj: float
    s_sem: float
    s_llm: float
    s_priority: float

    def to_dict(self) -> dict:
        return vars(self)


@dataclass
class SourceLabel:
    richness: int
    alignment: int
    label: str  # Primary | Secondary
    justification: str

    @property
    def cross_quota(self) -> int:
        return CROSS_QUOTA[self.label]


def _clamp(value: float, lo: float = 0.0, hi: float = 10.0) -> float:
    return max(lo, min(hi, value))


def objective_score(profile: SourceProfile) -> ObjectiveScore:
    """Score intrinsic information density from profile statistics alone."""
    s_quality = 10.0 * (1.0 - profile.overall_missing_rate)
    if profile.row_count > 0 and profile.columns:
        mean_unique = sum(c.unique_ratio for c in profile.columns) / len(profile.columns)
        width = min(profile.column_count / RICHNESS_COL_CAP, 1.0)
        depth = min(math.log10(max(profile.row_count, 1)) / RICHNESS_LOG_ROW_CAP, 1.0)
        s_richness = _clamp(10.0 * (0.4 * width + 0.4 * depth + 0.2 * mean_unique))
    else:
        s_richness = 0.0  # degenerate profiles score zero, they are not errors
    s_temp = 10.0 if profile.has_temporal else 0.0
    wq, wr, wt = OBJECTIVE_WEIGHTS
    s_obj = _clamp(wq * s_quality + wr * s_richness + wt * s_temp)
    return ObjectiveScore(
        s_quality=_clamp(s_quality), s_richness=s_richness, s_temp=s_temp, s_obj=s_obj
    )


def semantic_score(goal_keywords: set[str], schema_keywords: set[str], lambda_sem: float = 15.0) -> float:
    """Capped, scaled goal-keyword coverage of the schema keyword set."""
    if not goal_keywords:
        raise EmptyGoalKeywords("goal keyword set is empty")
    overlap = len(goal_keywords & schema_keywords)
    return min(lambda_sem * overlap / len(goal_keywords), 10.0)


def priority_score(obj: ObjectiveScore, s_sem: float, s_llm: float, source_name: str = "") -> PriorityScore:
    for value, name in ((obj.s_obj, "s_obj"), (s_sem, "s_sem"), (s_llm, "s_llm")):
        if not 0.0 <= value <= 10.0:
            raise OutOfRangeInput(f"{name}={value} outside [0, 10]")
    wo, ws, wl = PRIORITY_WEIGHTS
    return PriorityScore(
        source_name=source_name,
        s_obj=obj.s_obj,
        s_sem=s_sem,
        s_llm=s_llm,
        s_priority=wo * obj.s_obj + ws * s_sem + wl * s_llm,
    )


def preliminary_relevance(profile: SourceProfile, goal: str, gateway: Gateway) -> PreliminaryEval:
    """Stage-1 quick relevance judgment from schema and stats only."""
    prompt = PRELIMINARY_EVAL_PROMPT.format(global_goal=goal, data_profile=profile.schema_text())

    def validator(text: str) -> Optional[str]:
        relevance = extract_tagged(text, "relevance")
        if not relevance:
            return "missing <relevance> tag"
        value = first_number(relevance[0])
        if value is None or not 1 <= value <= 10:
            return f"relevance {relevance[0]!r} not in 1-10"
        if not extract_tagged(text, "reasoning"):
            return "missing <reasoning> tag"
        priority = extract_tagged(text, "priority")
        if not priority:
            return "missing <priority> tag"
        if priority[0].strip().capitalize() not in ("High", "Medium", "Low"):
            return f"priority {priority[0]!r} not High/Medium/Low"
        return None

    text = gateway.complete_with_retry(prompt, validator, stage_tag="preliminary_eval").text
    return PreliminaryEval(
        relevance=int(first_number(extract_tagged(text, "relevance")[0])),
        reasoning=extract_tagged(text, "reasoning")[0].strip(),
        priority=extract_tagged(text, "priority")[0].strip().capitalize(),
    )


def key_source_identification(
    profile: SourceProfile, exploration_summary: str, goal: str, gateway: Gateway
) -> SourceLabel:
    """Stage-3 final Primary/Secondary assessment after deep exploration."""
    prompt = FORMAL_ANNOTATION_PROMPT.format(
        global_goal=goal, schema=profile.schema_text(), exploration_summary=exploration_summary
    )

    def validator(text: str) -> Optional[str]:
        for tag in ("richness", "alignment"):
            values = extract_tagged(text, tag)
            if not values:
                return f"missing <{tag}> tag"
            value = first_number(values[0])
            if value is None or not 1 <= value <= 10:
                return f"{tag} {values[0]!r} not in 1-10"
        labels = extract_tagged(text, "label")
        if not labels:
            return "missing <label> tag"
        if labels[0].strip().capitalize() not in ("Primary", "Secondary"):
            return f"label {labels[0]!r} not Primary/Secondary"
        if not extract_tagged(text, "justification"):
            return "missing <justification> tag"
        return None

    text = gateway.complete_with_retry(prompt, validator, stage_tag="key_id").text
    return SourceLabel(
        richness=int(first_number(extract_tagged(text, "richness")[0])),
        alignment=int(first_number(extract_tagged(text, "alignment")[0])),
        label=extract_tagged(text, "label")[0].strip().capitalize(),
        justification=extract_tagged(text, "justification")[0].strip(),
    )


def rank_sources(scores: list[PriorityScore]) -> list[PriorityScore]:
    """Descending by priority, ties broken lexicographically by source name."""
    return sorted(scores, key=lambda s: (-s.s_priority, s.source_name))
