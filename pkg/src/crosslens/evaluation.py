"""Four-dimension report scoring: deterministic numerical consistency,
embedding-based completeness, and judged factuality / logic / insightfulness.

Weights: total = 0.30*factuality + 0.25*completeness + 0.20*logic +
0.25*insightfulness, with factuality itself an even split between the
deterministic number match and the judge score.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyGroundTruth, OutOfRangeComponent
from .gateway import ChatRequest, Gateway, extract_tagged, first_number
from .prompts import JUDGE_FACTUALITY_PROMPT, JUDGE_INSIGHT_PROMPT, JUDGE_LOGIC_PROMPT
from .report import FinalReport

TOTAL_WEIGHTS = {"factuality": 0.30, "completeness": 0.25, "logic": 0.20, "insightfulness": 0.25}

MATCH_REL_TOL = 1e-6

MAGNITUDES = {
    "k": 1e3,
    "K": 1e3,
    "M": 1e6,
    "B": 1e9,
    "bn": 1e9,
    "thousand": 1e3,
    "million": 1e6,
    "billion": 1e9,
}

_NUMBER_RE = re.compile(
    r"(?P<cur>[$€£¥])?"
    r"(?P<num>-?\d{1,3}(?:,\d{3})+(?:\.\d+)?|-?\d+(?:\.\d+)?)"
    r"(?P<mag>[kKMB]\b|bn\b|\s?(?:thousand|million|billion)\b)?"
    r"\s?(?P<pct>%|percent\b)?"
)


@dataclass(frozen=True)
class NumberEntry:
    value: float
    unit: Optional[str] = None
    is_percent: bool = False


def extract_numbers(text: str) -> list[NumberEntry]:
    """Deterministic numeric-entity extraction.

    Handles thousands separators, decimals, % / "percent" suffixes, currency
    prefixes, and k/M/B (or thousand/million/billion) magnitude suffixes.
    """
    entries: list[NumberEntry] = []
    seen = set()
    for m in _NUMBER_RE.finditer(text):
        raw = m.group("num")
        if not raw:
            continue
        value = float(raw.replace(",", ""))
        if not math.isfinite(value):
            continue
        mag = m.group("mag")
        if mag:
            value *= MAGNITUDES[mag.strip()]
        entry = NumberEntry(
            value=value,
            unit=m.group("cur"),
            is_percent=bool(m.group("pct")),
        )
        key = (repr(entry.value), entry.unit, entry.is_percent)
        if key not in seen:
            seen.add(key)
            entries.append(entry)
    return entries


def numbers_match(a: NumberEntry, b: NumberEntry) -> bool:
    """Percent matches only percent; units compared only when both sides carry one."""
    if a.is_percent != b.is_percent:
        return False
    if a.unit is not None and b.unit is not None and a.unit != b.unit:
        return False
    tol = MATCH_REL_TOL * max(abs(a.value), abs(b.value), 1.0)
    return abs(a.value - b.value) <= tol


def numerical_consistency(pred: Sequence[NumberEntry], gt: Sequence[NumberEntry]) -> float:
    """Fraction of ground-truth numbers matched by some predicted number.

    An empty ground-truth set scores 1.0: a prediction cannot be numerically
    inconsistent with a numberless ground truth.
    """
    if not gt:
        return 1.0
    matched = sum(1 for g in gt if any(numbers_match(p, g) for p in pred))
    return matched / len(gt)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def completeness(pred_insights: Sequence[str], gt_insights: Sequence[str], gateway: Gateway) -> float:
    """Mean over ground-truth insights of the best cosine similarity against
    any predicted insight; negative cosines clamp to 0."""
    if not gt_insights:
        raise EmptyGroundTruth("ground-truth insight list is empty")
    if not pred_insights:
        return 0.0
    gt_vectors = gateway.embed(list(gt_insights))
    pred_vectors = gateway.embed(list(pred_insights))
    total = 0.0
    for g in gt_vectors:
        best = max(cosine(g.values, p.values) for p in pred_vectors)
        total += max(best, 0.0)
    return total / len(gt_vectors)


def _score_validator(text: str) -> Optional[str]:
    scores = extract_tagged(text, "score")
    if not scores:
        return "missing <score> tag"
    value = first_number(scores[0])
    if value is None or not 1 <= value <= 10:
        return f"score {scores[0]!r} not in 1-10"
    return None


def llm_dimension(kind: str, report_text: str, ground_truth_text: str, gateway: Gateway) -> int:
    template = {"factuality": JUDGE_FACTUALITY_PROMPT, "logic": JUDGE_LOGIC_PROMPT}[kind]
    prompt = template.format(ground_truth=ground_truth_text, report=report_text)
    completion = gateway.complete_with_retry(prompt, _score_validator, stage_tag=f"judge_{kind}")
    return int(first_number(extract_tagged(completion.text, "score")[0]))


def _expected_score_from_logprobs(token_logprobs: list) -> Optional[float]:
    """Probability-weighted score over the numeric candidates at the score
    token position; None when no numeric token is found."""
    for token, alternatives in token_logprobs:
        if re.fullmatch(r"(?:10|[1-9])", str(token).strip()):
            candidates = {}
            for alt_token, logprob in alternatives or []:
                alt = str(alt_token).strip()
                if re.fullmatch(r"(?:10|[1-9])", alt):
                    candidates[int(alt)] = math.exp(logprob)
            if not candidates:
                return None
            mass = sum(candidates.values())
            return sum(score * p for score, p in candidates.items()) / mass
    return None


def insightfulness(report_text: str, gateway: Gateway, trace=None) -> float:
    """Probability-weighted judge score in [0, 1]; falls back to the plain
    parsed score when the backend exposes no log-probabilities."""
    prompt = JUDGE_INSIGHT_PROMPT.format(report=report_text)
    completion = gateway.complete_with_retry(
        prompt, _score_validator, stage_tag="judge_insightfulness", want_logprobs=True
    )
    if completion.token_logprobs:
        expected = _expected_score_from_logprobs(completion.token_logprobs)
        if expected is not None:
            return expected / 10.0
    if trace is not None:
        trace({"type": "insightfulness_fallback", "reason": "no usable log-probabilities"})
    return int(first_number(extract_tagged(completion.text, "score")[0])) / 10.0


@dataclass
class EvalScores:
    s_factu_num: float
    s_factu_llm: int
    s_factu: float
    s_comp: float
    s_logic: float
    s_ins: float
    s_total: float

    def to_dict(self) -> dict:
        return vars(self)


def total_score(s_factu: float, s_comp: float, s_logic: float, s_ins: float) -> float:
    for name, value in (("factuality", s_factu), ("completeness", s_comp),
                        ("logic", s_logic), ("insightfulness", s_ins)):
        if not 0.0 <= value <= 1.0:
            raise OutOfRangeComponent(f"{name}={value} outside [0, 1]")
    w = TOTAL_WEIGHTS
    return (
        w["factuality"] * s_factu
        + w["completeness"] * s_comp
        + w["logic"] * s_logic
        + w["insightfulness"] * s_ins
    )


def evaluate_report(report: FinalReport, ground_truth: dict, gateway: Gateway, trace=None) -> EvalScores:
    """Score a report against ground truth {summary, insights:[...]}."""
    gt_insights = list(ground_truth.get("insights", []))
    if not gt_insights:
        raise EmptyGroundTruth("ground truth has no insights")
    pred_insights = list(report.insights) + list(report.cross_dataset_discoveries)
    pred_text = " ".join([report.summary] + pred_insights)
    gt_text = " ".join(gt_insights)

    s_factu_num = numerical_consistency(extract_numbers(pred_text), extract_numbers(gt_text))
    report_text = report.summary + "\n" + "\n".join(f"- {i}" for i in pred_insights)
    s_factu_llm = llm_dimension("factuality", report_text, gt_text, gateway)
    s_factu = 0.5 * s_factu_num + 0.5 * (s_factu_llm / 10.0)
    s_comp = completeness(pred_insights, gt_insights, gateway)
    s_logic = llm_dimension("logic", report_text, gt_text, gateway) / 10.0
    s_ins = insightfulness(report_text, gateway, trace=trace)
    return EvalScores(
        s_factu_num=s_factu_num,
        s_factu_llm=s_factu_llm,
        s_factu=s_factu,
        s_comp=s_comp,
        s_logic=s_logic,
        s_ins=s_ins,
        s_total=total_score(s_factu, s_comp, s_logic, s_ins),
    )
