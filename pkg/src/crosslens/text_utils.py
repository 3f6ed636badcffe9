"""Small deterministic text helpers shared by profiling and scoring."""

from __future__ import annotations

import re
from collections import Counter

STOP_WORDS = frozenset(
    """a an and are as at be but by for from has have in is it its of on or that the
    this to was were will with what which who whom how when where why not no do does
    did their there then than them they we you your our us i me my he she his her""".split()
)

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str, drop_stop_words: bool = True) -> list[str]:
    """Lower-case alphanumeric tokens, optionally stop-word filtered. No stemming."""
    tokens = _TOKEN_RE.findall(text.lower())
    if drop_stop_words:
        tokens = [t for t in tokens if t not in STOP_WORDS]
    return tokens


def keyword_set(text: str) -> set[str]:
    return set(tokenize(text))


def top_tokens(text: str, k: int = 20) -> set[str]:
    """The k most frequent content tokens; ties broken alphabetically."""
    counts = Counter(tokenize(text))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return {token for token, _ in ranked[:k]}
