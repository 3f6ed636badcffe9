import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crosslens.errors import BackendError, RetriesExhausted
from crosslens.gateway import (
    ChatRequest,
    Gateway,
    HashedTokenEmbedder,
    ScriptedBackend,
    extract_tagged,
    first_number,
)


class RecordingBackend:
    """Wraps a backend and records every request for prompt inspection."""

    def __init__(self, inner):
        self.inner = inner
        self.requests = []

    def complete(self, req):
        self.requests.append(req)
        return self.inner.complete(req)


def reference_extract(text: str, tag: str) -> list[str]:
    """Independent scanner: leftmost non-overlapping complete pairs."""
    open_t, close_t = f"<{tag}>", f"</{tag}>"
    out, i = [], 0
    while True:
        s = text.find(open_t, i)
        if s == -1:
            return out
        e = text.find(close_t, s + len(open_t))
        if e == -1:
            return out
        out.append(text[s + len(open_t): e])
        i = e + len(close_t)


class TestExtractTagged:
    def test_two_pairs(self):
        assert extract_tagged("<question>A?</question><question>B?</question>", "question") == ["A?", "B?"]

    def test_numeric_tag(self):
        assert extract_tagged("<relevance>7</relevance>", "relevance") == ["7"]

    def test_unclosed_tag(self):
        assert extract_tagged("<question>never closed", "question") == []

    def test_surrounding_prose(self):
        text = "Sure! Here you go:\n<comment>check seasonality</comment>\nHope that helps."
        assert extract_tagged(text, "comment") == ["check seasonality"]

    def test_multiline_content(self):
        assert extract_tagged("<summary>line1\nline2</summary>", "summary") == ["line1\nline2"]

    @given(st.text(alphabet="<>/abq? \n", max_size=200))
    def test_matches_reference_scanner(self, soup):
        assert extract_tagged(soup, "q") == reference_extract(soup, "q")

    @given(st.lists(st.text(alphabet="ab c?", max_size=20), max_size=5), st.text(alphabet="ab <>", max_size=20))
    def test_roundtrip_and_idempotence(self, contents, filler):
        text = filler.join(f"<q>{c}</q>" for c in contents if "</q>" not in c)
        expected = [c for c in contents if "</q>" not in c]
        assert extract_tagged(text, "q") == expected


def test_first_number_lenient():
    assert first_number("7/10") == 7
    assert first_number("score: 8.5 out of 10") == 8.5
    assert first_number("none here") is None


class TestScriptedBackend:
    def test_keyed_by_stage_tag_and_ordinal(self):
        backend = ScriptedBackend({"get_questions": ["first", "second"]})
        assert backend.complete(ChatRequest(prompt="x", stage_tag="get_questions")).text == "first"
        assert backend.complete(ChatRequest(prompt="y", stage_tag="get_questions")).text == "second"
        # last entry repeats once exhausted
        assert backend.complete(ChatRequest(prompt="z", stage_tag="get_questions")).text == "second"

    def test_unknown_stage_tag(self):
        with pytest.raises(BackendError):
            ScriptedBackend({}).complete(ChatRequest(prompt="x", stage_tag="nope"))

    def test_logprob_fixture_parses_back(self):
        fixture = {
            "judge": [
                {
                    "text": "<score>7</score>",
                    "token_logprobs": [
                        ["7", [["7", -0.1], ["8", -1.0], ["6", -2.0], ["9", -3.0], ["5", -4.0]]]
                    ],
                }
            ]
        }
        completion = ScriptedBackend(fixture).complete(ChatRequest(prompt="", stage_tag="judge"))
        assert completion.text == "<score>7</score>"
        token, alts = completion.token_logprobs[0]
        assert token == "7" and len(alts) == 5


class TestCompleteWithRetry:
    def _validator(self, text):
        return None if "ok" in text else "output must contain 'ok'"

    def test_invalid_then_valid(self):
        backend = RecordingBackend(ScriptedBackend({"s": ["bad answer", "ok answer"]}))
        completion = Gateway(backend=backend).complete_with_retry("do it", self._validator, stage_tag="s")
        assert completion.text == "ok answer"
        assert completion.attempts == 2
        retry_prompt = backend.requests[1].prompt
        # the three substituted blocks appear exactly once each
        assert retry_prompt.count("do it") == 1
        assert retry_prompt.count("bad answer") == 1
        assert retry_prompt.count("output must contain 'ok'") == 1

    def test_exhaustion_counts_attempts(self):
        backend = RecordingBackend(ScriptedBackend({"s": ["bad"]}))
        with pytest.raises(RetriesExhausted) as exc_info:
            Gateway(backend=backend).complete_with_retry("p", self._validator, max_retries=3, stage_tag="s")
        assert len(backend.requests) == 4  # 1 + max_retries
        assert exc_info.value.attempts == 4
        assert "ok" in str(exc_info.value.last_error)

    def test_valid_first_try_short_circuits(self):
        backend = RecordingBackend(ScriptedBackend({"s": ["ok right away"]}))
        completion = Gateway(backend=backend).complete_with_retry("p", self._validator, stage_tag="s")
        assert completion.attempts == 1
        assert len(backend.requests) == 1


class TestEmbedding:
    def test_identical_strings_identical_vectors(self):
        embedder = HashedTokenEmbedder()
        a, b = embedder.embed(["revenue grew", "revenue grew"])
        assert np.allclose(a.values, b.values)
        assert math.isclose(float(np.dot(a.values, b.values)), 1.0, abs_tol=1e-12)

    def test_shapes_and_order(self):
        vectors = HashedTokenEmbedder().embed(["a", "b"])
        assert len(vectors) == 2
        assert vectors[0].dimension == vectors[1].dimension

    def test_nonempty_has_positive_norm(self):
        (vec,) = HashedTokenEmbedder().embed(["hello world"])
        assert np.linalg.norm(vec.values) > 0

    def test_gateway_falls_back_to_hashed_embedder(self):
        class ChatOnly:
            def complete(self, req):
                raise AssertionError("not used")

        vectors = Gateway(backend=ChatOnly()).embed(["x"])
        assert vectors[0].dimension == HashedTokenEmbedder.dimension
