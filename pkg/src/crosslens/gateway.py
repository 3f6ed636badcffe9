"""Single choke point for chat, vision, and embedding calls.

All model interaction goes through :class:`Gateway`, which logs request and
response pairs to the run trace and implements the validate-and-retry protocol.
A fully deterministic :class:`ScriptedBackend` (keyed by stage tag + ordinal)
and a hashed bag-of-tokens embedder keep the whole pipeline testable offline.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BackendError, BackendTimeout, GatewayFailure, RetriesExhausted
from .prompts import RETRY_TEMPLATE

TRACE_BYTE_CAP = 4000  # per-record truncation for prompt/response text in the trace

EMBED_DIM = 256


@dataclass
class ChatRequest:
    prompt: str
    temperature: float = 0.0
    want_logprobs: bool = False
    stage_tag: str = ""
    image_path: Optional[str] = None


@dataclass
class Completion:
    text: str
    # one entry per scored token: (token, [(candidate, logprob), ...] top-5)
    token_logprobs: Optional[list] = None
    attempts: int = 1


@dataclass
class EmbeddingVector:
    values: np.ndarray
    dimension: int


def extract_tagged(text: str, tag: str) -> list[str]:
    """Return the inner contents of every complete ``<tag>...</tag>`` pair.

    Non-greedy, order-preserving, tolerant of surrounding prose. Unclosed tags
    yield nothing.
    """
    pattern = re.compile(r"<{0}>(.*?)</{0}>".format(re.escape(tag)), re.DOTALL)
    return [m.group(1) for m in pattern.finditer(text)]


def first_number(text: str) -> Optional[float]:
    """Lenient numeric parse: the first number found in `text` wins ("7/10" -> 7)."""
    m = re.search(r"-?\d+(?:\.\d+)?", text)
    return float(m.group(0)) if m else None


class HashedTokenEmbedder:
    """Deterministic fallback embedder: hashed bag-of-tokens, L2-normalized.

    Not semantically smart, but stable across processes and good enough to make
    cosine-based completeness scoring testable without a model backend.
    """

    dimension = EMBED_DIM

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        out = []
        for text in texts:
            vec = np.zeros(self.dimension, dtype=np.float64)
            for token in re.findall(r"[a-z0-9]+", text.lower()):
                digest = hashlib.sha256(token.encode("utf-8")).digest()
                bucket = int.from_bytes(digest[:4], "big") % self.dimension
                vec[bucket] += 1.0
            norm = np.linalg.norm(vec)
            if norm > 0:
                vec /= norm
            out.append(EmbeddingVector(values=vec, dimension=self.dimension))
        return out


class ScriptedBackend:
    """Deterministic test backend keyed by ``stage_tag`` + call ordinal.

    ``responses`` maps a stage tag to a list of canned completions; once the
    list is exhausted the last entry repeats, so fixtures only spell out the
    calls that differ. Entries are either strings or dicts
    ``{"text": ..., "token_logprobs": [...]}``.
    """

    def __init__(self, responses: dict):
        self.responses = responses
        self._ordinals: dict[str, int] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str) -> "ScriptedBackend":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh))

    def _next(self, stage_tag: str):
        with self._lock:
            if stage_tag not in self.responses:
                raise BackendError(f"no scripted response for stage tag {stage_tag!r}")
            entries = self.responses[stage_tag]
            if not isinstance(entries, list):
                entries = [entries]
            if not entries:
                raise BackendError(f"empty scripted response list for {stage_tag!r}")
            idx = self._ordinals.get(stage_tag, 0)
            self._ordinals[stage_tag] = idx + 1
            return entries[min(idx, len(entries) - 1)]

    def complete(self, req: ChatRequest) -> Completion:
        entry = self._next(req.stage_tag)
        if isinstance(entry, dict):
            return Completion(text=entry["text"], token_logprobs=entry.get("token_logprobs"))
        return Completion(text=entry)

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return HashedTokenEmbedder().embed(texts)


class OpenAIBackend:
    """Chat-completions-style HTTP backend; credentials come from the environment."""

    def __init__(self, model: Optional[str] = None, timeout: float = 120.0):
        self.api_key = os.environ.get("CROSSLENS_API_KEY") or os.environ.get("OPENAI_API_KEY")
        self.base_url = (
            os.environ.get("CROSSLENS_API_BASE")
            or os.environ.get("OPENAI_BASE_URL")
            or "https://api.openai.com/v1"
        ).rstrip("/")
        self.model = model or os.environ.get("CROSSLENS_MODEL", "gpt-4o")
        self.timeout = timeout
        if not self.api_key:
            raise BackendError("no API key configured (CROSSLENS_API_KEY / OPENAI_API_KEY)")

    def complete(self, req: ChatRequest) -> Completion:
        import base64

        import httpx

        content: object = req.prompt
        if req.image_path:
            with open(req.image_path, "rb") as fh:
                b64 = base64.b64encode(fh.read()).decode("ascii")
            ext = os.path.splitext(req.image_path)[1].lstrip(".").lower() or "png"
            content = [
                {"type": "text", "text": req.prompt},
                {"type": "image_url", "image_url": {"url": f"data:image/{ext};base64,{b64}"}},
            ]
        payload = {
            "model": self.model,
            "temperature": req.temperature,
            "messages": [{"role": "user", "content": content}],
        }
        if req.want_logprobs:
            payload["logprobs"] = True
            payload["top_logprobs"] = 5
        try:
            resp = httpx.post(
                f"{self.base_url}/chat/completions",
                json=payload,
                headers={"Authorization": f"Bearer {self.api_key}"},
                timeout=self.timeout,
            )
        except httpx.TimeoutException as exc:
            raise BackendTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise BackendError(str(exc)) from exc
        if resp.status_code != 200:
            raise BackendError(
                f"backend returned {resp.status_code}", status=resp.status_code, body=resp.text
            )
        data = resp.json()
        choice = data["choices"][0]
        token_logprobs = None
        logprobs = choice.get("logprobs")
        if logprobs and logprobs.get("content"):
            token_logprobs = [
                (
                    item["token"],
                    [(alt["token"], alt["logprob"]) for alt in item.get("top_logprobs", [])],
                )
                for item in logprobs["content"]
            ]
        return Completion(text=choice["message"]["content"] or "", token_logprobs=token_logprobs)

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        import httpx

        model = os.environ.get("CROSSLENS_EMBED_MODEL", "text-embedding-3-small")
        try:
            resp = httpx.post(
                f"{self.base_url}/embeddings",
                json={"model": model, "input": list(texts)},
                headers={"Authorization": f"Bearer {self.api_key}"},
                timeout=self.timeout,
            )
        except httpx.HTTPError as exc:
            raise BackendError(str(exc)) from exc
        if resp.status_code != 200:
            raise BackendError(
                f"backend returned {resp.status_code}", status=resp.status_code, body=resp.text
            )
        rows = sorted(resp.json()["data"], key=lambda d: d["index"])
        return [
            EmbeddingVector(values=np.asarray(r["embedding"], dtype=np.float64),
                            dimension=len(r["embedding"]))
            for r in rows
        ]


@dataclass
class Gateway:
    """Wraps a backend with trace logging and the retry-on-invalid-output protocol."""

    backend: object
    trace: Optional[Callable[[dict], None]] = None
    fallback_embedder: HashedTokenEmbedder = field(default_factory=HashedTokenEmbedder)

    def _log(self, req: ChatRequest, completion: Completion, attempt: int) -> None:
        if self.trace is None:
            return
        self.trace(
            {
                "type": "model_call",
                "stage_tag": req.stage_tag,
                "attempt": attempt,
                "prompt": req.prompt[:TRACE_BYTE_CAP],
                "response": completion.text[:TRACE_BYTE_CAP],
            }
        )

    def chat(self, req: ChatRequest) -> Completion:
        completion = self.backend.complete(req)
        self._log(req, completion, attempt=1)
        return completion

    def complete_with_retry(
        self,
        prompt: str,
        validator: Callable[[str], Optional[str]],
        max_retries: int = 3,
        stage_tag: str = "",
        temperature: float = 0.0,
        want_logprobs: bool = False,
        image_path: Optional[str] = None,
    ) -> Completion:
        """Run `prompt`, re-prompting with the retry template until `validator`
        accepts the output.

        `validator` returns ``None`` on success or an error description used to
        build the retry prompt. Raises :class:`RetriesExhausted` after
        ``1 + max_retries`` failed attempts.
        """
        current_prompt = prompt
        last_error = None
        attempts = 0
        for attempt in range(1, max_retries + 2):
            attempts = attempt
            req = ChatRequest(
                prompt=current_prompt,
                temperature=temperature,
                want_logprobs=want_logprobs,
                stage_tag=stage_tag,
                image_path=image_path,
            )
            completion = self.backend.complete(req)
            self._log(req, completion, attempt=attempt)
            error = validator(completion.text)
            if error is None:
                completion.attempts = attempt
                return completion
            last_error = error
            if self.trace is not None:
                self.trace(
                    {
                        "type": "retry",
                        "stage_tag": stage_tag,
                        "attempt": attempt,
                        "error": str(error)[:TRACE_BYTE_CAP],
                    }
                )
            current_prompt = RETRY_TEMPLATE.format(
                initial_prompt=prompt, prev_output=completion.text, error=error
            )
        raise RetriesExhausted(
            f"validation failed after {attempts} attempts for {stage_tag!r}: {last_error}",
            last_error=last_error,
            attempts=attempts,
        )

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        if not texts:
            raise GatewayFailure("embed() requires at least one text")
        if hasattr(self.backend, "embed"):
            return self.backend.embed(texts)
        return self.fallback_embedder.embed(texts)


def make_backend(name: str, scripted_path: Optional[str] = None):
    """Backend factory used by the CLI (`--backend`)."""
    if name == "scripted":
        path = scripted_path or os.environ.get("CROSSLENS_SCRIPTED_RESPONSES")
        if not path:
            raise BackendError("scripted backend requires a responses file")
        return ScriptedBackend.from_file(path)
    if name == "openai":
        return OpenAIBackend()
    raise BackendError(f"unknown backend {name!r}")
