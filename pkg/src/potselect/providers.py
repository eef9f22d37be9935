"""Completion and embedding providers, cosine similarity, service bundle.

Two completion providers: a scripted one that replays fixture files for
deterministic tests, and a remote HTTP adapter with retry/backoff.  The
embedding side ships a bit-exact deterministic hashed bag-of-tokens encoder
plus a remote adapter sharing the HTTP machinery.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import requests

from .cache import CacheStore, cached_complete
from .prompts import concept_prompt

ENDPOINT_ENV = "POTSELECT_ENDPOINT"
TOKEN_ENV = "POTSELECT_API_TOKEN"
MODEL_ENV = "POTSELECT_MODEL"


class ProviderError(Exception):
    pass


class ProviderUnavailable(ProviderError):
    """Remote provider failed after exhausting its retry budget."""


class NoFixture(ProviderError):
    """Scripted provider has no mapping for a prompt (a test-authoring error)."""


class DimensionMismatch(ProviderError):
    pass


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    model_id: str = "scripted"
    temperature: float = 0.0
    max_tokens: int = 512
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "temperature", float(self.temperature))
        object.__setattr__(self, "max_tokens", int(self.max_tokens))
        object.__setattr__(self, "stop_sequences", tuple(self.stop_sequences))
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    def canonical(self) -> str:
        """Unique serialization: sorted keys, fixed separators and number forms."""
        return json.dumps(
            {
                "max_tokens": self.max_tokens,
                "model_id": self.model_id,
                "prompt": self.prompt,
                "stop_sequences": list(self.stop_sequences),
                "temperature": self.temperature,
            },
            sort_keys=True,
            ensure_ascii=False,
            separators=(",", ":"),
        )

    def key(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Fixture:
    kind: str  # "exact" | "pattern"
    text: str
    response: str

    def __post_init__(self) -> None:
        if self.kind not in ("exact", "pattern"):
            raise ValueError(f"fixture kind must be exact|pattern, got {self.kind!r}")


def load_fixtures(path: str | Path) -> list[Fixture]:
    records = json.loads(Path(path).read_text(encoding="utf-8"))
    return [Fixture(r["match"], r["text"], r["response"]) for r in records]


def save_fixtures(fixtures: list[Fixture], path: str | Path) -> None:
    records = [{"match": f.kind, "text": f.text, "response": f.response} for f in fixtures]
    Path(path).write_text(json.dumps(records, indent=2, ensure_ascii=False), encoding="utf-8")


class ScriptedProvider:
    """Replays fixture responses: exact prompt match or regex search.

    Repeated identical prompts step through matching fixtures in declared
    order; once all matches are consumed, the last one keeps answering.
    Pattern responses may use backreferences (``\\1``) into the match.
    """

    provider_id = "scripted"

    def __init__(self, fixtures: list[Fixture] | None = None, model_id: str = "scripted"):
        self.fixtures = list(fixtures or [])
        self.model_id = model_id
        self.calls = 0
        self._consumed = [False] * len(self.fixtures)

    @classmethod
    def from_file(cls, path: str | Path, model_id: str = "scripted") -> "ScriptedProvider":
        return cls(load_fixtures(path), model_id=model_id)

    def complete(self, request: CompletionRequest) -> str:
        self.calls += 1
        matches: list[tuple[int, re.Match | None]] = []
        for i, fixture in enumerate(self.fixtures):
            if fixture.kind == "exact":
                if fixture.text == request.prompt:
                    matches.append((i, None))
            else:
                m = re.search(fixture.text, request.prompt)
                if m:
                    matches.append((i, m))
        if not matches:
            head = request.prompt[:120].replace("\n", "\\n")
            raise NoFixture(f"no fixture matches prompt starting {head!r}")
        unconsumed = [pair for pair in matches if not self._consumed[pair[0]]]
        index, m = unconsumed[0] if unconsumed else matches[-1]
        self._consumed[index] = True
        fixture = self.fixtures[index]
        if m is not None:
            return m.expand(fixture.response)
        return fixture.response


Transport = Callable[[str, dict, dict], str]


def _http_transport(endpoint: str, payload: dict, headers: dict) -> str:
    resp = requests.post(endpoint, json=payload, headers=headers, timeout=60)
    if resp.status_code >= 500:
        raise requests.ConnectionError(f"server error {resp.status_code}")
    resp.raise_for_status()
    return resp.json()["text"]


class RemoteCompletionProvider:
    """Single-shot HTTP completion adapter with bounded exponential backoff.

    Endpoint, auth token and model come from arguments or the
    ``POTSELECT_ENDPOINT`` / ``POTSELECT_API_TOKEN`` / ``POTSELECT_MODEL``
    environment variables.  ``max_in_flight`` bounds concurrent requests.
    """

    provider_id = "remote"

    def __init__(
        self,
        endpoint: str | None = None,
        token: str | None = None,
        model_id: str | None = None,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        backoff_cap: float = 8.0,
        max_in_flight: int = 4,
        transport: Transport | None = None,
    ):
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV, "")
        self.token = token if token is not None else os.environ.get(TOKEN_ENV, "")
        self.model_id = model_id or os.environ.get(MODEL_ENV, "default")
        if not self.endpoint:
            raise ValueError(f"no endpoint configured (set {ENDPOINT_ENV})")
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.backoff_cap = backoff_cap
        self.calls = 0
        self._transport = transport or _http_transport
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def complete(self, request: CompletionRequest) -> str:
        self.calls += 1
        payload = {
            "model": request.model_id,
            "prompt": request.prompt,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "stop": list(request.stop_sequences),
        }
        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        delay = self.backoff_base
        last: Exception | None = None
        with self._slots:
            for attempt in range(self.max_attempts):
                try:
                    return self._transport(self.endpoint, payload, headers)
                except (requests.ConnectionError, requests.Timeout, ConnectionError, TimeoutError) as exc:
                    last = exc
                    if attempt + 1 < self.max_attempts:
                        time.sleep(delay)
                        delay = min(delay * 2, self.backoff_cap)
                except requests.RequestException as exc:
                    raise ProviderUnavailable(f"non-retryable failure: {exc}") from exc
        raise ProviderUnavailable(
            f"gave up after {self.max_attempts} attempts: {last}"
        ) from last


class HashEmbedding:
    """Deterministic hashed bag-of-tokens embedding, bit-exact by construction.

    Lowercase, split on non-alphanumeric runs, hash each token with a fixed
    64-bit hash (blake2b, 8-byte digest, big-endian), accumulate token counts
    into bucket ``hash % dimension``, L2-normalize.  Empty token list yields
    the all-zero vector.  Depends only on the multiset of tokens.
    """

    provider_id = "hash-embedding"

    def __init__(self, dimension: int = 256):
        self.dimension = dimension

    @staticmethod
    def _token_hash(token: str) -> int:
        return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")

    def embed(self, text: str) -> np.ndarray:
        vector = np.zeros(self.dimension, dtype=np.float64)
        for token in re.split(r"[^a-z0-9]+", text.lower()):
            if token:
                vector[self._token_hash(token) % self.dimension] += 1.0
        norm = np.linalg.norm(vector)
        if norm > 0:
            vector /= norm
        return vector


class RemoteEmbeddingProvider:
    """HTTP embedding adapter mirroring the completion adapter's protocol."""

    provider_id = "remote-embedding"

    def __init__(
        self,
        dimension: int,
        endpoint: str | None = None,
        token: str | None = None,
        model_id: str | None = None,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        transport: Callable[[str, dict, dict], list[float]] | None = None,
    ):
        self.dimension = dimension
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV, "")
        self.token = token if token is not None else os.environ.get(TOKEN_ENV, "")
        self.model_id = model_id or os.environ.get(MODEL_ENV, "default")
        if not self.endpoint:
            raise ValueError(f"no endpoint configured (set {ENDPOINT_ENV})")
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._transport = transport or self._http

    @staticmethod
    def _http(endpoint: str, payload: dict, headers: dict) -> list[float]:
        resp = requests.post(endpoint, json=payload, headers=headers, timeout=60)
        resp.raise_for_status()
        return resp.json()["embedding"]

    def embed(self, text: str) -> np.ndarray:
        payload = {"model": self.model_id, "input": text}
        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        delay = self.backoff_base
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                values = np.asarray(self._transport(self.endpoint, payload, headers), dtype=np.float64)
                break
            except (requests.ConnectionError, requests.Timeout, ConnectionError, TimeoutError) as exc:
                last = exc
                if attempt + 1 < self.max_attempts:
                    time.sleep(delay)
                    delay *= 2
        else:
            raise ProviderUnavailable(f"gave up after {self.max_attempts} attempts: {last}") from last
        if values.shape != (self.dimension,):
            raise DimensionMismatch(f"expected dimension {self.dimension}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ProviderError("embedding contains non-finite components")
        return values


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """u.v / (|u||v|), 0.0 when either norm is zero; clipped to [-1, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"dimensions differ: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


@dataclass
class Services:
    """Completion + embedding providers and an optional response cache.

    ``step_embedding`` optionally routes consistency-check step similarity
    through a different embedder than question/answer encoding; it falls
    back to ``embedding``.  Shareable across workers: the embed memos are
    append-only and providers carry no per-call mutable state beyond
    counters.
    """

    completion: object
    embedding: object
    cache: CacheStore | None = None
    step_embedding: object | None = None
    _embed_memo: dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    _step_memo: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def complete_text(
        self,
        prompt: str,
        *,
        temperature: float = 0.0,
        max_tokens: int = 512,
        stop_sequences: tuple[str, ...] = (),
    ) -> str:
        request = CompletionRequest(
            prompt=prompt,
            model_id=getattr(self.completion, "model_id", "default"),
            temperature=temperature,
            max_tokens=max_tokens,
            stop_sequences=stop_sequences,
        )
        return cached_complete(request, self.cache, self.completion)

    def embed(self, text: str) -> np.ndarray:
        hit = self._embed_memo.get(text)
        if hit is None:
            hit = self.embedding.embed(text)
            self._embed_memo[text] = hit
        return hit

    def embed_steps(self, text: str) -> np.ndarray:
        if self.step_embedding is None:
            return self.embed(text)
        hit = self._step_memo.get(text)
        if hit is None:
            hit = self.step_embedding.embed(text)
            self._step_memo[text] = hit
        return hit


def concept_extract(text: str, services: Services) -> str:
    """Ask the completion provider for the concept list of ``text``, verbatim."""
    return services.complete_text(concept_prompt(text))
