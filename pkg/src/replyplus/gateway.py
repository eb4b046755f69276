"""Uniform interface to text-generation and embedding providers.

Two backends: a remote client speaking the de-facto chat-completions /
embeddings JSON protocol (any compatible server works), and a scripted
mock whose outputs are fully deterministic so the entire pipeline can run
and be tested offline.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import random
import threading
import time
from dataclasses import dataclass, field
from enum import Enum

import httpx

from .prompting import ComposedPrompt
from .redaction import RedactedText

logger = logging.getLogger(__name__)

DEFAULT_EMBEDDING_DIM = 1536

# Each regeneration attempt nudges sampling upward so retries actually vary.
TEMPERATURE_STEP_PER_ATTEMPT = 0.2
TEMPERATURE_CAP = 2.0


class GatewayError(Exception):
    """Base class for provider failures."""


class ProviderUnavailable(GatewayError):
    """Transport kept failing after all retries."""


class ProviderRejected(GatewayError):
    """Provider returned a non-retryable error status."""


class ScriptExhausted(GatewayError):
    """The scripted mock ran out of canned completions."""


class EmptyText(GatewayError):
    """Embedding requested for empty (after trimming) text."""


@dataclass(frozen=True)
class GenerationParams:
    """Sampling parameters for one completion request."""

    model_name: str
    temperature: float = 0.7
    max_output_tokens: int = 2048
    attempt_hint: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")

    def effective_temperature(self) -> float:
        """Temperature after the per-attempt regeneration bump, capped."""
        return min(TEMPERATURE_CAP, self.temperature + TEMPERATURE_STEP_PER_ATTEMPT * self.attempt_hint)


@dataclass(frozen=True)
class EmbeddingVector:
    """Fixed-length embedding; all components finite."""

    values: tuple[float, ...]
    dim: int
    model_name: str

    def __post_init__(self) -> None:
        if len(self.values) != self.dim:
            raise ValueError(f"expected {self.dim} components, got {len(self.values)}")
        if any(not math.isfinite(v) for v in self.values):
            raise ValueError("embedding contains non-finite components")


class EmbeddingMode(Enum):
    HASH_DETERMINISTIC = "hash"
    TABLE = "table"


@dataclass
class ProviderScript:
    """Canned outputs for the mock: completions play back strictly in order.

    ``table`` pins embeddings for specific texts (useful for placing
    fixtures at hand-computed distances); texts not in the table fall back
    to the hash projection.
    """

    completions: list[str] = field(default_factory=list)
    embedding_mode: EmbeddingMode = EmbeddingMode.HASH_DETERMINISTIC
    table: dict[str, tuple[float, ...]] = field(default_factory=dict)


def _as_text(text: str | RedactedText) -> str:
    return text.masked if isinstance(text, RedactedText) else text


def hash_embedding(text: str, dim: int) -> tuple[float, ...]:
    """Deterministic pseudo-embedding of ``text``.

    Algorithm (stable contract, tests recompute it independently): strip
    the text, hash its UTF-8 bytes with SHA-256, seed ``random.Random``
    with the first 8 digest bytes (big-endian), draw ``dim`` uniform
    values from [0, 1).
    """
    digest = hashlib.sha256(text.strip().encode("utf-8")).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    return tuple(rng.random() for _ in range(dim))


class MockGateway:
    """Scripted provider used for offline runs and the test suite."""

    def __init__(
        self,
        script: ProviderScript | None = None,
        dim: int = DEFAULT_EMBEDDING_DIM,
        model_name: str = "mock-chat",
        embedding_model_name: str = "mock-embed",
    ) -> None:
        self.script = script or ProviderScript()
        self.dim = dim
        self.model_name = model_name
        self.embedding_model_name = embedding_model_name
        self.calls: list[tuple[ComposedPrompt, GenerationParams]] = []
        self._cursor = 0
        self._lock = threading.Lock()

    def complete(self, prompt: ComposedPrompt, params: GenerationParams) -> str:
        with self._lock:
            if self._cursor >= len(self.script.completions):
                raise ScriptExhausted(
                    f"script has {len(self.script.completions)} completions, all consumed"
                )
            text = self.script.completions[self._cursor]
            self._cursor += 1
            self.calls.append((prompt, params))
        return text

    def embed(self, text: str | RedactedText) -> EmbeddingVector:
        plain = _as_text(text)
        if not plain.strip():
            raise EmptyText("cannot embed empty text")
        if self.script.embedding_mode is EmbeddingMode.TABLE:
            pinned = self.script.table.get(plain.strip())
            if pinned is not None:
                if len(pinned) != self.dim:
                    raise ValueError(f"table vector has dim {len(pinned)}, gateway dim is {self.dim}")
                return EmbeddingVector(tuple(float(v) for v in pinned), self.dim, self.embedding_model_name)
        return EmbeddingVector(hash_embedding(plain, self.dim), self.dim, self.embedding_model_name)


@dataclass(frozen=True)
class RemoteConfig:
    """Connection settings for an OpenAI-compatible server."""

    base_url: str
    chat_model: str = "gpt-3.5-turbo-16k"
    embedding_model: str = "text-embedding-ada-002"
    api_key_env: str = "REPLYPLUS_API_KEY"
    timeout_seconds: float = 30.0
    retry_attempts: int = 3
    backoff_base_seconds: float = 0.5
    embedding_dim: int = DEFAULT_EMBEDDING_DIM


_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class RemoteGateway:
    """HTTP client for chat-completions and embeddings endpoints.

    Transient transport failures and retryable statuses are retried with
    capped exponential backoff; anything else surfaces immediately as
    ``ProviderRejected``.
    """

    def __init__(self, config: RemoteConfig, client: httpx.Client | None = None) -> None:
        self.config = config
        self.dim = config.embedding_dim
        headers = {}
        api_key = os.environ.get(config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = client or httpx.Client(
            base_url=config.base_url.rstrip("/"),
            headers=headers,
            timeout=config.timeout_seconds,
        )

    def _post(self, path: str, payload: dict) -> dict:
        last_error: Exception | None = None
        for attempt in range(self.config.retry_attempts):
            if attempt:
                time.sleep(min(self.config.backoff_base_seconds * 2 ** (attempt - 1), 8.0))
            try:
                response = self._client.post(path, json=payload)
            except httpx.HTTPError as exc:
                last_error = exc
                logger.warning("transport error on %s (attempt %d): %s", path, attempt + 1, exc)
                continue
            if response.status_code == 200:
                return response.json()
            if response.status_code in _RETRYABLE_STATUS:
                last_error = ProviderUnavailable(f"{path} returned {response.status_code}")
                logger.warning("retryable status %d on %s (attempt %d)", response.status_code, path, attempt + 1)
                continue
            raise ProviderRejected(f"{path} returned {response.status_code}: {response.text[:200]}")
        raise ProviderUnavailable(f"{path} failed after {self.config.retry_attempts} attempts: {last_error}")

    def complete(self, prompt: ComposedPrompt, params: GenerationParams) -> str:
        payload = {
            "model": params.model_name or self.config.chat_model,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.dialogue_text},
            ],
            "temperature": params.effective_temperature(),
            "max_tokens": params.max_output_tokens,
        }
        body = self._post("/chat/completions", payload)
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderRejected(f"malformed chat-completions response: {exc}") from exc

    def embed(self, text: str | RedactedText) -> EmbeddingVector:
        plain = _as_text(text)
        if not plain.strip():
            raise EmptyText("cannot embed empty text")
        body = self._post("/embeddings", {"model": self.config.embedding_model, "input": plain})
        try:
            values = tuple(float(v) for v in body["data"][0]["embedding"])
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderRejected(f"malformed embeddings response: {exc}") from exc
        return EmbeddingVector(values, len(values), self.config.embedding_model)
