"""Embedding vectors, cosine similarity, and pluggable text-encoder backends.

Two backends ship with the package: "remote" talks to an HTTP embedding
service, "hash-test" is a deterministic offline bag-of-words encoder used
in tests and dry runs. Extra backends can be registered at runtime.
"""
from __future__ import annotations

import math
import os
import re
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import requests

from .errors import BackendUnavailableError, DimensionMismatchError, ZeroVectorError

EMBED_API_KEY_ENV = "CONSENSUS_EMBED_API_KEY"

# Remote client hygiene: bounded retries with exponential backoff.
RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 0.5
REQUEST_TIMEOUT = 30.0
EMBED_CHUNK_SIZE = 64

UNIT_NORM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class EmbeddingVector:
    """Fixed-width real vector. Stored as received; cosine normalizes internally."""

    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("embedding vector must have at least one component")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding vector has non-finite components")

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class EmbedderSpec:
    """Names an embedding backend and model; dim is the contract width."""

    backend_id: str
    model_id: str
    dim: int
    endpoint: str | None = None

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("embedder dim must be positive")


def _norm(values: Sequence[float]) -> float:
    return math.sqrt(sum(v * v for v in values))


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity, clamped into [-1, 1] to absorb rounding."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dim {a.dim} vs {b.dim}")
    na = _norm(a.values)
    nb = _norm(b.values)
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine of a zero vector is undefined")
    dot = sum(x * y for x, y in zip(a.values, b.values))
    return max(-1.0, min(1.0, dot / (na * nb)))


def normalize(v: EmbeddingVector) -> EmbeddingVector:
    """Scale to unit Euclidean norm, preserving direction."""
    n = _norm(v.values)
    if n == 0.0:
        raise ZeroVectorError("cannot normalize a zero vector")
    return EmbeddingVector(tuple(x / n for x in v.values))


# --- deterministic offline encoder -----------------------------------------

# FNV-1a 64-bit over UTF-8 token bytes: fixed constants so bucket layout is
# identical across runs, platforms, and Python versions.
_FNV64_OFFSET = 0xCBF29CE484222325
_FNV64_PRIME = 0x100000001B3
_FNV64_MASK = 0xFFFFFFFFFFFFFFFF

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

MIN_HASH_DIM = 8


def fnv1a64(data: bytes) -> int:
    h = _FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV64_PRIME) & _FNV64_MASK
    return h


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation."""
    return _TOKEN_RE.findall(text.lower())


def hash_test_embedder(text: str, dim: int) -> EmbeddingVector:
    """Bag-of-words bucket counts under FNV-1a hashing, unit-normalized."""
    if dim < MIN_HASH_DIM:
        raise ValueError(f"hash-test embedder needs dim >= {MIN_HASH_DIM}, got {dim}")
    tokens = tokenize(text)
    if not tokens:
        raise ZeroVectorError(f"no tokens in text {text!r}")
    counts = [0.0] * dim
    for token in tokens:
        counts[fnv1a64(token.encode("utf-8")) % dim] += 1.0
    return normalize(EmbeddingVector(tuple(counts)))


# --- backend registry -------------------------------------------------------

Backend = Callable[[Sequence[str], EmbedderSpec], "list[EmbeddingVector]"]

_BACKENDS: dict[str, Backend] = {}


def register_backend(backend_id: str, backend: Backend) -> None:
    _BACKENDS[backend_id] = backend


def unregister_backend(backend_id: str) -> None:
    _BACKENDS.pop(backend_id, None)


def registered_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def _hash_test_backend(texts: Sequence[str], spec: EmbedderSpec) -> list[EmbeddingVector]:
    return [hash_test_embedder(t, spec.dim) for t in texts]


def _remote_backend(texts: Sequence[str], spec: EmbedderSpec) -> list[EmbeddingVector]:
    if not spec.endpoint:
        raise BackendUnavailableError("remote embedder spec has no endpoint")
    headers = {}
    api_key = os.environ.get(EMBED_API_KEY_ENV)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    vectors: list[EmbeddingVector] = []
    for start in range(0, len(texts), EMBED_CHUNK_SIZE):
        chunk = list(texts[start : start + EMBED_CHUNK_SIZE])
        payload = {"model": spec.model_id, "inputs": chunk}
        data = _post_with_retries(spec.endpoint, payload, headers)
        raw = data.get("vectors")
        if not isinstance(raw, list) or len(raw) != len(chunk):
            raise BackendUnavailableError("embedding response missing vectors for each input")
        vectors.extend(EmbeddingVector(tuple(row)) for row in raw)
    return vectors


def _post_with_retries(endpoint: str, payload: dict, headers: dict) -> dict:
    last_error: Exception | None = None
    for attempt in range(RETRY_ATTEMPTS):
        if attempt:
            time.sleep(RETRY_BASE_DELAY * (2 ** (attempt - 1)))
        try:
            response = requests.post(
                endpoint, json=payload, headers=headers, timeout=REQUEST_TIMEOUT
            )
            response.raise_for_status()
            return response.json()
        except (requests.RequestException, ValueError) as exc:
            last_error = exc
    raise BackendUnavailableError(
        f"embedding backend unreachable after {RETRY_ATTEMPTS} attempts: {last_error}"
    )


register_backend("hash-test", _hash_test_backend)
register_backend("remote", _remote_backend)


def embed_batch(texts: Sequence[str], spec: EmbedderSpec) -> list[EmbeddingVector]:
    """One vector per input text, in input order, all of spec.dim."""
    if not texts:
        raise ValueError("embed_batch needs at least one text")
    backend = _BACKENDS.get(spec.backend_id)
    if backend is None:
        raise ValueError(
            f"unknown embedding backend {spec.backend_id!r}; registered: {registered_backends()}"
        )
    vectors = backend(texts, spec)
    if len(vectors) != len(texts):
        raise BackendUnavailableError(
            f"backend returned {len(vectors)} vectors for {len(texts)} texts"
        )
    for v in vectors:
        if v.dim != spec.dim:
            raise DimensionMismatchError(f"backend returned dim {v.dim}, spec says {spec.dim}")
    return vectors
