"""Embedding providers and pre-analysis embedding.

Providers return raw vectors; embed_preanalysis normalizes to unit norm
before storage so downstream kernel entries are plain dot products.
The HTTP provider contract is a single POST:

    request  {"text": "..."}
    response {"vector": [0.1, -0.2, ...]}
"""

from __future__ import annotations

import hashlib
from typing import Protocol, Sequence

import httpx
import numpy as np

from variantlab.corpus.models import Embedding, PreAnalysis


class DegenerateEmbeddingError(Exception):
    """Provider returned a zero (or effectively zero) vector."""


class EmbeddingProvider(Protocol):
    provider_tag: str

    def embed(self, text: str) -> Sequence[float]: ...


class HashedGaussianProvider:
    """Deterministic fake provider for tests and offline runs.

    Maps text to a Gaussian vector seeded from a stable hash of the text:
    identical inputs give identical vectors with no network dependency.
    """

    def __init__(self, dim: int = 256, provider_tag: str | None = None):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.provider_tag = provider_tag or f"fake-hash-gaussian-{dim}"

    def embed(self, text: str) -> Sequence[float]:
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "big")
        rng = np.random.default_rng(seed)
        return rng.standard_normal(self.dim).tolist()


class HttpEmbeddingProvider:
    """Adapter for a remote embedding endpoint."""

    def __init__(self, url: str, provider_tag: str, client: httpx.Client | None = None, timeout: float = 60.0):
        self.url = url
        self.provider_tag = provider_tag
        self._client = client or httpx.Client(timeout=timeout)

    def embed(self, text: str) -> Sequence[float]:
        response = self._client.post(self.url, json={"text": text})
        response.raise_for_status()
        payload = response.json()
        vector = payload.get("vector")
        if not isinstance(vector, list) or not vector:
            raise ValueError("embedding response missing 'vector'")
        return [float(x) for x in vector]


def normalize(vector: Sequence[float]) -> tuple[float, ...]:
    arr = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if not np.isfinite(norm) or norm < 1e-12:
        raise DegenerateEmbeddingError(f"cannot normalize vector with norm {norm!r}")
    return tuple((arr / norm).tolist())


def embed_preanalysis(pre: PreAnalysis, provider: EmbeddingProvider) -> Embedding:
    """Embed a pre-analysis text and normalize to unit norm."""
    raw = provider.embed(pre.text)
    return Embedding(seed_id=pre.seed_id, vector=normalize(raw), provider_tag=provider.provider_tag)
