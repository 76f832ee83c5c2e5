"""Corpus store interface and the in-memory reference implementation.

The service module provides a sqlite-backed implementation of the same
interface; this one backs unit tests and standalone library use.
Upserts are atomic per seed: concurrent ingest and artifact fetches may
interleave across seeds but never corrupt a single record.
"""

from __future__ import annotations

import math
import threading
from typing import Iterable, Protocol

from variantlab.corpus.models import Embedding, PreAnalysis, Seed, SeedStatus

# |norm - 1| bound for stored embedding vectors.
UNIT_NORM_TOLERANCE = 1e-9


class CorpusStore(Protocol):
    def upsert_seed(self, seed: Seed) -> None: ...

    def get_seed(self, seed_id: str) -> Seed | None: ...

    def seeds(self, status: SeedStatus | None = None) -> list[Seed]: ...

    def put_preanalysis(self, pre: PreAnalysis) -> None: ...

    def get_preanalysis(self, seed_id: str) -> PreAnalysis | None: ...

    def put_embedding(self, emb: Embedding) -> None: ...

    def get_embedding(self, seed_id: str) -> Embedding | None: ...

    def campaign_seed_ids(self) -> list[str]: ...


def check_embedding(emb: Embedding, expected_dim: int | None, expected_tag: str | None) -> None:
    """Enforce the unit-norm invariant and corpus-wide dim/provider uniformity."""
    norm = math.sqrt(sum(x * x for x in emb.vector))
    if abs(norm - 1.0) > UNIT_NORM_TOLERANCE:
        raise ValueError(f"embedding for {emb.seed_id} is not unit norm (|v|={norm!r})")
    if expected_dim is not None and emb.dim != expected_dim:
        raise ValueError(f"embedding dim {emb.dim} != corpus dim {expected_dim}")
    if expected_tag is not None and emb.provider_tag != expected_tag:
        raise ValueError(f"provider tag {emb.provider_tag!r} != corpus tag {expected_tag!r}")


class MemoryCorpusStore:
    """Thread-safe dict-backed corpus store."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._seeds: dict[str, Seed] = {}
        self._preanalyses: dict[str, PreAnalysis] = {}
        self._embeddings: dict[str, Embedding] = {}

    def upsert_seed(self, seed: Seed) -> None:
        with self._lock:
            self._seeds[seed.id] = seed

    def get_seed(self, seed_id: str) -> Seed | None:
        with self._lock:
            return self._seeds.get(seed_id)

    def seeds(self, status: SeedStatus | None = None) -> list[Seed]:
        with self._lock:
            out = list(self._seeds.values())
        if status is not None:
            out = [s for s in out if s.status == status]
        return sorted(out, key=lambda s: s.id)

    def put_preanalysis(self, pre: PreAnalysis) -> None:
        if self.get_seed(pre.seed_id) is None:
            raise KeyError(f"unknown seed: {pre.seed_id}")
        with self._lock:
            self._preanalyses[pre.seed_id] = pre

    def get_preanalysis(self, seed_id: str) -> PreAnalysis | None:
        with self._lock:
            return self._preanalyses.get(seed_id)

    def put_embedding(self, emb: Embedding) -> None:
        if self.get_seed(emb.seed_id) is None:
            raise KeyError(f"unknown seed: {emb.seed_id}")
        with self._lock:
            ref = next(iter(self._embeddings.values()), None)
            check_embedding(emb, ref.dim if ref else None, ref.provider_tag if ref else None)
            self._embeddings[emb.seed_id] = emb

    def get_embedding(self, seed_id: str) -> Embedding | None:
        with self._lock:
            return self._embeddings.get(seed_id)

    def embeddings(self, seed_ids: Iterable[str] | None = None) -> dict[str, Embedding]:
        with self._lock:
            if seed_ids is None:
                return dict(self._embeddings)
            return {sid: self._embeddings[sid] for sid in seed_ids if sid in self._embeddings}

    def campaign_seed_ids(self) -> list[str]:
        """Seeds eligible for campaigns: status valid and a PreAnalysis exists."""
        with self._lock:
            return sorted(
                sid
                for sid, seed in self._seeds.items()
                if seed.status == SeedStatus.VALID and sid in self._preanalyses
            )
