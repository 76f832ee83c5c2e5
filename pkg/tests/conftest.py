from __future__ import annotations

import pytest

from variantlab.clock import SimClock
from variantlab.corpus.embeddings import HashedGaussianProvider
from variantlab.corpus.store import MemoryCorpusStore


@pytest.fixture
def sim_clock() -> SimClock:
    return SimClock(start=1_700_000_000.0)


@pytest.fixture
def provider() -> HashedGaussianProvider:
    return HashedGaussianProvider(dim=256)


@pytest.fixture
def corpus_store() -> MemoryCorpusStore:
    return MemoryCorpusStore()
