"""Baseline scheduling strategies used as experiment controls."""

from __future__ import annotations

import random
from typing import Sequence

from variantlab.corpus.models import Seed
from variantlab.errors import ConfigurationError

STRATEGIES = ("dpp-map", "newest-first", "random")


def baseline_order(strategy: str, seeds: Sequence[Seed], run_seed: int | None = None) -> list[str]:
    """Full processing order for a non-DPP strategy.

    newest-first: descending created_at, ties by id ascending.
    random: reproducible shuffle from run_seed.
    """
    if strategy == "newest-first":
        by_id = sorted(seeds, key=lambda s: s.id)
        ordered = sorted(by_id, key=lambda s: s.created_at_key(), reverse=True)
        return [s.id for s in ordered]
    if strategy == "random":
        if run_seed is None:
            raise ConfigurationError("random strategy requires a run seed")
        ids = sorted(s.id for s in seeds)
        random.Random(run_seed).shuffle(ids)
        return ids
    raise ConfigurationError(f"unknown baseline strategy: {strategy!r}")
