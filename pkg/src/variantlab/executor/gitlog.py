"""Commit-history shuffle for agent-facing git log output.

Ordering information leaks which change is newest, which biases an agent
toward recency instead of relevance. The wrapper returns a seeded
permutation of the history prefixed by a note saying the ordering is
non-chronological; --no-shuffle restores the original order and drops the
note.
"""

from __future__ import annotations

import random
from typing import Sequence

SHUFFLE_NOTE = (
    "note: commit ordering below is randomized (non-chronological); "
    "do not infer recency from position. Use --no-shuffle for original order."
)


def shuffled_log(history: Sequence[str], no_shuffle: bool = False, run_seed: int | None = None) -> list[str]:
    """Annotated commit list: [note, *shuffled] or the identity with the flag.

    Empty history still emits the note (the reader learns the ordering
    policy even when there is nothing to order).
    """
    entries = list(history)
    if no_shuffle:
        return entries
    random.Random(run_seed).shuffle(entries)
    return [SHUFFLE_NOTE, *entries]
