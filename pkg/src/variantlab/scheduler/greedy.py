"""Greedy MAP selection under a determinantal repulsion kernel.

Each scheduling step picks the candidate with the largest marginal
log-determinant gain given everything already processed. The fast path
maintains one orthogonalized row per conditioned seed (cis) and the vector
of conditional variances (di2s), so a step costs O(n * k) instead of a
fresh factorization; a full-refactorization cross-check sits behind the
cross_check flag.

Near-duplicates of processed seeds decay toward the kernel regularizer,
so their gains go strongly negative but never undefined: scheduling
continues until the corpus is exhausted rather than stopping early.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from variantlab.errors import ConfigurationError
from variantlab.scheduler.kernel import KERNEL_EPSILON, build_kernel, embedding_matrix

# Conditional variances clamp here before the log so duplicate chains can
# never produce log(<=0); with the kernel regularizer the exact value stays
# positive, this guards float drift only.
GAIN_FLOOR = 1e-18

# Gains closer than this are a tie, resolved by lexicographic seed id.
TIE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SelectionTrace:
    """Audit record for one scheduling step.

    step is the 0-based position in the full conditioning history, so a
    scheduler warm-started on k processed seeds makes its first pick at
    step k. ties_broken counts candidates tied with the winner.
    """

    step: int
    chosen: str
    marginal_gain: float
    ties_broken: int


class DppScheduler:
    """Stateful greedy selector over a fixed candidate corpus.

    Candidates move to processed exactly once; processed seeds passed to the
    constructor are conditioned on in their historical order, which makes a
    resumed schedule bit-identical to an uninterrupted one.
    """

    def __init__(
        self,
        embeddings: Mapping[str, Sequence[float]],
        *,
        epsilon: float = KERNEL_EPSILON,
        tie_tolerance: float = TIE_TOLERANCE,
        processed: Iterable[str] = (),
        cross_check: bool = False,
    ):
        self._ids, vectors = embedding_matrix(embeddings)
        self._index = {sid: i for i, sid in enumerate(self._ids)}
        self._kernel = build_kernel(vectors, epsilon)
        self._tie_tolerance = tie_tolerance
        self._cross_check = cross_check
        n = len(self._ids)
        self._cis = np.zeros((n, n))
        self._di2 = np.diagonal(self._kernel).copy()
        self._done: list[int] = []
        self._candidate_set: set[int] = set(range(n))
        for sid in processed:
            if sid not in self._index:
                raise ConfigurationError(f"processed seed {sid!r} has no embedding")
            self._condition(self._index[sid])

    @property
    def candidates(self) -> list[str]:
        return sorted(self._ids[i] for i in self._candidate_set)

    @property
    def processed(self) -> list[str]:
        return [self._ids[i] for i in self._done]

    def remaining(self) -> int:
        return len(self._candidate_set)

    def _condition(self, j: int) -> None:
        """Extend the factorization by item j and update all variances."""
        if j not in self._candidate_set:
            raise ConfigurationError(f"seed {self._ids[j]!r} already processed")
        k = len(self._done)
        dj = math.sqrt(max(self._di2[j], GAIN_FLOOR))
        if k == 0:
            eis = self._kernel[j] / dj
        else:
            eis = (self._kernel[j] - self._cis[:k, j] @ self._cis[:k]) / dj
        self._cis[k] = eis
        self._di2 -= eis * eis
        self._candidate_set.discard(j)
        self._done.append(j)

    def _gains(self) -> dict[int, float]:
        return {
            i: math.log(max(self._di2[i], GAIN_FLOOR))
            for i in self._candidate_set
        }

    def _pick(self, gains: dict[int, float]) -> tuple[int, int]:
        best = max(gains.values())
        tied = [i for i, g in gains.items() if best - g <= self._tie_tolerance]
        chosen = min(tied, key=lambda i: self._ids[i])
        return chosen, len(tied) - 1

    def next_seed(self) -> tuple[str, SelectionTrace]:
        """Pick, condition on, and return the next most diverse seed."""
        if not self._candidate_set:
            raise LookupError("no candidates remain")
        gains = self._gains()
        chosen, ties_broken = self._pick(gains)
        if self._cross_check:
            self._verify_against_refactorization(chosen, gains[chosen])
        trace = SelectionTrace(
            step=len(self._done),
            chosen=self._ids[chosen],
            marginal_gain=gains[chosen],
            ties_broken=ties_broken,
        )
        self._condition(chosen)
        return trace.chosen, trace

    def schedule_all(self) -> list[str]:
        """Drain the candidate set; equals repeated next_seed by construction."""
        order = []
        while self._candidate_set:
            seed_id, _ = self.next_seed()
            order.append(seed_id)
        return order

    def _verify_against_refactorization(self, chosen: int, gain: float) -> None:
        oracle_gain = _logdet_gain(self._kernel, self._done, chosen)
        if abs(oracle_gain - gain) > 1e-6:
            raise RuntimeError(
                f"incremental gain {gain!r} for {self._ids[chosen]!r} disagrees "
                f"with refactorized gain {oracle_gain!r}"
            )


def _logdet(kernel: np.ndarray, idx: Sequence[int]) -> float:
    if not idx:
        return 0.0
    sub = kernel[np.ix_(idx, idx)]
    sign, value = np.linalg.slogdet(sub)
    if sign <= 0:
        return -math.inf
    return float(value)


def _logdet_gain(kernel: np.ndarray, done: Sequence[int], candidate: int) -> float:
    base = _logdet(kernel, list(done))
    return _logdet(kernel, list(done) + [candidate]) - base


def brute_force_schedule(
    embeddings: Mapping[str, Sequence[float]],
    *,
    epsilon: float = KERNEL_EPSILON,
    tie_tolerance: float = TIE_TOLERANCE,
    processed: Iterable[str] = (),
) -> list[SelectionTrace]:
    """Reference schedule computed from full determinants at every step.

    Shares only the kernel definition with the incremental path; each
    marginal gain is a difference of two slogdet calls. Intended for small
    corpora (the cost is O(n^2) determinants).
    """
    ids, vectors = embedding_matrix(embeddings)
    index = {sid: i for i, sid in enumerate(ids)}
    kernel = build_kernel(vectors, epsilon)
    done = [index[sid] for sid in processed]
    remaining = sorted(set(range(len(ids))) - set(done))
    traces: list[SelectionTrace] = []
    step = len(done)
    while remaining:
        gains = {i: _logdet_gain(kernel, done, i) for i in remaining}
        best = max(gains.values())
        tied = [i for i, g in gains.items() if best - g <= tie_tolerance]
        chosen = min(tied, key=lambda i: ids[i])
        traces.append(SelectionTrace(step=step, chosen=ids[chosen], marginal_gain=gains[chosen], ties_broken=len(tied) - 1))
        done.append(chosen)
        remaining.remove(chosen)
        step += 1
    return traces
