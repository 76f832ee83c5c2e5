"""Semantic redundancy judges.

A judge compares a proposed scenario against one spatially-overlapping
coverage entry and decides whether they describe the same flaw. Judge
unavailability raises JudgeUnavailableError: the gate fails closed and the
caller holds the scenario instead of approving it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from variantlab.coverage.models import CoverageEntry
from variantlab.corpus.embeddings import EmbeddingProvider, normalize
from variantlab.errors import JudgeUnavailableError
from variantlab.pipeline.models import Location

__all__ = [
    "CompletionJudge",
    "EmbeddingThresholdJudge",
    "JudgeSubject",
    "JudgeUnavailableError",
    "JudgeVerdict",
    "ScriptedJudge",
    "SemanticJudge",
    "FALLBACK_SIMILARITY_THRESHOLD",
]

# Fallback judge: cosine similarity of hypothesis embeddings at or above
# this threshold means redundant.
FALLBACK_SIMILARITY_THRESHOLD = 0.85


@dataclass(frozen=True)
class JudgeVerdict:
    redundant: bool
    rationale: str


@dataclass(frozen=True)
class JudgeSubject:
    """What a judge sees of each side: hypothesis plus location list."""

    hypothesis: str
    locations: tuple[Location, ...]


class SemanticJudge(Protocol):
    def compare(self, proposed: JudgeSubject, entry: CoverageEntry) -> JudgeVerdict: ...


class EmbeddingThresholdJudge:
    """Deterministic fallback: embed both hypotheses, threshold the cosine."""

    def __init__(self, provider: EmbeddingProvider, threshold: float = FALLBACK_SIMILARITY_THRESHOLD):
        self._provider = provider
        self._threshold = threshold

    def similarity(self, first: str, second: str) -> float:
        a = np.asarray(normalize(self._provider.embed(first)))
        b = np.asarray(normalize(self._provider.embed(second)))
        return float(np.dot(a, b))

    def compare(self, proposed: JudgeSubject, entry: CoverageEntry) -> JudgeVerdict:
        similarity = self.similarity(proposed.hypothesis, entry.hypothesis)
        redundant = similarity >= self._threshold
        return JudgeVerdict(
            redundant=redundant,
            rationale=(
                f"hypothesis embedding cosine {similarity:.4f} "
                f"{'>=' if redundant else '<'} threshold {self._threshold:.2f}"
            ),
        )


class ScriptedJudge:
    """Fixture judge for tests: explicit verdicts per hypothesis pair.

    Unlisted pairs fall through to `fallback` when given, else to distinct.
    An empty `available` flag simulates outage.
    """

    def __init__(
        self,
        redundant_pairs: Sequence[tuple[str, str]] = (),
        fallback: SemanticJudge | None = None,
        available: bool = True,
    ):
        self._pairs = {frozenset(p) for p in redundant_pairs}
        self._fallback = fallback
        self.available = available

    def compare(self, proposed: JudgeSubject, entry: CoverageEntry) -> JudgeVerdict:
        if not self.available:
            raise JudgeUnavailableError("scripted judge marked unavailable")
        if frozenset((proposed.hypothesis, entry.hypothesis)) in self._pairs:
            return JudgeVerdict(True, "scripted: same root cause")
        if self._fallback is not None:
            return self._fallback.compare(proposed, entry)
        return JudgeVerdict(False, "scripted: no match listed")


class CallableJudge:
    """Adapter for judge backends exposed as a plain callable."""

    def __init__(self, fn: Callable[[JudgeSubject, CoverageEntry], JudgeVerdict]):
        self._fn = fn

    def compare(self, proposed: JudgeSubject, entry: CoverageEntry) -> JudgeVerdict:
        return self._fn(proposed, entry)


def _render_subject(hypothesis: str, locations: Sequence[Location]) -> str:
    spans = ", ".join(f"{l.file}:{l.line_start}-{l.line_end}" for l in locations)
    return f"{hypothesis}\nLocations: {spans}"


class CompletionJudge:
    """Judge backed by a single-shot text completion (typically an LLM).

    `complete(prompt) -> str` must return a JSON object with boolean
    `redundant` and string `rationale`. Transport failures and malformed
    answers both raise JudgeUnavailableError: a judge that cannot answer
    reliably must not approve anything.
    """

    def __init__(self, complete: Callable[[str], str], template: str):
        self._complete = complete
        self._template = template

    def compare(self, proposed: JudgeSubject, entry: CoverageEntry) -> JudgeVerdict:
        # Plain replacement: the template holds literal JSON braces.
        prompt = self._template.replace(
            "{entry}", _render_subject(entry.hypothesis, entry.locations)
        ).replace("{proposed}", _render_subject(proposed.hypothesis, proposed.locations))
        try:
            answer = self._complete(prompt)
        except Exception as exc:  # transport errors are the caller's contract
            raise JudgeUnavailableError(f"judge completion failed: {exc}") from exc
        try:
            data = json.loads(answer)
            return JudgeVerdict(redundant=bool(data["redundant"]), rationale=str(data.get("rationale", "")))
        except (ValueError, KeyError, TypeError) as exc:
            raise JudgeUnavailableError(f"judge answer unparseable: {exc}") from exc
