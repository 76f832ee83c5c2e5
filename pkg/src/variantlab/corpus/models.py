"""Domain records for the reference-bug corpus."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum


class SeedStatus(str, Enum):
    """Tracker disposition of a historical report.

    Only VALID seeds are eligible for campaigns; every other status is an
    exclusion category applied at ingest from tracker labels.
    """

    VALID = "valid"
    DUPLICATE = "duplicate"
    INTENDED_BEHAVIOR = "intended-behavior"
    INFEASIBLE = "infeasible"
    OBSOLETE = "obsolete"
    NON_REPRODUCIBLE = "non-reproducible"


@dataclass(frozen=True)
class SeedArtifacts:
    """Fetched material attached to a seed; absent parts are None, not errors."""

    discussion: str | None = None
    patches: str | None = None
    review: str | None = None
    poc: str | None = None
    fetched_at: str | None = None

    def present(self) -> tuple[str, ...]:
        names = ("discussion", "patches", "review", "poc")
        return tuple(n for n in names if getattr(self, n) is not None)


@dataclass(frozen=True)
class Seed:
    """One historical bug report used as a campaign starting point."""

    id: str
    source: str
    title: str
    created_at: str
    status: SeedStatus = SeedStatus.VALID
    body: str = ""
    labels: tuple[str, ...] = ()
    artifacts: SeedArtifacts = field(default_factory=SeedArtifacts)

    def created_at_key(self) -> datetime:
        return parse_timestamp(self.created_at)

    def with_status(self, status: SeedStatus) -> "Seed":
        return replace(self, status=status)

    def with_artifacts(self, artifacts: SeedArtifacts) -> "Seed":
        return replace(self, artifacts=artifacts)


@dataclass(frozen=True)
class PreAnalysis:
    """Natural-language summary of a seed, produced once and cached.

    The cache key is (seed_id, prompt_version): a prompt change invalidates
    the cached text, nothing else does.
    """

    seed_id: str
    text: str
    prompt_version: str
    produced_by: str
    cost: float = 0.0
    duration: float = 0.0


@dataclass(frozen=True)
class Embedding:
    """Unit-norm vector representation of a seed's pre-analysis."""

    seed_id: str
    vector: tuple[float, ...]
    provider_tag: str

    @property
    def dim(self) -> int:
        return len(self.vector)


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp, accepting a trailing 'Z'."""
    raw = value.strip()
    if raw.endswith("Z"):
        raw = raw[:-1] + "+00:00"
    return datetime.fromisoformat(raw)
