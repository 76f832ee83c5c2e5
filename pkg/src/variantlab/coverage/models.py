"""Coverage store records and gate decisions."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from variantlab.pipeline.models import Location


class Verdict(str, Enum):
    APPROVED = "approved"
    REJECTED_REDUNDANT = "rejected_redundant"


@dataclass(frozen=True)
class CoverageEntry:
    """One approved scenario's footprint; the store is append-only."""

    entry_id: str
    locations: tuple[Location, ...]
    hypothesis: str
    origin_seed_id: str
    approved_at: str


@dataclass(frozen=True)
class OverlapDecision:
    """Outcome of the coverage gate for one proposed scenario."""

    verdict: Verdict
    spatial_matches: tuple[str, ...] = ()  # entry ids that overlapped spatially
    semantic_match: str | None = None  # entry id the judge called redundant
    judge_rationale: str = ""
    entry_id: str | None = None  # entry recorded on approval

    @property
    def approved(self) -> bool:
        return self.verdict is Verdict.APPROVED
