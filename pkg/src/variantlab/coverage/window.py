"""Spatial overlap: same file, line intervals within the tolerance window.

Two intervals overlap when the gap between them is at most WINDOW_LINES
(equivalently: dilate one interval by the window on both ends and test
intersection). A proposed scenario matches an entry when any of its
locations overlaps any entry location this way.
"""

from __future__ import annotations

from typing import Iterable, Protocol, Sequence

from variantlab.coverage.models import CoverageEntry
from variantlab.pipeline.models import Location

WINDOW_LINES = 20


class HasLocations(Protocol):
    locations: Sequence[Location]


def intervals_overlap(a: Location, b: Location, window: int = WINDOW_LINES) -> bool:
    if a.file != b.file:
        return False
    gap = max(0, b.line_start - a.line_end, a.line_start - b.line_end)
    return gap <= window


def locations_overlap(proposed: Sequence[Location], existing: Sequence[Location], window: int = WINDOW_LINES) -> bool:
    return any(intervals_overlap(p, e, window) for p in proposed for e in existing)


def spatial_overlaps(
    proposed: HasLocations,
    entries: Iterable[CoverageEntry],
    window: int = WINDOW_LINES,
) -> list[CoverageEntry]:
    """Entries whose footprint overlaps the proposal, in store order."""
    return [e for e in entries if locations_overlap(proposed.locations, e.locations, window)]
