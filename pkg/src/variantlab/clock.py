"""Injectable time sources.

Everything that stamps a record or measures elapsed time goes through a
Clock so simulated runs are bit-reproducible.
"""

from __future__ import annotations

import time
from datetime import datetime, timezone
from typing import Protocol


class Clock(Protocol):
    def now(self) -> float:
        """Seconds since the epoch (monotone within one clock instance)."""
        ...


class SystemClock:
    def now(self) -> float:
        return time.time()


class SimClock:
    """Manually advanced clock for deterministic runs and tests."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("clock cannot move backwards")
        self._now += seconds

    def set(self, at: float) -> None:
        if at < self._now:
            raise ValueError("clock cannot move backwards")
        self._now = float(at)


def isoformat(epoch_seconds: float) -> str:
    """Render an epoch timestamp as a UTC ISO-8601 string."""
    return datetime.fromtimestamp(epoch_seconds, tz=timezone.utc).isoformat().replace("+00:00", "Z")
