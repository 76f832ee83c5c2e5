"""Budget-clock warning schedule.

With the defaults (soft 6 h, hard 12 h, fractions 0.5/0.8/0.9, interval
5 min) a run that lasts to the hard limit sees warnings at 3:00, 4:48,
5:24, then 6:00, 6:05, ... 11:55, and is killed at 12:00. A warning fires
iff its scheduled time is strictly before the run's end (natural completion
or hard kill); the kill itself is not a warning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from variantlab.pipeline.models import BudgetClock


@dataclass(frozen=True)
class WarningEvent:
    """One scheduled warning; `at` is seconds since run start."""

    at: float
    kind: str  # "soft_fraction" | "post_soft"
    message: str


def _fraction_message(at: float, budget: BudgetClock) -> str:
    remaining = budget.soft_limit - at
    return (
        f"Time budget warning: {remaining:.0f}s remain before the soft limit "
        f"({budget.soft_limit:.0f}s). Prioritize the most promising direction."
    )


def _post_soft_message(at: float, budget: BudgetClock) -> str:
    remaining = budget.hard_limit - at
    return (
        f"Soft time limit exceeded. Wrap up now and produce your final output; "
        f"the run is killed in {remaining:.0f}s at the hard limit."
    )


def warning_schedule(budget: BudgetClock) -> list[WarningEvent]:
    """All warnings that could ever fire, ordered by time.

    Fraction warnings land at fraction * soft_limit. Post-soft warnings land
    at soft_limit + k * interval for k >= 0, strictly before hard_limit (when
    soft == hard there are none).
    """
    events = [
        WarningEvent(at=f * budget.soft_limit, kind="soft_fraction", message=_fraction_message(f * budget.soft_limit, budget))
        for f in budget.warn_fractions
    ]
    k = 0
    while True:
        # Multiplicative form: no accumulated float drift across steps.
        at = budget.soft_limit + k * budget.post_soft_interval
        if at >= budget.hard_limit:
            break
        events.append(WarningEvent(at=at, kind="post_soft", message=_post_soft_message(at, budget)))
        k += 1
    events.sort(key=lambda e: (e.at, 0 if e.kind == "soft_fraction" else 1))
    return events


def warning_events(budget: BudgetClock, duration: float) -> tuple[list[WarningEvent], bool]:
    """(warnings fired, killed) for a run lasting `duration` seconds.

    A run is killed iff it is still going at the hard limit; warnings fire
    strictly before min(duration, hard_limit).
    """
    killed = duration >= budget.hard_limit
    end = min(duration, budget.hard_limit)
    fired = [e for e in warning_schedule(budget) if e.at < end]
    return fired, killed


def closed_form_warning_count(budget: BudgetClock, duration: float) -> int:
    """Warning count without enumeration; must equal len(warning_events(...)[0]).

    |{f : f * soft < end}| plus, when the run outlives the soft limit, the
    post-soft count |{k >= 0 : soft + k * interval < end}|, which is
    ceil((end - soft) / interval) except that an exact multiple contributes
    itself (the warning coinciding with the end never fires).
    """
    end = min(duration, budget.hard_limit)
    count = sum(1 for f in budget.warn_fractions if f * budget.soft_limit < end)
    if end > budget.soft_limit:
        span = end - budget.soft_limit
        quotient = span / budget.post_soft_interval
        whole = math.floor(quotient + 1e-12)
        post = whole if abs(span - whole * budget.post_soft_interval) <= 1e-9 * max(1.0, span) else whole + 1
        count += post
    return count


class WarningInjector:
    """Stateful helper a stage loop polls between agent turns.

    Returns every not-yet-fired warning whose scheduled time has passed,
    stamped with its scheduled (not observed) time.
    """

    def __init__(self, budget: BudgetClock):
        self._budget = budget
        self._pending = warning_schedule(budget)
        self._next = 0

    def poll(self, elapsed: float) -> list[WarningEvent]:
        due: list[WarningEvent] = []
        while self._next < len(self._pending) and self._pending[self._next].at <= elapsed:
            due.append(self._pending[self._next])
            self._next += 1
        return due

    def past_soft(self, elapsed: float) -> bool:
        return elapsed >= self._budget.soft_limit

    def past_hard(self, elapsed: float) -> bool:
        return elapsed >= self._budget.hard_limit
