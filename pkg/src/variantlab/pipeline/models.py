"""Pipeline domain records: runs, scenarios, reports, budget clocks."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any


class Stage(str, Enum):
    ANALYZER = "analyzer"
    INVESTIGATOR = "investigator"
    SCENARIO_ANALYZER = "scenario_analyzer"
    VALIDATOR = "validator"
    COVERAGE_JUDGE = "coverage_judge"
    # Merged stage used by the three- and one-stage pipeline shapes.
    BUG_FINDER = "bug_finder"


class RunOutcome(str, Enum):
    COMPLETED = "completed"
    SOFT_TIMEOUT_WRAPUP = "soft_timeout_wrapup"
    HARD_TIMEOUT_KILLED = "hard_timeout_killed"
    BACKEND_ERROR = "backend_error"


class ScenarioState(str, Enum):
    PROPOSED = "proposed"
    APPROVED = "approved"
    REJECTED_REDUNDANT = "rejected_redundant"
    POC_SUCCESS = "poc_success"
    POC_FAILURE = "poc_failure"
    VALIDATED = "validated"
    REFUTED = "refuted"


# The only legal state machine edges; everything else raises.
_TRANSITIONS: dict[ScenarioState, frozenset[ScenarioState]] = {
    ScenarioState.PROPOSED: frozenset({ScenarioState.APPROVED, ScenarioState.REJECTED_REDUNDANT}),
    ScenarioState.APPROVED: frozenset({ScenarioState.POC_SUCCESS, ScenarioState.POC_FAILURE}),
    ScenarioState.REJECTED_REDUNDANT: frozenset(),
    ScenarioState.POC_SUCCESS: frozenset({ScenarioState.VALIDATED, ScenarioState.REFUTED}),
    ScenarioState.POC_FAILURE: frozenset(),
    ScenarioState.VALIDATED: frozenset(),
    ScenarioState.REFUTED: frozenset(),
}


class StateTransitionError(Exception):
    """Illegal scenario state transition."""


@dataclass(frozen=True)
class Location:
    """A line interval in one file; line numbers are 1-based and inclusive."""

    file: str
    line_start: int
    line_end: int

    def __post_init__(self) -> None:
        if not self.file:
            raise ValueError("location needs a file path")
        if self.line_start < 1 or self.line_end < self.line_start:
            raise ValueError(f"bad line interval: {self.line_start}-{self.line_end}")


@dataclass
class Scenario:
    """A hypothesized vulnerability worth one PoC attempt."""

    id: str
    seed_id: str
    locations: tuple[Location, ...]
    hypothesis: str
    trigger_path: str = ""
    advisory_notes: str = ""
    state: ScenarioState = ScenarioState.PROPOSED
    poc: str | None = None

    def __post_init__(self) -> None:
        if not self.locations:
            raise ValueError("scenario needs at least one location")
        if not self.hypothesis.strip():
            raise ValueError("scenario needs a hypothesis")

    def transition(self, new_state: ScenarioState) -> None:
        if new_state not in _TRANSITIONS[self.state]:
            raise StateTransitionError(f"{self.state.value} -> {new_state.value} is not allowed")
        self.state = new_state


@dataclass(frozen=True)
class AffectedSite:
    file: str
    function: str = ""


@dataclass(frozen=True)
class AnalysisReport:
    """Structured understanding of the original bug (pipeline stage 1 output)."""

    seed_id: str
    root_cause: str
    bug_mechanism: tuple[str, ...]
    impact: str
    fix_description: str
    affected: tuple[AffectedSite, ...] = ()
    vulnerable_snippets: tuple[str, ...] = ()
    patch: str = ""


@dataclass(frozen=True)
class VulnerabilityReport:
    """A validated finding, traceable to its seed and scenario."""

    id: str
    seed_id: str
    scenario_id: str
    title: str
    root_cause: str
    mechanism: str
    poc: str
    release_output: str
    debug_output: str
    suggested_patch: str = ""
    waived_warnings: tuple[str, ...] = ()
    created_at: str = ""


@dataclass
class AgentRun:
    """One conversational run of one stage over one seed."""

    id: str
    stage: Stage
    seed_id: str
    transcript: list[dict[str, Any]] = field(default_factory=list)
    cost: float = 0.0
    input_tokens: int = 0
    output_tokens: int = 0
    wall_time: float = 0.0
    outcome: RunOutcome = RunOutcome.COMPLETED
    retryable: bool = False
    retries: int = 0
    started_at: str = ""

    def add_usage(self, input_tokens: int, output_tokens: int, cost: float) -> None:
        """Accounting is append-only: totals never decrease over a transcript."""
        if input_tokens < 0 or output_tokens < 0 or cost < 0:
            raise ValueError("usage increments must be non-negative")
        self.input_tokens += input_tokens
        self.output_tokens += output_tokens
        self.cost += cost


@dataclass(frozen=True)
class BudgetClock:
    """Per-run time budget: soft wrap-up threshold and hard kill threshold."""

    soft_limit: float = 6 * 3600.0
    hard_limit: float = 12 * 3600.0
    warn_fractions: tuple[float, ...] = (0.5, 0.8, 0.9)
    post_soft_interval: float = 300.0

    def __post_init__(self) -> None:
        if not (0 < self.soft_limit <= self.hard_limit):
            raise ValueError("need 0 < soft_limit <= hard_limit")
        if self.post_soft_interval <= 0:
            raise ValueError("post_soft_interval must be positive")
        previous = 0.0
        for fraction in self.warn_fractions:
            if not (previous < fraction <= 1.0):
                raise ValueError("warn_fractions must be strictly increasing within (0, 1]")
            previous = fraction
