"""Per-seed pipeline orchestration.

Three composition shapes over the same stage machinery:

  four   analyzer -> investigator -> scenario_analyzer (per approved
         scenario) -> validator (per successful PoC)
  three  analyzer -> bug_finder (investigation and reproduction merged)
         -> validator
  one    bug_finder (everything merged, including final validation)

A merged stage takes the union of the tool surfaces it absorbs, and the
orchestrator applies the same evidence and state-machine enforcement to
its output that the dedicated stages would have applied.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Protocol

from variantlab import assets
from variantlab.corpus.models import Seed
from variantlab.errors import ConfigurationError
from variantlab.pipeline.models import (
    AgentRun,
    AnalysisReport,
    RunOutcome,
    Scenario,
    ScenarioState,
    Stage,
    VulnerabilityReport,
)
from variantlab.pipeline.outputs import parse_finder_results, parse_validation
from variantlab.pipeline.stages import (
    ExecutionLedger,
    PipelineDeps,
    ScenarioBook,
    StageLoop,
    _artifact_fetch_callback,
    _workspace_registry,
    assess_validation,
    combined_output,
    render_analysis,
    render_seed,
    run_analyzer,
    run_investigator,
    run_scenario_analyzer,
    run_validator,
)
from variantlab.pipeline.tools import add_artifact_tool, add_execute_tool, add_scenario_tool
from variantlab.clock import isoformat

PIPELINE_SHAPES = ("four", "three", "one")


@dataclass(frozen=True)
class PipelineConfig:
    shape: str = "four"
    scenario_cap: int = 8
    scenario_parallelism: int = 1
    validator_fresh_workspace: bool = True

    def __post_init__(self) -> None:
        if self.shape not in PIPELINE_SHAPES:
            raise ConfigurationError(f"unknown pipeline shape {self.shape!r}; expected one of {PIPELINE_SHAPES}")
        if self.scenario_cap < 1:
            raise ConfigurationError("scenario_cap must be >= 1")
        if self.scenario_parallelism < 1:
            raise ConfigurationError("scenario_parallelism must be >= 1")


class PipelineSink(Protocol):
    """Persistence hooks; every callback upserts by id."""

    def record_run(self, run: AgentRun) -> None: ...

    def record_scenario(self, scenario: Scenario) -> None: ...

    def record_report(self, report: VulnerabilityReport) -> None: ...


class NullSink:
    def record_run(self, run: AgentRun) -> None:
        pass

    def record_scenario(self, scenario: Scenario) -> None:
        pass

    def record_report(self, report: VulnerabilityReport) -> None:
        pass


class MemorySink:
    """Collects records in memory; thread-safe, keyed by id."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.runs: dict[str, AgentRun] = {}
        self.scenarios: dict[str, Scenario] = {}
        self.reports: dict[str, VulnerabilityReport] = {}

    def record_run(self, run: AgentRun) -> None:
        with self._lock:
            self.runs[run.id] = run

    def record_scenario(self, scenario: Scenario) -> None:
        with self._lock:
            self.scenarios[scenario.id] = scenario

    def record_report(self, report: VulnerabilityReport) -> None:
        with self._lock:
            self.reports[report.id] = report


@dataclass
class SeedOutcome:
    """Everything one seed's pass through the pipeline produced."""

    seed_id: str
    status: str = "completed"  # completed | analyzer_failed | partial
    stage_trace: list[dict[str, Any]] = field(default_factory=list)
    runs: list[AgentRun] = field(default_factory=list)
    scenarios: list[Scenario] = field(default_factory=list)
    reports: list[VulnerabilityReport] = field(default_factory=list)

    @property
    def cost(self) -> float:
        return sum(run.cost for run in self.runs)

    @property
    def agent_seconds(self) -> float:
        """Total stage-run time; sequential-equivalent, not wall-clock."""
        return sum(run.wall_time for run in self.runs)

    def record(self, run: AgentRun) -> None:
        self.runs.append(run)
        self.stage_trace.append({"stage": run.stage.value, "run_id": run.id, "outcome": run.outcome.value})


class _RunIds:
    """Deterministic per-seed run ids: {seed}/{stage}-{ordinal per stage}."""

    def __init__(self, seed_id: str):
        self._seed_id = seed_id
        self._counts: dict[str, int] = {}
        self._lock = threading.Lock()

    def next(self, stage: Stage) -> str:
        with self._lock:
            n = self._counts.get(stage.value, 0) + 1
            self._counts[stage.value] = n
            return f"{self._seed_id}/{stage.value}-{n}"


def _finish(outcome: SeedOutcome, sink: PipelineSink) -> SeedOutcome:
    bad = {RunOutcome.HARD_TIMEOUT_KILLED, RunOutcome.BACKEND_ERROR}
    if outcome.status == "completed" and any(run.outcome in bad for run in outcome.runs):
        outcome.status = "partial"
    for scenario in outcome.scenarios:
        sink.record_scenario(scenario)
    return outcome


def _run_bug_finder_three(
    seed: Seed,
    analysis: AnalysisReport,
    deps: PipelineDeps,
    run_id: str,
    scenario_cap: int,
) -> tuple[ScenarioBook, ExecutionLedger, Any, AgentRun]:
    workspace = deps.workspaces.provision(f"{seed.id}-bugfinder")
    book = ScenarioBook(seed.id, deps.gate, scenario_cap)
    ledger = ExecutionLedger(deps)
    try:
        registry = _workspace_registry(deps, workspace)
        add_scenario_tool(registry, book.submit)
        add_execute_tool(registry, ledger.execute)
        result = StageLoop(deps).run(
            stage=Stage.BUG_FINDER,
            seed_id=seed.id,
            run_id=run_id,
            system_prompt=assets.load_prompt("bug_finder"),
            initial_message="Analysis of the original bug:\n" + render_analysis(analysis),
            registry=registry,
            parse=parse_finder_results,
            context_id="three",
        )
        if book.gate_unavailable:
            result.run.retryable = True
        return book, ledger, result.parsed, result.run
    finally:
        deps.workspaces.release(workspace)


def _apply_finder_results(book: ScenarioBook, ledger: ExecutionLedger, parsed: Any, run: AgentRun) -> None:
    """Move approved scenarios per the merged stage's claims, evidence-checked."""
    claimed: dict[str, dict[str, Any]] = {}
    if parsed is not None:
        for item in parsed["scenario_results"]:
            claimed[item["scenario_id"]] = item
    for scenario in book.approved():
        claim = claimed.get(scenario.id)
        if claim is not None and claim["status"] == "success" and ledger.has_evidence(claim["poc"]):
            scenario.poc = claim["poc"]
            scenario.transition(ScenarioState.POC_SUCCESS)
        else:
            if claim is not None and claim["status"] == "success":
                run.transcript.append(
                    {"type": "note", "content": f"success claim for {scenario.id} had no evidence-bearing execution; recorded as failure", "at": run.wall_time}
                )
            scenario.transition(ScenarioState.POC_FAILURE)


def _run_bug_finder_one(
    seed: Seed,
    deps: PipelineDeps,
    run_id: str,
    scenario_cap: int,
) -> tuple[ScenarioBook, VulnerabilityReport | None, AgentRun]:
    workspace = deps.workspaces.provision(f"{seed.id}-bugfinder")
    book = ScenarioBook(seed.id, deps.gate, scenario_cap)
    ledger = ExecutionLedger(deps)
    try:
        registry = _workspace_registry(deps, workspace)
        if deps.fetcher is not None:
            add_artifact_tool(registry, _artifact_fetch_callback(seed, deps))
        add_scenario_tool(registry, book.submit)
        add_execute_tool(registry, ledger.execute)
        result = StageLoop(deps).run(
            stage=Stage.BUG_FINDER,
            seed_id=seed.id,
            run_id=run_id,
            system_prompt=assets.load_prompt("bug_finder"),
            initial_message=render_seed(seed, with_artifact_note=deps.fetcher is not None),
            registry=registry,
            parse=parse_validation,
            context_id="one",
        )
        run = result.run
        if book.gate_unavailable:
            run.retryable = True
        parsed = result.parsed
        if parsed is None:
            for scenario in book.approved():
                scenario.transition(ScenarioState.POC_FAILURE)
            return book, None, run
        scenario = book.by_id(parsed["scenario_id"]) if parsed["scenario_id"] else None
        report: VulnerabilityReport | None = None
        for candidate in book.approved():
            if candidate is scenario:
                continue
            candidate.transition(ScenarioState.POC_FAILURE)
        if scenario is not None and scenario.state is ScenarioState.APPROVED:
            if parsed["poc"] and ledger.has_evidence(parsed["poc"]):
                scenario.poc = parsed["poc"]
                scenario.transition(ScenarioState.POC_SUCCESS)
                ok, reason, release_exec, debug_exec = assess_validation(parsed, ledger, scenario)
                if ok:
                    assert release_exec is not None and debug_exec is not None
                    report = VulnerabilityReport(
                        id=f"{scenario.id}/report",
                        seed_id=seed.id,
                        scenario_id=scenario.id,
                        title=parsed["title"],
                        root_cause=parsed["root_cause"],
                        mechanism=parsed["mechanism"],
                        poc=parsed["poc"],
                        release_output=combined_output(release_exec),
                        debug_output=combined_output(debug_exec),
                        suggested_patch=parsed["suggested_patch"],
                        waived_warnings=tuple(parsed["waived_warnings"]),
                        created_at=isoformat(deps.clock.now()),
                    )
                    scenario.transition(ScenarioState.VALIDATED)
                else:
                    scenario.transition(ScenarioState.REFUTED)
                    run.transcript.append({"type": "note", "content": f"refuted: {reason}", "at": run.wall_time})
            else:
                scenario.transition(ScenarioState.POC_FAILURE)
        return book, report, run
    finally:
        deps.workspaces.release(workspace)


def _reproduce_and_validate(
    seed: Seed,
    scenario: Scenario,
    analysis: AnalysisReport,
    deps: PipelineDeps,
    config: PipelineConfig,
    ids: _RunIds,
    sink: PipelineSink,
    outcome: SeedOutcome,
    lock: threading.Lock,
) -> None:
    run3, kept_workspace = run_scenario_analyzer(seed, scenario, analysis, deps, ids.next(Stage.SCENARIO_ANALYZER))
    with lock:
        outcome.record(run3)
        sink.record_run(run3)
        sink.record_scenario(scenario)
    reuse = None
    if kept_workspace is not None:
        if config.validator_fresh_workspace:
            deps.workspaces.release(kept_workspace)
        else:
            reuse = kept_workspace
    if scenario.state is not ScenarioState.POC_SUCCESS:
        return
    report, run4 = run_validator(seed, scenario, deps, ids.next(Stage.VALIDATOR), reuse_workspace=reuse)
    with lock:
        outcome.record(run4)
        sink.record_run(run4)
        sink.record_scenario(scenario)
        if report is not None:
            outcome.reports.append(report)
            sink.record_report(report)


def run_pipeline(
    seed: Seed,
    deps: PipelineDeps,
    config: PipelineConfig | None = None,
    sink: PipelineSink | None = None,
) -> SeedOutcome:
    """Run one seed through the configured pipeline shape."""
    config = config or PipelineConfig()
    sink = sink or NullSink()
    ids = _RunIds(seed.id)
    outcome = SeedOutcome(seed_id=seed.id)
    lock = threading.Lock()

    if config.shape == "one":
        book, report, run = _run_bug_finder_one(seed, deps, ids.next(Stage.BUG_FINDER), config.scenario_cap)
        outcome.record(run)
        sink.record_run(run)
        outcome.scenarios = book.scenarios
        if report is not None:
            outcome.reports.append(report)
            sink.record_report(report)
        return _finish(outcome, sink)

    analysis, run1 = run_analyzer(seed, deps, ids.next(Stage.ANALYZER))
    outcome.record(run1)
    sink.record_run(run1)
    if analysis is None:
        outcome.status = "analyzer_failed"
        return _finish(outcome, sink)

    if config.shape == "three":
        book, ledger, parsed, run2 = _run_bug_finder_three(seed, analysis, deps, ids.next(Stage.BUG_FINDER), config.scenario_cap)
        outcome.record(run2)
        sink.record_run(run2)
        outcome.scenarios = book.scenarios
        _apply_finder_results(book, ledger, parsed, run2)
        for scenario in book.scenarios:
            sink.record_scenario(scenario)
        successes = [s for s in book.scenarios if s.state is ScenarioState.POC_SUCCESS]
        for scenario in successes:
            report, run4 = run_validator(seed, scenario, deps, ids.next(Stage.VALIDATOR))
            outcome.record(run4)
            sink.record_run(run4)
            sink.record_scenario(scenario)
            if report is not None:
                outcome.reports.append(report)
                sink.record_report(report)
        return _finish(outcome, sink)

    # Four-stage shape.
    book, run2 = run_investigator(seed, analysis, deps, ids.next(Stage.INVESTIGATOR), scenario_cap=config.scenario_cap)
    outcome.record(run2)
    sink.record_run(run2)
    outcome.scenarios = book.scenarios
    for scenario in book.scenarios:
        sink.record_scenario(scenario)
    approved = book.approved()
    if config.scenario_parallelism > 1 and len(approved) > 1:
        with ThreadPoolExecutor(max_workers=config.scenario_parallelism) as pool:
            futures = [
                pool.submit(_reproduce_and_validate, seed, s, analysis, deps, config, ids, sink, outcome, lock)
                for s in approved
            ]
            for future in futures:
                future.result()
    else:
        for scenario in approved:
            _reproduce_and_validate(seed, scenario, analysis, deps, config, ids, sink, outcome, lock)
    return _finish(outcome, sink)
