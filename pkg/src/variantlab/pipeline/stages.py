"""The agent turn loop and the per-stage run functions.

The loop owns everything the agent cannot be trusted with: time-warning
injection between turns, the hard kill, tool dispatch against the
stage's registry, usage accounting, and final-output validation with
exactly one repair re-prompt. Backends only ever see messages in, one
turn out.

Enforcement notes, because they shape the state machine:
  - A reproduction claim only counts if the exact claimed PoC source
    produced evidence in an execution this run performed.
  - Validation requires fresh executions of the scenario's PoC in both
    release and debug, at least one bearing evidence, and every policy
    warning on those executions explicitly waived.
  - A gate outage never fails a proposal: the scenario is held in
    proposed state and the run is marked retryable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable

from variantlab.clock import Clock, SimClock, isoformat
from variantlab.corpus.fetch import ArtifactFetcher, FetchRetryableError, fetch_artifacts
from variantlab.corpus.models import PreAnalysis, Seed, SeedStatus
from variantlab.corpus.store import CorpusStore
from variantlab.errors import ConfigurationError, InfrastructureError, JudgeUnavailableError
from variantlab.executor.policy import ThreatModelPolicy
from variantlab.executor.run import BuildMatrix, ExecutionRequest, ExecutionResult, Runner, execute, result_to_doc
from variantlab.pipeline.backend import AgentBackend, BackendScriptError, PriceTable, TurnRequest
from variantlab.pipeline.models import (
    AgentRun,
    AnalysisReport,
    BudgetClock,
    Location,
    RunOutcome,
    Scenario,
    ScenarioState,
    Stage,
    VulnerabilityReport,
)
from variantlab.pipeline.outputs import (
    StageOutputError,
    parse_analysis,
    parse_investigation_summary,
    parse_scenario_result,
    parse_validation,
)
from variantlab.pipeline.timeouts import WarningInjector
from variantlab.pipeline.tools import (
    ToolError,
    ToolRegistry,
    add_artifact_tool,
    add_execute_tool,
    add_scenario_tool,
    add_workspace_tools,
)
from variantlab.pipeline.workspace import LocalSandboxDriver, Workspace, WorkspaceDriver
from variantlab import assets

if TYPE_CHECKING:
    from variantlab.coverage.tracker import CoverageTracker


@dataclass
class PipelineDeps:
    """Infrastructure a pipeline needs; pure wiring, no behavior."""

    backend: AgentBackend
    budget: BudgetClock
    clock: Clock
    gate: CoverageTracker
    policy: ThreatModelPolicy
    runner: Runner
    matrix: BuildMatrix
    workspaces: WorkspaceDriver = field(default_factory=LocalSandboxDriver)
    fetcher: ArtifactFetcher | None = None
    corpus: CorpusStore | None = None
    prices: PriceTable = field(default_factory=PriceTable)
    effort: str = "medium"
    run_seed: int | None = None
    max_turns: int = 500


@dataclass
class StageRun:
    run: AgentRun
    parsed: Any | None


class StageLoop:
    def __init__(self, deps: PipelineDeps):
        self._deps = deps

    def _tick(self, seconds: float) -> None:
        # Simulated clocks are driven by declared turn durations; a real
        # clock advances on its own while the backend call blocks.
        clock = self._deps.clock
        if isinstance(clock, SimClock) and seconds > 0:
            clock.advance(seconds)

    def run(
        self,
        *,
        stage: Stage,
        seed_id: str,
        run_id: str,
        system_prompt: str,
        initial_message: str,
        registry: ToolRegistry,
        parse: Callable[[str], Any],
        context_id: str = "",
    ) -> StageRun:
        deps = self._deps
        run = AgentRun(id=run_id, stage=stage, seed_id=seed_id, started_at=isoformat(deps.clock.now()))
        injector = WarningInjector(deps.budget)
        started = deps.clock.now()
        messages: list[dict[str, Any]] = [{"role": "user", "content": initial_message}]
        run.transcript.append({"type": "user", "content": initial_message, "at": 0.0})
        repair_used = False
        parsed: Any | None = None

        def inject_warnings(elapsed: float) -> None:
            for event in injector.poll(elapsed):
                if event.at >= deps.budget.hard_limit:
                    continue  # nothing fires at or after the kill instant
                run.transcript.append({"type": "warning", "kind": event.kind, "message": event.message, "at": event.at})
                messages.append({"role": "user", "content": event.message})

        def kill(elapsed: float) -> None:
            inject_warnings(min(elapsed, deps.budget.hard_limit))
            run.transcript.append({"type": "kill", "at": deps.budget.hard_limit, "message": "hard time limit reached; run killed"})
            run.outcome = RunOutcome.HARD_TIMEOUT_KILLED
            run.wall_time = deps.budget.hard_limit

        for _ in range(deps.max_turns):
            elapsed = deps.clock.now() - started
            if injector.past_hard(elapsed):
                kill(elapsed)
                return StageRun(run, None)
            inject_warnings(elapsed)
            request = TurnRequest(
                stage=stage,
                seed_id=seed_id,
                system_prompt=system_prompt,
                messages=tuple(messages),
                tools=registry.specs(),
                effort=deps.effort,
                context_id=context_id,
            )
            try:
                turn = deps.backend.step(request)
            except (BackendScriptError, InfrastructureError) as exc:
                elapsed = deps.clock.now() - started
                run.transcript.append({"type": "error", "content": str(exc), "at": elapsed})
                run.outcome = RunOutcome.BACKEND_ERROR
                run.retryable = True
                run.wall_time = elapsed
                return StageRun(run, None)
            self._tick(turn.duration)
            elapsed = deps.clock.now() - started
            run.add_usage(turn.usage.input_tokens, turn.usage.output_tokens, deps.prices.cost(turn.usage))
            if injector.past_hard(elapsed):
                # The turn straddled the hard limit: its content is lost.
                kill(elapsed)
                return StageRun(run, None)
            if turn.tool_call is not None:
                call = turn.tool_call
                run.transcript.append({"type": "assistant", "tool": {"name": call.name, "arguments": call.arguments}, "at": elapsed})
                messages.append({"role": "assistant", "tool": {"name": call.name, "arguments": call.arguments}})
                result = registry.dispatch(call.name, call.arguments)
                run.transcript.append({"type": "tool_result", "name": call.name, "content": result.content, "error": result.error, "at": elapsed})
                messages.append({"role": "tool", "name": call.name, "content": result.content})
                continue
            text = turn.text or ""
            run.transcript.append({"type": "assistant", "text": text, "at": elapsed})
            messages.append({"role": "assistant", "content": text})
            try:
                parsed = parse(text)
            except StageOutputError as exc:
                if not repair_used:
                    repair_used = True
                    run.retries += 1
                    repair = f"Your final output failed validation: {exc}. Reply again with only the corrected JSON document."
                    run.transcript.append({"type": "user", "content": repair, "at": elapsed})
                    messages.append({"role": "user", "content": repair})
                    continue
                run.transcript.append({"type": "error", "content": f"final output still invalid after repair: {exc}", "at": elapsed})
                run.outcome = RunOutcome.BACKEND_ERROR
                run.wall_time = elapsed
                return StageRun(run, None)
            run.outcome = RunOutcome.SOFT_TIMEOUT_WRAPUP if injector.past_soft(elapsed) else RunOutcome.COMPLETED
            run.wall_time = elapsed
            return StageRun(run, parsed)
        elapsed = deps.clock.now() - started
        run.transcript.append({"type": "error", "content": f"turn limit ({deps.max_turns}) reached", "at": elapsed})
        run.outcome = RunOutcome.BACKEND_ERROR
        run.wall_time = elapsed
        return StageRun(run, None)


# ---------------------------------------------------------------------------
# Sessions shared between tool handlers and stage post-processing.


class ScenarioBook:
    """Scenarios submitted through the coverage gate during one run."""

    def __init__(self, seed_id: str, gate: CoverageTracker, cap: int):
        self._seed_id = seed_id
        self._gate = gate
        self._cap = cap
        self.scenarios: list[Scenario] = []
        self.gate_unavailable = False

    def _build_locations(self, raw: list[Any]) -> tuple[Location, ...]:
        locations = []
        for item in raw:
            if not isinstance(item, dict):
                raise ToolError("each location must be an object with file/line_start/line_end")
            try:
                locations.append(Location(str(item.get("file", "")), int(item.get("line_start", 0)), int(item.get("line_end", 0))))
            except (TypeError, ValueError) as exc:
                raise ToolError(f"bad location: {exc}") from exc
        return tuple(locations)

    def submit(self, *, locations: list[Any], hypothesis: str, trigger_path: str, advisory_notes: str) -> dict[str, Any]:
        if len(self.scenarios) >= self._cap:
            return {"decision": "cap_exhausted", "error": f"scenario cap ({self._cap}) reached; finalize with what you have"}
        built = self._build_locations(locations)
        scenario = Scenario(
            id=f"{self._seed_id}/scn-{len(self.scenarios) + 1}",
            seed_id=self._seed_id,
            locations=built,
            hypothesis=hypothesis,
            trigger_path=trigger_path,
            advisory_notes=advisory_notes,
        )
        try:
            decision = self._gate.check_and_record(scenario, origin_seed_id=self._seed_id, entry_id=scenario.id)
        except JudgeUnavailableError as exc:
            self.gate_unavailable = True
            self.scenarios.append(scenario)  # stays proposed; retried later
            return {"decision": "held", "scenario_id": scenario.id, "error": f"coverage gate unavailable ({exc}); scenario held"}
        if decision.approved:
            scenario.transition(ScenarioState.APPROVED)
            self.scenarios.append(scenario)
            return {"decision": "approved", "scenario_id": scenario.id, "entry_id": decision.entry_id}
        scenario.transition(ScenarioState.REJECTED_REDUNDANT)
        self.scenarios.append(scenario)
        return {
            "decision": "rejected_redundant",
            "scenario_id": scenario.id,
            "matched_entry": decision.semantic_match,
            "rationale": decision.judge_rationale,
        }

    def approved(self) -> list[Scenario]:
        return [s for s in self.scenarios if s.state is ScenarioState.APPROVED]

    def by_id(self, scenario_id: str) -> Scenario | None:
        for scenario in self.scenarios:
            if scenario.id == scenario_id:
                return scenario
        return None


@dataclass(frozen=True)
class ExecutionRecord:
    request: ExecutionRequest
    result: ExecutionResult


class ExecutionLedger:
    """Executions performed during one run, for post-hoc evidence checks."""

    def __init__(self, deps: PipelineDeps):
        self._deps = deps
        self.records: list[ExecutionRecord] = []

    def execute(self, *, poc: str, build: str, architecture: str, extra_flags: tuple[str, ...], timeout: float | None) -> dict[str, Any]:
        try:
            request = ExecutionRequest(poc=poc, build=build, architecture=architecture, extra_flags=extra_flags, timeout=timeout)
        except ValueError as exc:
            raise ToolError(str(exc)) from exc
        try:
            result = execute(request, self._deps.policy, self._deps.runner, self._deps.matrix)
        except ConfigurationError as exc:
            raise ToolError(str(exc)) from exc
        self.records.append(ExecutionRecord(request, result))
        return result_to_doc(result)

    def of_poc(self, poc: str, build: str | None = None) -> list[ExecutionRecord]:
        return [
            r
            for r in self.records
            if r.request.poc == poc and (build is None or r.request.build == build)
        ]

    def has_evidence(self, poc: str) -> bool:
        return any(r.result.evidence.value != "none" for r in self.of_poc(poc))


def combined_output(record: ExecutionRecord) -> str:
    parts = [p for p in (record.result.stdout, record.result.stderr) if p]
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# Rendering helpers: what each stage sees in its opening message.


def render_seed(seed: Seed, with_artifact_note: bool = False) -> str:
    lines = [
        f"Seed bug {seed.id}: {seed.title}",
        f"Source: {seed.source}",
        f"Reported: {seed.created_at}",
        f"Labels: {', '.join(seed.labels) if seed.labels else '(none)'}",
        "",
        seed.body,
    ]
    if with_artifact_note:
        lines += ["", "Original-bug artifacts (discussion, patches, review, PoC) are available via the fetch_artifacts tool."]
    return "\n".join(lines)


def render_analysis(report: AnalysisReport) -> str:
    return json.dumps(
        {
            "seed_id": report.seed_id,
            "root_cause": report.root_cause,
            "bug_mechanism": list(report.bug_mechanism),
            "impact": report.impact,
            "fix_description": report.fix_description,
            "affected": [{"file": a.file, "function": a.function} for a in report.affected],
            "vulnerable_snippets": list(report.vulnerable_snippets),
        },
        indent=2,
        sort_keys=True,
    )


def render_scenario(scenario: Scenario) -> str:
    return json.dumps(
        {
            "scenario_id": scenario.id,
            "seed_id": scenario.seed_id,
            "hypothesis": scenario.hypothesis,
            "locations": [{"file": l.file, "line_start": l.line_start, "line_end": l.line_end} for l in scenario.locations],
            "trigger_path": scenario.trigger_path,
            "advisory_notes": scenario.advisory_notes,
        },
        indent=2,
        sort_keys=True,
    )


def _artifact_fetch_callback(seed: Seed, deps: PipelineDeps) -> Callable[[], dict[str, Any]]:
    def fetch() -> dict[str, Any]:
        assert deps.fetcher is not None
        try:
            updated = fetch_artifacts(seed, deps.fetcher, deps.corpus, deps.clock)
        except FetchRetryableError as exc:
            raise ToolError(f"artifact fetch failed transiently: {exc}; try again") from exc
        if updated.status is SeedStatus.OBSOLETE and not updated.artifacts.present():
            raise ToolError("the seed source is gone; the seed has been marked obsolete")
        art = updated.artifacts
        return {
            "discussion": art.discussion or "",
            "patches": art.patches or "",
            "review": art.review or "",
            "poc": art.poc or "",
            "fetched_at": art.fetched_at or "",
        }

    return fetch


def _workspace_registry(deps: PipelineDeps, workspace: Workspace) -> ToolRegistry:
    registry = ToolRegistry()
    add_workspace_tools(registry, workspace.checkout, run_seed=deps.run_seed)
    return registry


# ---------------------------------------------------------------------------
# Stage entry points.


def run_preanalysis(seed: Seed, deps: PipelineDeps) -> PreAnalysis:
    """Single-turn summarization used for embedding; no tools, no loop."""
    request = TurnRequest(
        stage=Stage.ANALYZER,
        seed_id=seed.id,
        system_prompt=assets.load_prompt("preanalysis"),
        messages=({"role": "user", "content": render_seed(seed)},),
        tools=(),
        effort="low",
        context_id="preanalysis",
    )
    turn = deps.backend.step(request)
    if turn.text is None:
        raise InfrastructureError("preanalysis backend answered with a tool call; expected text")
    return PreAnalysis(
        seed_id=seed.id,
        text=turn.text.strip(),
        prompt_version=assets.PROMPT_VERSION,
        produced_by=f"{seed.id}/preanalysis",
        cost=deps.prices.cost(turn.usage),
        duration=turn.duration,
    )


def run_analyzer(seed: Seed, deps: PipelineDeps, run_id: str) -> tuple[AnalysisReport | None, AgentRun]:
    workspace = deps.workspaces.provision(f"{seed.id}-analyzer")
    try:
        registry = _workspace_registry(deps, workspace)
        if deps.fetcher is not None:
            add_artifact_tool(registry, _artifact_fetch_callback(seed, deps))
        result = StageLoop(deps).run(
            stage=Stage.ANALYZER,
            seed_id=seed.id,
            run_id=run_id,
            system_prompt=assets.load_prompt("analyzer"),
            initial_message=render_seed(seed, with_artifact_note=deps.fetcher is not None),
            registry=registry,
            parse=lambda text: parse_analysis(text, seed.id),
        )
        return result.parsed, result.run
    finally:
        deps.workspaces.release(workspace)


def run_investigator(
    seed: Seed,
    analysis: AnalysisReport,
    deps: PipelineDeps,
    run_id: str,
    *,
    scenario_cap: int = 8,
) -> tuple[ScenarioBook, AgentRun]:
    workspace = deps.workspaces.provision(f"{seed.id}-investigator")
    book = ScenarioBook(seed.id, deps.gate, scenario_cap)
    try:
        registry = _workspace_registry(deps, workspace)
        add_scenario_tool(registry, book.submit)
        result = StageLoop(deps).run(
            stage=Stage.INVESTIGATOR,
            seed_id=seed.id,
            run_id=run_id,
            system_prompt=assets.load_prompt("investigator"),
            initial_message="Analysis of the original bug:\n" + render_analysis(analysis),
            registry=registry,
            parse=parse_investigation_summary,
        )
        if book.gate_unavailable:
            result.run.retryable = True
        return book, result.run
    finally:
        deps.workspaces.release(workspace)


def run_scenario_analyzer(
    seed: Seed,
    scenario: Scenario,
    analysis: AnalysisReport,
    deps: PipelineDeps,
    run_id: str,
) -> tuple[AgentRun, Workspace | None]:
    """Drive one approved scenario to poc_success or poc_failure.

    Returns the run and, on success, the (unreleased) workspace so a
    validator configured to reuse stage state can pick it up.
    """
    if scenario.state is not ScenarioState.APPROVED:
        raise ValueError(f"scenario {scenario.id} is {scenario.state.value}, not approved")
    workspace = deps.workspaces.provision(f"{scenario.id}-repro")
    ledger = ExecutionLedger(deps)
    keep_workspace = False
    try:
        registry = _workspace_registry(deps, workspace)
        add_execute_tool(registry, ledger.execute)
        result = StageLoop(deps).run(
            stage=Stage.SCENARIO_ANALYZER,
            seed_id=seed.id,
            run_id=run_id,
            system_prompt=assets.load_prompt("scenario_analyzer"),
            initial_message=(
                "Approved scenario:\n" + render_scenario(scenario) + "\n\nAnalysis of the ancestor bug:\n" + render_analysis(analysis)
            ),
            registry=registry,
            parse=parse_scenario_result,
            context_id=scenario.id,
        )
        run = result.run
        parsed = result.parsed
        if parsed is not None and parsed["status"] == "success":
            poc = parsed["poc"]
            if ledger.has_evidence(poc):
                scenario.poc = poc
                scenario.transition(ScenarioState.POC_SUCCESS)
                keep_workspace = True
            else:
                run.transcript.append(
                    {"type": "note", "content": "success claim had no evidence-bearing execution of that source; recorded as failure", "at": run.wall_time}
                )
                scenario.transition(ScenarioState.POC_FAILURE)
        else:
            scenario.transition(ScenarioState.POC_FAILURE)
        return run, (workspace if keep_workspace else None)
    finally:
        if not keep_workspace:
            deps.workspaces.release(workspace)


def assess_validation(
    parsed: dict[str, Any],
    ledger: ExecutionLedger,
    scenario: Scenario,
) -> tuple[bool, str, ExecutionRecord | None, ExecutionRecord | None]:
    """Decide whether a validator's confirmation holds up against its own runs."""
    if parsed["verdict"] != "confirmed":
        return False, parsed.get("rationale") or "validator refuted the scenario", None, None
    if scenario.poc is None or parsed["poc"] != scenario.poc:
        return False, "validator output does not carry the scenario's exact PoC source", None, None
    release_runs = ledger.of_poc(scenario.poc, "release")
    debug_runs = ledger.of_poc(scenario.poc, "debug")
    if not release_runs or not debug_runs:
        return False, "validation requires fresh executions of the PoC in both release and debug", None, None
    release_exec = release_runs[-1]
    debug_exec = debug_runs[-1]
    if not ledger.has_evidence(scenario.poc):
        return False, "no execution of the PoC produced evidence during validation", release_exec, debug_exec
    waived = set(parsed.get("waived_warnings", ()))
    for record in (*release_runs, *debug_runs):
        for warning in record.result.warnings:
            if warning.kind not in waived and warning.subject not in waived:
                return False, f"unwaived policy warning on validation execution: {warning.message}", release_exec, debug_exec
    return True, "", release_exec, debug_exec


def run_validator(
    seed: Seed,
    scenario: Scenario,
    deps: PipelineDeps,
    run_id: str,
    *,
    reuse_workspace: Workspace | None = None,
) -> tuple[VulnerabilityReport | None, AgentRun]:
    if scenario.state is not ScenarioState.POC_SUCCESS:
        raise ValueError(f"scenario {scenario.id} is {scenario.state.value}, not poc_success")
    workspace = reuse_workspace if reuse_workspace is not None else deps.workspaces.provision(f"{scenario.id}-validate")
    ledger = ExecutionLedger(deps)
    try:
        registry = _workspace_registry(deps, workspace)
        add_execute_tool(registry, ledger.execute)
        result = StageLoop(deps).run(
            stage=Stage.VALIDATOR,
            seed_id=seed.id,
            run_id=run_id,
            system_prompt=assets.load_prompt("validator"),
            initial_message=(
                "Scenario under validation:\n"
                + render_scenario(scenario)
                + "\n\nClaimed PoC source:\n```javascript\n"
                + (scenario.poc or "")
                + "\n```"
            ),
            registry=registry,
            parse=parse_validation,
            context_id=scenario.id,
        )
        run = result.run
        if result.parsed is None:
            if run.outcome is RunOutcome.HARD_TIMEOUT_KILLED:
                scenario.transition(ScenarioState.REFUTED)
                run.transcript.append({"type": "note", "content": "validation killed at the hard limit; scenario refuted", "at": run.wall_time})
            # Backend errors leave the scenario at poc_success for a retry.
            return None, run
        ok, reason, release_exec, debug_exec = assess_validation(result.parsed, ledger, scenario)
        if not ok:
            scenario.transition(ScenarioState.REFUTED)
            run.transcript.append({"type": "note", "content": f"refuted: {reason}", "at": run.wall_time})
            return None, run
        assert release_exec is not None and debug_exec is not None
        report = VulnerabilityReport(
            id=f"{scenario.id}/report",
            seed_id=seed.id,
            scenario_id=scenario.id,
            title=result.parsed["title"],
            root_cause=result.parsed["root_cause"],
            mechanism=result.parsed["mechanism"],
            poc=result.parsed["poc"],
            release_output=combined_output(release_exec),
            debug_output=combined_output(debug_exec),
            suggested_patch=result.parsed["suggested_patch"],
            waived_warnings=tuple(result.parsed["waived_warnings"]),
            created_at=isoformat(deps.clock.now()),
        )
        scenario.transition(ScenarioState.VALIDATED)
        return report, run
    finally:
        deps.workspaces.release(workspace)
