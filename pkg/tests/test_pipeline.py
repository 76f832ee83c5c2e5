"""Stage loop, tool surfaces, shape composition, and the walkthrough replay."""

import json
import subprocess

import pytest

from variantlab.clock import SimClock
from variantlab.corpus.embeddings import HashedGaussianProvider
from variantlab.corpus.store import MemoryCorpusStore
from variantlab.coverage.judge import CompletionJudge, EmbeddingThresholdJudge, JudgeUnavailableError, ScriptedJudge
from variantlab.coverage.tracker import CoverageTracker
from variantlab.fixtures import load_walkthrough
from variantlab.pipeline.backend import PriceTable, ScriptedBackend, Usage
from variantlab.pipeline.models import (
    BudgetClock,
    Location,
    RunOutcome,
    Scenario,
    ScenarioState,
    Stage,
    StateTransitionError,
)
from variantlab.pipeline.outputs import StageOutputError, extract_json, parse_scenario_result, parse_validation
from variantlab.pipeline.runner import MemorySink, PipelineConfig, run_pipeline
from variantlab.pipeline.stages import (
    PipelineDeps,
    StageLoop,
    run_analyzer,
    run_investigator,
    run_preanalysis,
    run_scenario_analyzer,
    run_validator,
)
from variantlab.pipeline.tools import ToolRegistry, add_workspace_tools
from variantlab.pipeline.workspace import LocalSandboxDriver
from variantlab.executor.policy import ThreatModelPolicy
from variantlab.executor.run import BuildMatrix, ScriptedRunner


def fallback_judge():
    return EmbeddingThresholdJudge(HashedGaussianProvider(128))


def make_deps(tmp_path, *, backend=None, judge=None, budget=None, clock=None, with_checkout=True):
    fx = load_walkthrough()
    clock = clock or SimClock(1_750_000_000.0)
    source = fx.materialize_checkout(tmp_path / "source") if with_checkout else None
    deps = PipelineDeps(
        backend=backend if backend is not None else fx.backend(),
        budget=budget or BudgetClock(),
        clock=clock,
        gate=CoverageTracker(judge=judge or fallback_judge(), clock=clock),
        policy=ThreatModelPolicy(),
        runner=fx.runner(),
        matrix=fx.matrix(),
        workspaces=LocalSandboxDriver(checkout_source=source, root=tmp_path),
        fetcher=fx.fetcher(),
        corpus=MemoryCorpusStore(),
        run_seed=7,
    )
    return fx, deps


def final_turn(payload, duration=10.0, tokens=(100, 50)):
    text = payload if isinstance(payload, str) else json.dumps(payload)
    return {"text": text, "duration": duration, "usage": {"input_tokens": tokens[0], "output_tokens": tokens[1]}}


class TestOutputParsing:
    def test_extracts_fenced_json(self):
        data = extract_json('Here you go:\n```json\n{"status": "failure"}\n```')
        assert data == {"status": "failure"}

    def test_rejects_non_object(self):
        with pytest.raises(StageOutputError):
            extract_json("[1, 2, 3]")

    def test_scenario_success_requires_poc(self):
        with pytest.raises(StageOutputError, match="poc"):
            parse_scenario_result('{"status": "success"}')

    def test_validation_confirmed_requires_fields(self):
        with pytest.raises(StageOutputError, match="title"):
            parse_validation('{"verdict": "confirmed"}')


class TestScenarioStateMachine:
    def scenario(self):
        return Scenario(
            id="s-1",
            seed_id="seed-1",
            locations=(Location("a.cc", 10, 20),),
            hypothesis="narrow count field wraps",
        )

    def test_happy_path(self):
        s = self.scenario()
        for state in (ScenarioState.APPROVED, ScenarioState.POC_SUCCESS, ScenarioState.VALIDATED):
            s.transition(state)
        assert s.state is ScenarioState.VALIDATED

    def test_skipping_approval_is_illegal(self):
        with pytest.raises(StateTransitionError):
            self.scenario().transition(ScenarioState.POC_SUCCESS)

    def test_terminal_states_are_terminal(self):
        s = self.scenario()
        s.transition(ScenarioState.REJECTED_REDUNDANT)
        with pytest.raises(StateTransitionError):
            s.transition(ScenarioState.APPROVED)


class TestWorkspaceTools:
    def test_read_file_escape_rejected(self, tmp_path):
        (tmp_path / "inside.txt").write_text("ok\n")
        registry = ToolRegistry()
        add_workspace_tools(registry, tmp_path)
        result = registry.dispatch("read_file", {"path": "../outside.txt"})
        assert result.error and "escapes" in result.content

    def test_search_finds_fixture_line(self, tmp_path):
        fx = load_walkthrough()
        checkout = fx.materialize_checkout(tmp_path)
        registry = ToolRegistry()
        add_workspace_tools(registry, checkout)
        result = registry.dispatch("search_code", {"pattern": r"uint16_t input_count", "glob": "src/**/*.h"})
        matches = json.loads(result.content)["matches"]
        assert matches == ["src/compiler/turboshaft/operations.h:1021: uint16_t input_count;"]

    def test_shell_allowlist(self, tmp_path):
        registry = ToolRegistry()
        add_workspace_tools(registry, tmp_path)
        denied = registry.dispatch("shell", {"command": "curl http://example.org"})
        assert denied.error and "not allowlisted" in denied.content
        allowed = registry.dispatch("shell", {"command": "ls"})
        assert not allowed.error

    def test_git_log_is_shuffled_with_notice(self, tmp_path):
        subprocess.run(["git", "init", "-q", str(tmp_path)], check=True)
        env = {"GIT_AUTHOR_NAME": "t", "GIT_AUTHOR_EMAIL": "t@t", "GIT_COMMITTER_NAME": "t", "GIT_COMMITTER_EMAIL": "t@t"}
        for n in range(12):
            (tmp_path / "f.txt").write_text(f"{n}\n")
            subprocess.run(["git", "-C", str(tmp_path), "add", "f.txt"], check=True)
            subprocess.run(
                ["git", "-C", str(tmp_path), "commit", "-q", "-m", f"change {n}"],
                check=True,
                env={**env, "GIT_AUTHOR_DATE": f"2025-01-{n + 1:02d}T00:00:00", "GIT_COMMITTER_DATE": f"2025-01-{n + 1:02d}T00:00:00"},
            )
        registry = ToolRegistry()
        add_workspace_tools(registry, tmp_path, run_seed=11)
        out = json.loads(registry.dispatch("shell", {"command": "git log --format=%s"}).content)
        lines = out["stdout"].splitlines()
        assert "randomized" in lines[0] and "--no-shuffle" in lines[0]
        chronological = [f"change {n}" for n in reversed(range(12))]
        assert sorted(lines[1:]) == sorted(chronological)
        assert lines[1:] != chronological
        plain = json.loads(registry.dispatch("shell", {"command": "git log --format=%s --no-shuffle"}).content)
        assert plain["stdout"].splitlines() == chronological

    def test_unavailable_tool_is_an_error_result(self, tmp_path):
        registry = ToolRegistry()
        add_workspace_tools(registry, tmp_path)
        result = registry.dispatch("execute_poc", {"poc": "1"})
        assert result.error and "not available" in result.content


class TestStageLoop:
    def loop_deps(self, tmp_path, scripts, *, budget=None, clock=None):
        backend = ScriptedBackend(scripts)
        clock = clock or SimClock(0.0)
        deps = PipelineDeps(
            backend=backend,
            budget=budget or BudgetClock(),
            clock=clock,
            gate=CoverageTracker(judge=fallback_judge(), clock=clock),
            policy=ThreatModelPolicy(),
            runner=ScriptedRunner(),
            matrix=BuildMatrix({}),
            workspaces=LocalSandboxDriver(root=tmp_path),
        )
        return deps

    def run_loop(self, deps, scripts_key="analyzer/s1", parse=extract_json):
        registry = ToolRegistry()
        return StageLoop(deps).run(
            stage=Stage.ANALYZER,
            seed_id="s1",
            run_id="s1/analyzer-1",
            system_prompt="p",
            initial_message="go",
            registry=registry,
            parse=parse,
        )

    def test_usage_accumulates_and_wall_time_tracks_durations(self, tmp_path):
        scripts = {"analyzer/s1": [final_turn({"ok": True}, duration=42.0, tokens=(300, 70))]}
        deps = self.loop_deps(tmp_path, scripts)
        result = self.run_loop(deps)
        run = result.run
        assert run.outcome is RunOutcome.COMPLETED
        assert (run.input_tokens, run.output_tokens) == (300, 70)
        assert run.cost == pytest.approx(PriceTable().cost(Usage(300, 70)))
        assert run.wall_time == pytest.approx(42.0)
        assert result.parsed == {"ok": True}

    def test_one_repair_reprompt_then_success(self, tmp_path):
        scripts = {"analyzer/s1": [final_turn("not json at all"), final_turn({"ok": 1})]}
        deps = self.loop_deps(tmp_path, scripts)
        result = self.run_loop(deps)
        assert result.run.outcome is RunOutcome.COMPLETED
        assert result.run.retries == 1
        assert result.parsed == {"ok": 1}
        repair = [e for e in result.run.transcript if e["type"] == "user" and "failed validation" in e["content"]]
        assert len(repair) == 1

    def test_second_invalid_output_is_backend_error(self, tmp_path):
        scripts = {"analyzer/s1": [final_turn("junk"), final_turn("more junk")]}
        deps = self.loop_deps(tmp_path, scripts)
        result = self.run_loop(deps)
        assert result.run.outcome is RunOutcome.BACKEND_ERROR
        assert result.parsed is None

    def test_exhausted_script_is_retryable_backend_error(self, tmp_path):
        deps = self.loop_deps(tmp_path, {"analyzer/s1": []})
        result = self.run_loop(deps)
        assert result.run.outcome is RunOutcome.BACKEND_ERROR
        assert result.run.retryable

    def test_soft_wrapup_outcome_and_warning_injection(self, tmp_path):
        budget = BudgetClock(soft_limit=600.0, hard_limit=1200.0, post_soft_interval=100.0)
        scripts = {"analyzer/s1": [
            {"tool": {"name": "missing", "arguments": {}}, "duration": 400.0, "usage": {}},
            {"tool": {"name": "missing", "arguments": {}}, "duration": 210.0, "usage": {}},
            final_turn({"done": 1}, duration=10.0),
        ]}
        deps = self.loop_deps(tmp_path, scripts, budget=budget)
        result = self.run_loop(deps)
        assert result.run.outcome is RunOutcome.SOFT_TIMEOUT_WRAPUP
        warnings = [e for e in result.run.transcript if e["type"] == "warning"]
        # Each warning keeps its scheduled timestamp, not the moment the
        # loop noticed it: 300 before turn two, then 480/540/600 together
        # before turn three once 610s had passed.
        assert [w["at"] for w in warnings] == [300.0, 480.0, 540.0, 600.0]
        assert "wrap up" in warnings[-1]["message"].lower()

    def test_hard_kill_discards_straddling_turn(self, tmp_path):
        budget = BudgetClock(soft_limit=600.0, hard_limit=1200.0, post_soft_interval=300.0)
        scripts = {"analyzer/s1": [
            {"tool": {"name": "missing", "arguments": {}}, "duration": 500.0, "usage": {"input_tokens": 10, "output_tokens": 1}},
            final_turn({"late": True}, duration=900.0, tokens=(20, 2)),
        ]}
        deps = self.loop_deps(tmp_path, scripts, budget=budget)
        result = self.run_loop(deps)
        run = result.run
        assert run.outcome is RunOutcome.HARD_TIMEOUT_KILLED
        assert result.parsed is None
        assert run.wall_time == pytest.approx(1200.0)
        # Usage for the doomed turn still counts; the kill is stamped at
        # exactly the hard limit, after every pre-kill warning.
        assert run.input_tokens == 30
        kill = [e for e in run.transcript if e["type"] == "kill"]
        assert len(kill) == 1 and kill[0]["at"] == pytest.approx(1200.0)
        warn_times = [e["at"] for e in run.transcript if e["type"] == "warning"]
        assert warn_times == [300.0, 480.0, 540.0, 600.0, 900.0]


class TestAnalyzerStage:
    def test_walkthrough_analysis(self, tmp_path):
        fx, deps = make_deps(tmp_path)
        analysis, run = run_analyzer(fx.seed(), deps, "440048019/analyzer-1")
        assert run.outcome is RunOutcome.COMPLETED
        assert analysis is not None
        assert "integer truncation" in analysis.root_cause.lower()
        assert any("wrap" in step or "truncat" in step for step in analysis.bug_mechanism)
        fetches = [e for e in run.transcript if e["type"] == "tool_result" and e["name"] == "fetch_artifacts"]
        assert len(fetches) == 1 and "CHECK_LE" in fetches[0]["content"]

    def test_preanalysis_single_turn(self, tmp_path):
        fx, deps = make_deps(tmp_path, with_checkout=False)
        pre = run_preanalysis(fx.seed(), deps)
        assert "truncation" in pre.text.lower()
        assert pre.prompt_version == "v1"
        assert pre.cost > 0 and pre.duration == pytest.approx(9.0)


class TestInvestigatorStage:
    def test_walkthrough_submits_one_approved_scenario(self, tmp_path):
        fx, deps = make_deps(tmp_path)
        seed = fx.seed()
        analysis, _ = run_analyzer(seed, deps, "440048019/analyzer-1")
        book, run = run_investigator(seed, analysis, deps, "440048019/investigator-1")
        assert run.outcome is RunOutcome.COMPLETED
        assert [s.state for s in book.scenarios] == [ScenarioState.APPROVED]
        scenario = book.scenarios[0]
        assert scenario.id == "440048019/scn-1"
        assert scenario.locations == (Location("src/compiler/turboshaft/operations.h", 1021, 1021),)
        entries = deps.gate.store.entries()
        assert [e.entry_id for e in entries] == ["440048019/scn-1"]

    def test_duplicate_hypothesis_rejected_by_gate(self, tmp_path):
        fx, deps = make_deps(tmp_path)
        seed = fx.seed()
        analysis, _ = run_analyzer(seed, deps, "r1")
        # Pre-claim the territory with an identical hypothesis: the fallback
        # judge sees cosine 1.0 and rejects the investigator's submission.
        prior = Scenario(
            id="prior/scn-1",
            seed_id="prior",
            locations=(Location("src/compiler/turboshaft/operations.h", 1015, 1030),),
            hypothesis=(
                "The Turboshaft operation header stores input_count as uint16_t and construction "
                "performs no bound check; a phi whose merge block collects more than 65535 inputs "
                "wraps the stored count and desynchronizes the operation buffer layout."
            ),
        )
        deps.gate.check_and_record(prior, origin_seed_id="prior")
        book, run = run_investigator(seed, analysis, deps, "r2")
        assert [s.state for s in book.scenarios] == [ScenarioState.REJECTED_REDUNDANT]
        assert len(deps.gate.store.entries()) == 1
        rejection = next(
            json.loads(e["content"]) for e in run.transcript if e["type"] == "tool_result" and e["name"] == "submit_scenario"
        )
        assert rejection["decision"] == "rejected_redundant"
        assert rejection["matched_entry"] == "prior/scn-1"

    def test_scenario_cap_enforced(self, tmp_path):
        submit = {
            "tool": {
                "name": "submit_scenario",
                "arguments": {
                    "locations": [{"file": "a.cc", "line_start": 1, "line_end": 1}],
                    "hypothesis": "h one",
                },
            },
            "duration": 1.0,
            "usage": {},
        }
        def with_hypothesis(text):
            turn = json.loads(json.dumps(submit))
            turn["tool"]["arguments"]["hypothesis"] = text
            turn["tool"]["arguments"]["locations"][0]["file"] = text.replace(" ", "-") + ".cc"
            return turn
        scripts = {"investigator/440048019": [
            with_hypothesis("alpha overflow"),
            with_hypothesis("beta underflow"),
            with_hypothesis("gamma confusion"),
            final_turn({"summary": "done"}),
        ]}
        fx, deps = make_deps(tmp_path, backend=ScriptedBackend(scripts))
        seed = fx.seed()
        analysis = make_analysis(seed.id)
        book, run = run_investigator(seed, analysis, deps, "r1", scenario_cap=2)
        assert len(book.scenarios) == 2
        capped = [
            json.loads(e["content"]) for e in run.transcript if e["type"] == "tool_result" and e["name"] == "submit_scenario"
        ]
        assert capped[-1]["decision"] == "cap_exhausted"

    def test_gate_outage_holds_scenario_and_marks_run_retryable(self, tmp_path):
        outage = ScriptedJudge(available=False)
        fx, deps = make_deps(tmp_path, judge=outage)
        seed = fx.seed()
        # Seed a spatially overlapping entry so the judge is actually consulted.
        prior = Scenario(
            id="prior/scn-9",
            seed_id="prior",
            locations=(Location("src/compiler/turboshaft/operations.h", 1000, 1040),),
            hypothesis="different defect in the same header",
        )
        outage.available = True
        deps.gate.check_and_record(prior, origin_seed_id="prior")
        outage.available = False
        analysis = make_analysis(seed.id)
        book, run = run_investigator(seed, analysis, deps, "r1")
        assert run.retryable
        assert [s.state for s in book.scenarios] == [ScenarioState.PROPOSED]
        held = next(
            json.loads(e["content"]) for e in run.transcript if e["type"] == "tool_result" and e["name"] == "submit_scenario"
        )
        assert held["decision"] == "held"
        assert len(deps.gate.store.entries()) == 1  # nothing recorded during the outage


def make_analysis(seed_id):
    from variantlab.pipeline.models import AnalysisReport

    return AnalysisReport(
        seed_id=seed_id,
        root_cause="integer truncation of a count field",
        bug_mechanism=("oversized count wraps in a narrow header slot",),
        impact="out-of-bounds writes",
        fix_description="widen the field and bound-check construction",
    )


def make_approved_scenario(fx):
    scenario = Scenario(
        id="440048019/scn-1",
        seed_id="440048019",
        locations=(Location("src/compiler/turboshaft/operations.h", 1021, 1021),),
        hypothesis="input_count wraps",
    )
    scenario.transition(ScenarioState.APPROVED)
    return scenario


class TestScenarioAnalyzerStage:
    def test_walkthrough_reproduction_succeeds(self, tmp_path):
        fx, deps = make_deps(tmp_path)
        scenario = make_approved_scenario(fx)
        run, kept = run_scenario_analyzer(fx.seed(), scenario, make_analysis("440048019"), deps, "r3")
        assert run.outcome is RunOutcome.COMPLETED
        assert scenario.state is ScenarioState.POC_SUCCESS
        assert scenario.poc == fx.poc
        assert kept is not None
        deps.workspaces.release(kept)

    def test_success_claim_without_evidence_becomes_failure(self, tmp_path):
        scripts = {"scenario_analyzer/440048019/440048019/scn-1": [
            final_turn({"scenario_id": "440048019/scn-1", "status": "success", "poc": "print(1)", "evidence_summary": "trust me"})
        ]}
        fx, deps = make_deps(tmp_path, backend=ScriptedBackend(scripts))
        scenario = make_approved_scenario(fx)
        run, kept = run_scenario_analyzer(fx.seed(), scenario, make_analysis("440048019"), deps, "r3")
        assert kept is None
        assert scenario.state is ScenarioState.POC_FAILURE
        assert any("no evidence-bearing execution" in e.get("content", "") for e in run.transcript if e["type"] == "note")

    def test_rejected_scenario_cannot_enter_reproduction(self, tmp_path):
        fx, deps = make_deps(tmp_path)
        scenario = Scenario(
            id="x/scn-1",
            seed_id="x",
            locations=(Location("a.cc", 1, 1),),
            hypothesis="h",
        )
        scenario.transition(ScenarioState.REJECTED_REDUNDANT)
        with pytest.raises(ValueError, match="not approved"):
            run_scenario_analyzer(fx.seed(), scenario, make_analysis("x"), deps, "r")


class TestValidatorStage:
    def successful_scenario(self, fx):
        scenario = make_approved_scenario(fx)
        scenario.poc = fx.poc
        scenario.transition(ScenarioState.POC_SUCCESS)
        return scenario

    def test_walkthrough_validation_emits_report(self, tmp_path):
        fx, deps = make_deps(tmp_path)
        scenario = self.successful_scenario(fx)
        report, run = run_validator(fx.seed(), scenario, deps, "r4")
        assert run.outcome is RunOutcome.COMPLETED
        assert scenario.state is ScenarioState.VALIDATED
        assert report is not None
        assert report.id == "440048019/scn-1/report"
        assert report.release_output == "7\n"
        assert "Debug check failed: input_count" in report.debug_output
        assert report.waived_warnings == ()
        assert report.created_at.endswith("Z")

    def test_missing_debug_execution_refutes(self, tmp_path):
        fx = load_walkthrough()
        validation = json.loads(json.dumps({
            "verdict": "confirmed", "scenario_id": "440048019/scn-1", "title": "t",
            "root_cause": "r", "mechanism": "m", "poc": fx.poc,
            "suggested_patch": "", "waived_warnings": [], "rationale": "ran once",
        }))
        scripts = {"validator/440048019/440048019/scn-1": [
            {"tool": {"name": "execute_poc", "arguments": {"poc": fx.poc, "build": "release"}}, "duration": 5.0, "usage": {}},
            final_turn(validation),
        ]}
        _, deps = make_deps(tmp_path, backend=ScriptedBackend(scripts))
        scenario = self.successful_scenario(fx)
        report, run = run_validator(fx.seed(), scenario, deps, "r4")
        assert report is None
        assert scenario.state is ScenarioState.REFUTED
        assert any("release and debug" in e.get("content", "") for e in run.transcript if e["type"] == "note")

    def test_unwaived_policy_warning_refutes(self, tmp_path):
        fx = load_walkthrough()
        poc = fx.poc
        validation = {
            "verdict": "confirmed", "scenario_id": "440048019/scn-1", "title": "t",
            "root_cause": "r", "mechanism": "m", "poc": poc,
            "suggested_patch": "", "waived_warnings": [], "rationale": "looked fine",
        }
        flagged = {"poc": poc, "build": "debug", "extra_flags": ["--no-sandbox"]}
        scripts = {"validator/440048019/440048019/scn-1": [
            {"tool": {"name": "execute_poc", "arguments": {"poc": poc, "build": "release"}}, "duration": 5.0, "usage": {}},
            {"tool": {"name": "execute_poc", "arguments": flagged}, "duration": 5.0, "usage": {}},
            final_turn(validation),
        ]}
        _, deps = make_deps(tmp_path, backend=ScriptedBackend(scripts))
        scenario = self.successful_scenario(fx)
        report, run = run_validator(fx.seed(), scenario, deps, "r4")
        assert report is None
        assert scenario.state is ScenarioState.REFUTED
        assert any("unwaived policy warning" in e.get("content", "") for e in run.transcript if e["type"] == "note")

    def test_waived_warning_is_accepted(self, tmp_path):
        fx = load_walkthrough()
        poc = fx.poc
        validation = {
            "verdict": "confirmed", "scenario_id": "440048019/scn-1", "title": "t",
            "root_cause": "r", "mechanism": "m", "poc": poc,
            "suggested_patch": "", "waived_warnings": ["--no-sandbox"], "rationale": "sandbox off is intrinsic to this reproduction",
        }
        scripts = {"validator/440048019/440048019/scn-1": [
            {"tool": {"name": "execute_poc", "arguments": {"poc": poc, "build": "release"}}, "duration": 5.0, "usage": {}},
            {"tool": {"name": "execute_poc", "arguments": {"poc": poc, "build": "debug", "extra_flags": ["--no-sandbox"]}}, "duration": 5.0, "usage": {}},
            final_turn(validation),
        ]}
        _, deps = make_deps(tmp_path, backend=ScriptedBackend(scripts))
        scenario = self.successful_scenario(fx)
        report, run = run_validator(fx.seed(), scenario, deps, "r4")
        assert report is not None
        assert report.waived_warnings == ("--no-sandbox",)
        assert scenario.state is ScenarioState.VALIDATED


def report_content(report):
    """Everything that should be shape-invariant (timestamps are not)."""
    return (
        report.seed_id,
        report.scenario_id,
        report.title,
        report.root_cause,
        report.mechanism,
        report.poc,
        report.release_output,
        report.debug_output,
        report.suggested_patch,
        report.waived_warnings,
    )


class TestPipelineShapes:
    def run_shape(self, tmp_path, shape):
        fx, deps = make_deps(tmp_path)
        sink = MemorySink()
        outcome = run_pipeline(fx.seed(), deps, PipelineConfig(shape=shape), sink)
        return fx, outcome, sink

    def test_four_stage_walkthrough(self, tmp_path):
        fx, outcome, sink = self.run_shape(tmp_path, "four")
        assert outcome.status == "completed"
        assert [t["stage"] for t in outcome.stage_trace] == ["analyzer", "investigator", "scenario_analyzer", "validator"]
        assert [s.state for s in outcome.scenarios] == [ScenarioState.VALIDATED]
        assert len(outcome.reports) == 1
        assert outcome.reports[0].poc == fx.poc
        assert set(sink.reports) == {"440048019/scn-1/report"}
        assert sink.scenarios["440048019/scn-1"].state is ScenarioState.VALIDATED
        assert outcome.cost > 0

    def test_three_stage_same_report_one_fewer_boundary(self, tmp_path):
        _, four, _ = self.run_shape(tmp_path / "four", "four")
        _, three, _ = self.run_shape(tmp_path / "three", "three")
        assert [t["stage"] for t in three.stage_trace] == ["analyzer", "bug_finder", "validator"]
        assert len(three.stage_trace) == len(four.stage_trace) - 1
        assert len(three.reports) == 1
        assert report_content(three.reports[0]) == report_content(four.reports[0])

    def test_one_stage_same_report(self, tmp_path):
        _, four, _ = self.run_shape(tmp_path / "four", "four")
        _, one, _ = self.run_shape(tmp_path / "one", "one")
        assert [t["stage"] for t in one.stage_trace] == ["bug_finder"]
        assert len(one.reports) == 1
        assert report_content(one.reports[0]) == report_content(four.reports[0])
        assert one.scenarios[0].state is ScenarioState.VALIDATED

    def test_rejected_scenario_never_reaches_reproduction(self, tmp_path):
        fx, deps = make_deps(tmp_path)
        prior = Scenario(
            id="prior/scn-1",
            seed_id="prior",
            locations=(Location("src/compiler/turboshaft/operations.h", 1015, 1030),),
            hypothesis=(
                "The Turboshaft operation header stores input_count as uint16_t and construction "
                "performs no bound check; a phi whose merge block collects more than 65535 inputs "
                "wraps the stored count and desynchronizes the operation buffer layout."
            ),
        )
        deps.gate.check_and_record(prior, origin_seed_id="prior")
        outcome = run_pipeline(fx.seed(), deps, PipelineConfig(shape="four"))
        assert [t["stage"] for t in outcome.stage_trace] == ["analyzer", "investigator"]
        assert [s.state for s in outcome.scenarios] == [ScenarioState.REJECTED_REDUNDANT]
        assert outcome.reports == []

    def test_analyzer_failure_stops_pipeline(self, tmp_path):
        scripts = {"analyzer/440048019": [final_turn("junk"), final_turn("junk again")]}
        fx, deps = make_deps(tmp_path, backend=ScriptedBackend(scripts))
        outcome = run_pipeline(fx.seed(), deps, PipelineConfig(shape="four"))
        assert outcome.status == "analyzer_failed"
        assert [t["stage"] for t in outcome.stage_trace] == ["analyzer"]

    def test_unknown_shape_rejected(self):
        from variantlab.errors import ConfigurationError

        with pytest.raises(ConfigurationError, match="shape"):
            PipelineConfig(shape="two")


class TestCompletionJudge:
    def entry(self):
        from variantlab.coverage.models import CoverageEntry

        return CoverageEntry(
            entry_id="e1",
            locations=(Location("a.cc", 5, 9),),
            hypothesis="unchecked length wraps",
            origin_seed_id="s",
            approved_at="2025-01-01T00:00:00Z",
        )

    def subject(self):
        from variantlab.coverage.judge import JudgeSubject

        return JudgeSubject(hypothesis="same wrap, new trigger", locations=(Location("a.cc", 6, 6),))

    def test_parses_completion_verdict(self):
        from variantlab import assets

        judge = CompletionJudge(lambda prompt: '{"redundant": true, "rationale": "same defect"}', assets.load_prompt("coverage_judge"))
        verdict = judge.compare(self.subject(), self.entry())
        assert verdict.redundant and verdict.rationale == "same defect"

    def test_transport_failure_raises_unavailable(self):
        def boom(prompt):
            raise OSError("connection refused")

        judge = CompletionJudge(boom, "{entry}{proposed}")
        with pytest.raises(JudgeUnavailableError):
            judge.compare(self.subject(), self.entry())

    def test_garbage_answer_raises_unavailable(self):
        judge = CompletionJudge(lambda prompt: "dunno, maybe?", "{entry}{proposed}")
        with pytest.raises(JudgeUnavailableError):
            judge.compare(self.subject(), self.entry())
