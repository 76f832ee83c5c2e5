from __future__ import annotations

import signal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from variantlab.errors import ConfigurationError
from variantlab.executor import (
    BuildMatrix,
    EvidenceKind,
    ExecutionRequest,
    RawRunResult,
    ScriptedRunner,
    SubprocessRunner,
    ThreatModelPolicy,
    classify_evidence,
    execute,
    flag_name,
    shuffled_log,
    validate_request,
)
from variantlab.executor.classify import ExitKind
from variantlab.executor.gitlog import SHUFFLE_NOTE
from variantlab.executor.run import Command, DEFAULT_ARCHITECTURES

POLICY = ThreatModelPolicy()
MATRIX = BuildMatrix({("release", "x64"): "/opt/target/release/d8", ("debug", "x64"): "/opt/target/debug/d8"})


class TestFlagPolicy:
    def test_blocklisted_exact_flags_warn(self):
        warnings = validate_request(("--expose-memory-corruption-api",), "", POLICY)
        assert [w.kind for w in warnings] == ["blocked_flag"]
        warnings = validate_request(("--no-sandbox",), "", POLICY)
        assert [w.kind for w in warnings] == ["blocked_flag"]

    def test_experimental_substring_matches_name_only(self):
        assert len(validate_request(("--experimental-wasm-jspi",), "", POLICY)) == 1
        assert len(validate_request(("--wasm-experimental-tiering",), "", POLICY)) == 1
        # Substring in the value segment does not block.
        assert validate_request(("--trace-file=experimental.log",), "", POLICY) == []

    def test_case_sensitive_substring(self):
        assert validate_request(("--Experimental-thing",), "", POLICY) == []

    def test_benign_flags_pass(self):
        assert validate_request(("--trace-turbo", "--max-old-space-size=128"), "", POLICY) == []

    def test_one_warning_per_offending_flag(self):
        warnings = validate_request(("--no-sandbox", "--harmony", "--no-sandbox"), "", POLICY)
        assert len(warnings) == 2

    def test_flag_name_parsing(self):
        assert flag_name("--foo-bar=baz") == "foo-bar"
        assert flag_name("--foo") == "foo"
        assert flag_name("-x=1") == "x"


class TestNativePolicy:
    def test_allowlisted_native_passes(self):
        poc = "function f() {}\n%PrepareFunctionForOptimization(f);\n%OptimizeFunctionOnNextCall(f);\nf();"
        assert validate_request((), poc, POLICY) == []

    def test_abortjs_rejected(self):
        warnings = validate_request((), "%AbortJS('x');", POLICY)
        assert len(warnings) == 1
        assert warnings[0].kind == "disallowed_native"
        assert warnings[0].subject == "%AbortJS"

    def test_warning_per_invocation(self):
        warnings = validate_request((), "%AbortJS('a'); %AbortJS('b');", POLICY)
        assert len(warnings) == 2

    def test_modulo_arithmetic_not_flagged(self):
        assert validate_request((), "let x = 10 % 3; let y = a%b;", POLICY) == []


class TestPolicyConstruction:
    def test_always_flags_disjoint_from_blocklist(self):
        with pytest.raises(ConfigurationError):
            ThreatModelPolicy(always_flags=("no-sandbox",))

    def test_timeout_positive(self):
        with pytest.raises(ConfigurationError):
            ThreatModelPolicy(default_timeout=0)

    def test_from_dict_overrides(self):
        policy = ThreatModelPolicy.from_dict({"native_allowlist": ["OptimizeFunctionOnNextCall"], "default_timeout": 60})
        assert policy.default_timeout == 60
        assert validate_request((), "%DeoptimizeNow();", policy)[0].kind == "disallowed_native"


class TestClassification:
    def classify(self, **kwargs):
        defaults = dict(exit_code=0, signal=None, stdout="", stderr="", duration=1.0, timed_out=False)
        defaults.update(kwargs)
        return classify_evidence(RawRunResult(**defaults), POLICY)

    def test_sandbox_violation_marker(self):
        _, evidence, warnings = self.classify(stdout="V8 sandbox violation detected\n", signal=signal.SIGSEGV, exit_code=None)
        assert evidence is EvidenceKind.SANDBOX_VIOLATION
        assert warnings == []

    def test_benign_marker_is_none_with_warning(self):
        status, evidence, warnings = self.classify(stderr="Safely terminating process.\n", signal=signal.SIGABRT, exit_code=None)
        assert evidence is EvidenceKind.NONE
        assert [w.kind for w in warnings] == ["sandbox_benign"]

    def test_check_abort_is_intentional_detection(self):
        status, evidence, warnings = self.classify(
            stderr="# Fatal error in ../../src/x.cc\n# Check failed: size <= kMax.\n",
            signal=signal.SIGABRT,
            exit_code=None,
        )
        assert status.kind is ExitKind.ASSERTION and status.assertion_kind == "CHECK"
        assert evidence is EvidenceKind.NONE
        assert [w.kind for w in warnings] == ["check_failure"]

    def test_dcheck_abort_is_debug_assertion(self):
        status, evidence, warnings = self.classify(
            stderr="# Debug check failed: input_count <= kMaxInputs.\n",
            signal=signal.SIGABRT,
            exit_code=None,
        )
        assert status.kind is ExitKind.ASSERTION and status.assertion_kind == "DCHECK"
        assert evidence is EvidenceKind.DEBUG_ASSERTION
        assert warnings == []

    def test_fatal_signal_is_crash(self):
        status, evidence, _ = self.classify(signal=signal.SIGSEGV, exit_code=None)
        assert status.kind is ExitKind.CRASH and status.signal == signal.SIGSEGV
        assert evidence is EvidenceKind.CRASH

    def test_clean_exit_is_none(self):
        status, evidence, warnings = self.classify()
        assert status.kind is ExitKind.OK
        assert evidence is EvidenceKind.NONE and warnings == []

    def test_nonzero_exit_without_patterns_is_ok_none(self):
        status, evidence, _ = self.classify(exit_code=1, stderr="uncaught TypeError\n")
        assert status.kind is ExitKind.OK
        assert evidence is EvidenceKind.NONE

    def test_spec_violation_marker(self):
        _, evidence, _ = self.classify(stdout="result mismatch\nSPEC-VIOLATION-DETECTED\n")
        assert evidence is EvidenceKind.SPEC_VIOLATION_CANDIDATE

    def test_timeout_is_none(self):
        status, evidence, _ = self.classify(timed_out=True, exit_code=None, signal=signal.SIGKILL)
        assert status.kind is ExitKind.TIMEOUT
        assert evidence is EvidenceKind.NONE

    @given(
        exit_code=st.one_of(st.none(), st.integers(min_value=0, max_value=255)),
        sig=st.one_of(st.none(), st.sampled_from([signal.SIGSEGV, signal.SIGABRT, signal.SIGILL])),
        timed_out=st.booleans(),
        fragments=st.lists(
            st.sampled_from(
                [
                    "V8 sandbox violation detected",
                    "Safely terminating process",
                    "Check failed: x",
                    "Debug check failed: y",
                    "SPEC-VIOLATION-DETECTED",
                    "ordinary output",
                ]
            ),
            max_size=4,
        ),
    )
    @settings(max_examples=300, deadline=None)
    def test_classification_is_total_and_single_valued(self, exit_code, sig, timed_out, fragments):
        raw = RawRunResult(
            exit_code=exit_code,
            signal=sig,
            stdout="\n".join(fragments),
            stderr="",
            duration=1.0,
            timed_out=timed_out,
        )
        first = classify_evidence(raw, POLICY)
        second = classify_evidence(raw, POLICY)
        assert first == second
        assert first[1] in EvidenceKind


class TestExecute:
    def test_always_flags_on_every_command_line(self):
        runner = ScriptedRunner()
        result = execute(ExecutionRequest(poc="1+1", extra_flags=("--trace-turbo",)), POLICY, runner, MATRIX)
        assert result.command[0] == "/opt/target/release/d8"
        assert result.command[1:3] == ("--allow-natives-syntax", "--expose-gc")
        assert "--trace-turbo" in result.command
        assert runner.commands[0].argv == result.command

    def test_warned_request_still_executes(self):
        runner = ScriptedRunner()
        result = execute(ExecutionRequest(poc="x", extra_flags=("--no-sandbox",)), POLICY, runner, MATRIX)
        assert len(runner.commands) == 1
        assert [w.kind for w in result.warnings] == ["blocked_flag"]
        assert result.evidence is EvidenceKind.NONE

    def test_timeout_kills_at_policy_default(self):
        runner = ScriptedRunner()
        poc = "while(true){}"
        runner.script(poc, "release", RawRunResult(exit_code=0, signal=None, stdout="", stderr="", duration=400.0))
        result = execute(ExecutionRequest(poc=poc), POLICY, runner, MATRIX)
        assert result.exit_status.kind is ExitKind.TIMEOUT
        assert result.duration == pytest.approx(300.0)

    def test_missing_binary_is_configuration_error(self):
        with pytest.raises(ConfigurationError):
            execute(ExecutionRequest(poc="x", architecture="riscv64"), POLICY, ScriptedRunner(), MATRIX)

    def test_debug_build_resolves_debug_binary(self):
        runner = ScriptedRunner()
        result = execute(ExecutionRequest(poc="x", build="debug"), POLICY, runner, MATRIX)
        assert result.command[0] == "/opt/target/debug/d8"

    def test_architecture_labels_cover_default_set(self):
        assert len(DEFAULT_ARCHITECTURES) == 9
        assert {"x64", "arm64", "riscv64"} <= set(DEFAULT_ARCHITECTURES)

    def test_scripted_evidence_round_trip(self):
        runner = ScriptedRunner()
        poc = "trigger();"
        runner.script(
            poc,
            "debug",
            RawRunResult(exit_code=None, signal=signal.SIGABRT, stdout="", stderr="# Debug check failed: a <= b\n", duration=2.0),
        )
        release = execute(ExecutionRequest(poc=poc, build="release"), POLICY, runner, MATRIX)
        debug = execute(ExecutionRequest(poc=poc, build="debug"), POLICY, runner, MATRIX)
        assert release.evidence is EvidenceKind.NONE
        assert debug.evidence is EvidenceKind.DEBUG_ASSERTION


class TestSubprocessRunner:
    def test_runs_real_process(self, tmp_path):
        # /bin/sh is a stand-in binary: the poc file is its script argument.
        runner = SubprocessRunner()
        command = Command(argv=("/bin/sh",), poc="echo hello-from-poc", build="release", architecture="x64", timeout=10.0)
        raw = runner.run(command)
        assert raw.exit_code == 0
        assert "hello-from-poc" in raw.stdout

    def test_timeout_enforced(self):
        runner = SubprocessRunner()
        command = Command(argv=("/bin/sh",), poc="sleep 5", build="release", architecture="x64", timeout=0.3)
        raw = runner.run(command)
        assert raw.timed_out


class TestShuffledLog:
    HISTORY = [f"commit {i:07x} fix bug {i}" for i in range(12)]

    def test_seeded_permutation_with_note(self):
        first = shuffled_log(self.HISTORY, run_seed=7)
        second = shuffled_log(self.HISTORY, run_seed=7)
        assert first == second
        assert first[0] == SHUFFLE_NOTE
        assert sorted(first[1:]) == sorted(self.HISTORY)
        assert first[1:] != self.HISTORY  # 12! permutations; seeded shuffle moved something

    def test_no_shuffle_identity_without_note(self):
        assert shuffled_log(self.HISTORY, no_shuffle=True) == self.HISTORY

    def test_empty_history_still_carries_note(self):
        assert shuffled_log([], run_seed=1) == [SHUFFLE_NOTE]
        assert shuffled_log([], no_shuffle=True) == []
