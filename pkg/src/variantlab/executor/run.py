"""Execution of PoCs against prebuilt target binaries.

The build matrix maps (build, architecture) to a binary path; requests
name a build and architecture and may add extra flags. Policy always_flags
are prepended on every execution path. The subprocess runner passes a
minimal fixed environment (PATH, HOME, LANG) rather than inheriting.
"""

from __future__ import annotations

import hashlib
import os
import signal as signal_module
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol

from variantlab.errors import ConfigurationError
from variantlab.executor.classify import EvidenceKind, ExitStatus, RawRunResult, classify_evidence
from variantlab.executor.policy import ThreatModelPolicy, ThreatModelWarning, validate_request

BUILDS = ("release", "debug")

# Architecture labels the target ships binaries for.
DEFAULT_ARCHITECTURES = (
    "x64",
    "arm64",
    "ia32",
    "arm",
    "loong64",
    "mips64el",
    "ppc64",
    "s390x",
    "riscv64",
)

DEFAULT_ARCHITECTURE = "x64"


@dataclass(frozen=True)
class ExecutionRequest:
    poc: str
    build: str = "release"
    architecture: str = DEFAULT_ARCHITECTURE
    extra_flags: tuple[str, ...] = ()
    timeout: float | None = None  # None -> policy default

    def __post_init__(self) -> None:
        if self.build not in BUILDS:
            raise ConfigurationError(f"unknown build {self.build!r}; expected one of {BUILDS}")
        if self.timeout is not None and self.timeout <= 0:
            raise ConfigurationError("timeout must be positive")


@dataclass(frozen=True)
class ExecutionResult:
    exit_status: ExitStatus
    stdout: str
    stderr: str
    evidence: EvidenceKind
    warnings: tuple[ThreatModelWarning, ...]
    duration: float
    command: tuple[str, ...]


@dataclass(frozen=True)
class Command:
    """What a runner receives; poc text rides along so fakes can key on it."""

    argv: tuple[str, ...]
    poc: str
    build: str
    architecture: str
    timeout: float


class Runner(Protocol):
    def run(self, command: Command) -> RawRunResult: ...


class BuildMatrix:
    def __init__(self, binaries: Mapping[tuple[str, str], str | Path]):
        self._binaries = {k: str(v) for k, v in binaries.items()}
        for build, arch in self._binaries:
            if build not in BUILDS:
                raise ConfigurationError(f"unknown build in matrix: {build!r}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Mapping[str, str]]) -> "BuildMatrix":
        """{"release": {"x64": "/path/d8"}, "debug": {...}}"""
        flat = {}
        for build, per_arch in data.items():
            for arch, path in per_arch.items():
                flat[(build, arch)] = path
        return cls(flat)

    def resolve(self, build: str, architecture: str) -> str:
        try:
            return self._binaries[(build, architecture)]
        except KeyError:
            raise ConfigurationError(f"no binary configured for ({build}, {architecture})") from None


def poc_fingerprint(poc: str, build: str) -> str:
    return hashlib.sha256(f"{build}\x00{poc}".encode("utf-8")).hexdigest()[:16]


class ScriptedRunner:
    """Deterministic fake runner keyed by PoC fingerprint.

    Script entries map poc_fingerprint(poc, build) to a RawRunResult.
    Unknown fingerprints get a clean exit so scripts only enumerate the
    interesting cases.
    """

    def __init__(self, results: Mapping[str, RawRunResult] | None = None, default_duration: float = 1.0):
        self._results = dict(results or {})
        self._default_duration = default_duration
        self.commands: list[Command] = []

    def script(self, poc: str, build: str, result: RawRunResult) -> None:
        self._results[poc_fingerprint(poc, build)] = result

    def run(self, command: Command) -> RawRunResult:
        self.commands.append(command)
        key = poc_fingerprint(command.poc, command.build)
        result = self._results.get(key)
        if result is None:
            return RawRunResult(exit_code=0, signal=None, stdout="", stderr="", duration=self._default_duration)
        if result.duration > command.timeout:
            # The harness kills at the timeout; output up to that point stands.
            return RawRunResult(
                exit_code=None,
                signal=int(signal_module.SIGKILL),
                stdout=result.stdout,
                stderr=result.stderr,
                duration=command.timeout,
                timed_out=True,
            )
        return result


class SubprocessRunner:
    """Runs the real binary with a minimal environment."""

    def run(self, command: Command) -> RawRunResult:
        env = {
            "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
            "HOME": os.environ.get("HOME", "/tmp"),
            "LANG": "C.UTF-8",
        }
        with tempfile.TemporaryDirectory(prefix="poke-") as tmp:
            poc_path = Path(tmp) / "poc.js"
            poc_path.write_text(command.poc)
            argv = list(command.argv) + [str(poc_path)]
            try:
                proc = subprocess.run(
                    argv,
                    capture_output=True,
                    text=True,
                    timeout=command.timeout,
                    env=env,
                    cwd=tmp,
                )
            except subprocess.TimeoutExpired as exc:
                return RawRunResult(
                    exit_code=None,
                    signal=int(signal_module.SIGKILL),
                    stdout=(exc.stdout or b"").decode("utf-8", "replace") if isinstance(exc.stdout, bytes) else (exc.stdout or ""),
                    stderr=(exc.stderr or b"").decode("utf-8", "replace") if isinstance(exc.stderr, bytes) else (exc.stderr or ""),
                    duration=command.timeout,
                    timed_out=True,
                )
            except FileNotFoundError as exc:
                raise ConfigurationError(f"binary not found: {argv[0]}") from exc
        sig = -proc.returncode if proc.returncode < 0 else None
        code = proc.returncode if proc.returncode >= 0 else None
        return RawRunResult(
            exit_code=code,
            signal=sig,
            stdout=proc.stdout,
            stderr=proc.stderr,
            duration=0.0,
            timed_out=False,
        )


def execute(
    request: ExecutionRequest,
    policy: ThreatModelPolicy,
    runner: Runner,
    matrix: BuildMatrix,
) -> ExecutionResult:
    """Validate, run, classify. Warnings are advisory: execution proceeds."""
    warnings = validate_request(request.extra_flags, request.poc, policy)
    binary = matrix.resolve(request.build, request.architecture)
    argv = (
        binary,
        *(f"--{name}" for name in policy.always_flags),
        *request.extra_flags,
    )
    timeout = request.timeout if request.timeout is not None else policy.default_timeout
    command = Command(argv=argv, poc=request.poc, build=request.build, architecture=request.architecture, timeout=timeout)
    raw = runner.run(command)
    exit_status, evidence, classify_warnings = classify_evidence(raw, policy)
    return ExecutionResult(
        exit_status=exit_status,
        stdout=raw.stdout,
        stderr=raw.stderr,
        evidence=evidence,
        warnings=tuple(warnings) + tuple(classify_warnings),
        duration=raw.duration,
        command=argv,
    )


def result_to_doc(result: ExecutionResult) -> dict:
    """Wire shape shared by the agent tool result and the operator API."""
    return {
        "exit": {
            "kind": result.exit_status.kind.value,
            "signal": result.exit_status.signal,
            "assertion_kind": result.exit_status.assertion_kind,
            "exit_code": result.exit_status.exit_code,
        },
        "evidence": result.evidence.value,
        "stdout": result.stdout,
        "stderr": result.stderr,
        "warnings": [{"kind": w.kind, "subject": w.subject, "message": w.message} for w in result.warnings],
        "duration": result.duration,
    }
