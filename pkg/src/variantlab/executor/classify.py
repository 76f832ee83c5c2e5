"""Evidence classification of raw execution results.

Classification is a total function: every (exit, output) pair maps to
exactly one evidence value. Precedence, highest first:

  1. sandbox violation marker        -> sandbox_violation
  2. debug assertion pattern + abort -> debug_assertion
  3. release invariant pattern + abort -> none (plus intentional-detection warning)
  4. spec-violation marker           -> spec_violation_candidate
  5. benign sandbox marker           -> none (plus sandbox-working warning)
  6. fatal signal                    -> crash
  7. anything else                   -> none

The benign marker's warning is attached whenever the marker appears and no
violation was detected, including alongside stronger evidence.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from variantlab.executor.policy import ThreatModelPolicy, ThreatModelWarning


class EvidenceKind(str, Enum):
    NONE = "none"
    CRASH = "crash"
    DEBUG_ASSERTION = "debug_assertion"
    SANDBOX_VIOLATION = "sandbox_violation"
    SPEC_VIOLATION_CANDIDATE = "spec_violation_candidate"


class ExitKind(str, Enum):
    OK = "ok"
    CRASH = "crash"
    ASSERTION = "assertion"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class ExitStatus:
    kind: ExitKind
    signal: int | None = None
    assertion_kind: str | None = None  # "CHECK" | "DCHECK"
    exit_code: int | None = None


@dataclass(frozen=True)
class RawRunResult:
    """What a runner reports before classification."""

    exit_code: int | None
    signal: int | None
    stdout: str
    stderr: str
    duration: float
    timed_out: bool = False


def _contains_any(text: str, patterns: tuple[str, ...]) -> bool:
    return any(p in text for p in patterns)


def classify_evidence(
    raw: RawRunResult, policy: ThreatModelPolicy
) -> tuple[ExitStatus, EvidenceKind, list[ThreatModelWarning]]:
    """Map a raw result to (exit status, evidence, classification warnings)."""
    output = raw.stdout + "\n" + raw.stderr
    aborted = raw.signal is not None or (raw.exit_code is not None and raw.exit_code != 0)
    is_dcheck = aborted and _contains_any(output, policy.dcheck_patterns)
    is_check = aborted and not is_dcheck and _contains_any(output, policy.check_patterns)

    if raw.timed_out:
        exit_status = ExitStatus(kind=ExitKind.TIMEOUT, exit_code=raw.exit_code, signal=raw.signal)
    elif is_dcheck:
        exit_status = ExitStatus(kind=ExitKind.ASSERTION, assertion_kind="DCHECK", signal=raw.signal, exit_code=raw.exit_code)
    elif is_check:
        exit_status = ExitStatus(kind=ExitKind.ASSERTION, assertion_kind="CHECK", signal=raw.signal, exit_code=raw.exit_code)
    elif raw.signal is not None:
        exit_status = ExitStatus(kind=ExitKind.CRASH, signal=raw.signal, exit_code=raw.exit_code)
    else:
        exit_status = ExitStatus(kind=ExitKind.OK, exit_code=raw.exit_code)

    warnings: list[ThreatModelWarning] = []
    benign = _contains_any(output, policy.benign_sandbox_markers)
    violation = policy.sandbox_violation_marker in output

    if violation:
        return exit_status, EvidenceKind.SANDBOX_VIOLATION, warnings

    if benign:
        warnings.append(
            ThreatModelWarning(
                kind="sandbox_benign",
                subject=next(m for m in policy.benign_sandbox_markers if m in output),
                message="output indicates the sandbox worked as designed; not a bypass",
            )
        )

    if exit_status.kind is ExitKind.ASSERTION and exit_status.assertion_kind == "DCHECK":
        return exit_status, EvidenceKind.DEBUG_ASSERTION, warnings

    if exit_status.kind is ExitKind.ASSERTION and exit_status.assertion_kind == "CHECK":
        warnings.append(
            ThreatModelWarning(
                kind="check_failure",
                subject="CHECK",
                message="release invariant check fired: the engine detected the condition intentionally; not a bug",
            )
        )
        return exit_status, EvidenceKind.NONE, warnings

    if _contains_any(output, policy.spec_violation_markers):
        return exit_status, EvidenceKind.SPEC_VIOLATION_CANDIDATE, warnings

    if benign:
        return exit_status, EvidenceKind.NONE, warnings

    if exit_status.kind is ExitKind.CRASH:
        return exit_status, EvidenceKind.CRASH, warnings

    return exit_status, EvidenceKind.NONE, warnings
