"""PoC execution under the threat-model policy."""

from variantlab.executor.classify import EvidenceKind, ExitStatus, RawRunResult, classify_evidence
from variantlab.executor.gitlog import shuffled_log
from variantlab.executor.policy import (
    DEFAULT_NATIVE_ALLOWLIST,
    ThreatModelPolicy,
    ThreatModelWarning,
    flag_name,
    validate_request,
)
from variantlab.executor.run import (
    BuildMatrix,
    ExecutionRequest,
    ExecutionResult,
    Runner,
    ScriptedRunner,
    SubprocessRunner,
    execute,
)

__all__ = [
    "BuildMatrix",
    "DEFAULT_NATIVE_ALLOWLIST",
    "EvidenceKind",
    "ExecutionRequest",
    "ExecutionResult",
    "ExitStatus",
    "RawRunResult",
    "Runner",
    "ScriptedRunner",
    "SubprocessRunner",
    "ThreatModelPolicy",
    "ThreatModelWarning",
    "classify_evidence",
    "execute",
    "flag_name",
    "shuffled_log",
    "validate_request",
]
