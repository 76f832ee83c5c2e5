"""Threat-model policy: which flags and runtime natives a PoC may use.

Findings that only reproduce with security-disabling flags or debug-only
natives are not realistic attacker capabilities, so requests using them
carry warnings. Warnings are advisory at execution time (the run proceeds)
and disqualifying at validation time unless explicitly waived in the
report.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import yaml

from variantlab.errors import ConfigurationError

# Flags that disable a security boundary outright.
DEFAULT_FLAG_BLOCKLIST_EXACT = frozenset({"expose-memory-corruption-api", "no-sandbox"})

# Substrings matched case-sensitively against the flag name segment only
# (never the value): experimental features are out of scope.
DEFAULT_FLAG_BLOCKLIST_SUBSTRINGS = ("experimental",)

# Runtime natives a PoC may invoke: optimization control/observation only.
# Operators may edit this set per target; the defaults are the usual
# tiering controls.
DEFAULT_NATIVE_ALLOWLIST = frozenset(
    {
        "OptimizeFunctionOnNextCall",
        "PrepareFunctionForOptimization",
        "OptimizeMaglevOnNextCall",
        "OptimizeOsr",
        "DeoptimizeFunction",
        "DeoptimizeNow",
        "NeverOptimizeFunction",
        "CompileBaseline",
        "BaselineOsr",
        "EnsureFeedbackVectorForFunction",
        "DisableOptimizationFinalization",
        "FinalizeOptimization",
        "WaitForBackgroundOptimization",
        "ActiveTierIsTurbofan",
        "ActiveTierIsMaglev",
    }
)

# Flags prepended to every execution, no exceptions.
DEFAULT_ALWAYS_FLAGS = ("allow-natives-syntax", "expose-gc")

# Output markers, exact substrings.
SANDBOX_VIOLATION_MARKER = "V8 sandbox violation detected"
DEFAULT_BENIGN_SANDBOX_MARKERS = ("Safely terminating process",)

# Release-build invariant failures are intentional detection, not a bug;
# debug-only assertion failures are evidence.
DEFAULT_CHECK_PATTERNS = ("Check failed:",)
DEFAULT_DCHECK_PATTERNS = ("Debug check failed",)

# A PoC prints this when its own expected-vs-actual comparison fails;
# mapped to candidate evidence pending validation.
DEFAULT_SPEC_VIOLATION_MARKERS = ("SPEC-VIOLATION-DETECTED",)

# Natives are capitalized call forms (%Name(...)); requiring the paren and
# the uppercase initial keeps modulo arithmetic (a%b) out of the match.
_NATIVE_RE = re.compile(r"%([A-Z][A-Za-z0-9_]*)\s*\(")


@dataclass(frozen=True)
class ThreatModelWarning:
    kind: str  # blocked_flag | disallowed_native | check_failure | sandbox_benign
    subject: str
    message: str


@dataclass(frozen=True)
class ThreatModelPolicy:
    flag_blocklist_exact: frozenset[str] = DEFAULT_FLAG_BLOCKLIST_EXACT
    flag_blocklist_substrings: tuple[str, ...] = DEFAULT_FLAG_BLOCKLIST_SUBSTRINGS
    native_allowlist: frozenset[str] = DEFAULT_NATIVE_ALLOWLIST
    always_flags: tuple[str, ...] = DEFAULT_ALWAYS_FLAGS
    sandbox_violation_marker: str = SANDBOX_VIOLATION_MARKER
    benign_sandbox_markers: tuple[str, ...] = DEFAULT_BENIGN_SANDBOX_MARKERS
    check_patterns: tuple[str, ...] = DEFAULT_CHECK_PATTERNS
    dcheck_patterns: tuple[str, ...] = DEFAULT_DCHECK_PATTERNS
    spec_violation_markers: tuple[str, ...] = DEFAULT_SPEC_VIOLATION_MARKERS
    default_timeout: float = 300.0

    def __post_init__(self) -> None:
        if self.default_timeout <= 0:
            raise ConfigurationError("default_timeout must be positive")
        overlap = {flag_name(f) for f in self.always_flags} & set(self.flag_blocklist_exact)
        if overlap:
            raise ConfigurationError(f"always_flags intersect the blocklist: {sorted(overlap)}")
        for f in self.always_flags:
            if self._blocked_reason(flag_name(f)):
                raise ConfigurationError(f"always flag {f!r} is blocked by policy")

    def _blocked_reason(self, name: str) -> str | None:
        if name in self.flag_blocklist_exact:
            return f"flag {name!r} disables a security boundary"
        for substring in self.flag_blocklist_substrings:
            if substring in name:
                return f"flag {name!r} matches blocked substring {substring!r}"
        return None

    @classmethod
    def from_dict(cls, data: dict) -> "ThreatModelPolicy":
        kwargs: dict = {}
        if "flag_blocklist_exact" in data:
            kwargs["flag_blocklist_exact"] = frozenset(data["flag_blocklist_exact"])
        if "flag_blocklist_substrings" in data:
            kwargs["flag_blocklist_substrings"] = tuple(data["flag_blocklist_substrings"])
        if "native_allowlist" in data:
            kwargs["native_allowlist"] = frozenset(data["native_allowlist"])
        if "always_flags" in data:
            kwargs["always_flags"] = tuple(data["always_flags"])
        for key in (
            "sandbox_violation_marker",
            "default_timeout",
        ):
            if key in data:
                kwargs[key] = data[key]
        for key in ("benign_sandbox_markers", "check_patterns", "dcheck_patterns", "spec_violation_markers"):
            if key in data:
                kwargs[key] = tuple(data[key])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "ThreatModelPolicy":
        raw = Path(path).read_text()
        data = yaml.safe_load(raw) if str(path).endswith((".yaml", ".yml")) else json.loads(raw)
        return cls.from_dict(data or {})


def flag_name(flag: str) -> str:
    """The name segment of a command-line flag: dashes stripped, value dropped."""
    return flag.lstrip("-").split("=", 1)[0]


def validate_request(extra_flags: tuple[str, ...], poc: str, policy: ThreatModelPolicy) -> list[ThreatModelWarning]:
    """Threat-model warnings for one execution request.

    One warning per offending flag entry and per disallowed native
    invocation occurrence. Warnings never block execution.
    """
    warnings: list[ThreatModelWarning] = []
    for flag in extra_flags:
        reason = policy._blocked_reason(flag_name(flag))
        if reason:
            warnings.append(ThreatModelWarning(kind="blocked_flag", subject=flag, message=reason))
    for match in _NATIVE_RE.finditer(poc):
        native = match.group(1)
        if native not in policy.native_allowlist:
            warnings.append(
                ThreatModelWarning(
                    kind="disallowed_native",
                    subject=f"%{native}",
                    message=f"runtime native %{native} is outside the optimization-control allowlist",
                )
            )
    return warnings
