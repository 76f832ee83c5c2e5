"""Stage tool surfaces.

Every stage gets workspace inspection tools (read_file, search_code, a
shell with a command allowlist). Artifact fetching belongs to analysis,
scenario submission to investigation, PoC execution to the reproduction
and validation stages; merged shapes take the union of what they merge.
Invoking a tool outside its stage is an error result, not a crash.

Repository history is only ever exposed shuffled (see gitlog): agents
must reason from code, not from how recently a line changed.
"""

from __future__ import annotations

import json
import re
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from variantlab.executor.gitlog import shuffled_log

READ_CHAR_LIMIT = 20000
SHELL_CHAR_LIMIT = 20000
SEARCH_MATCH_LIMIT = 50
SHELL_TIMEOUT = 30.0
DEFAULT_SHELL_ALLOWLIST = ("git", "ls", "cat", "grep", "head", "tail", "wc", "find", "file")


class ToolError(Exception):
    """Handler-level failure reported back to the agent as an error result."""


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    parameters: dict[str, Any]

    def as_dict(self) -> dict[str, Any]:
        return {"name": self.name, "description": self.description, "parameters": self.parameters}


@dataclass(frozen=True)
class ToolResult:
    content: str
    error: bool = False


Handler = Callable[[dict[str, Any]], Any]


class ToolRegistry:
    def __init__(self) -> None:
        self._entries: dict[str, tuple[ToolSpec, Handler]] = {}

    def register(self, spec: ToolSpec, handler: Handler) -> None:
        if spec.name in self._entries:
            raise ValueError(f"duplicate tool {spec.name!r}")
        self._entries[spec.name] = (spec, handler)

    def specs(self) -> tuple[dict[str, Any], ...]:
        return tuple(entry[0].as_dict() for entry in self._entries.values())

    def names(self) -> tuple[str, ...]:
        return tuple(self._entries)

    def dispatch(self, name: str, arguments: dict[str, Any]) -> ToolResult:
        entry = self._entries.get(name)
        if entry is None:
            return ToolResult(json.dumps({"error": f"tool {name!r} is not available in this stage"}), error=True)
        _, handler = entry
        try:
            value = handler(arguments)
        except ToolError as exc:
            return ToolResult(json.dumps({"error": str(exc)}), error=True)
        if isinstance(value, str):
            return ToolResult(value)
        return ToolResult(json.dumps(value, sort_keys=True))


def _truncate(text: str, limit: int) -> str:
    if len(text) <= limit:
        return text
    return text[:limit] + f"\n[truncated at {limit} characters]"


def _resolve_inside(checkout: Path, raw: str) -> Path:
    candidate = (checkout / raw).resolve()
    root = checkout.resolve()
    if candidate != root and root not in candidate.parents:
        raise ToolError(f"path {raw!r} escapes the workspace")
    return candidate


def add_workspace_tools(
    registry: ToolRegistry,
    checkout: Path,
    *,
    run_seed: int | None = None,
    shell_allowlist: tuple[str, ...] = DEFAULT_SHELL_ALLOWLIST,
) -> None:
    def read_file(args: dict[str, Any]) -> str:
        path = _resolve_inside(checkout, str(args.get("path", "")))
        if not path.is_file():
            raise ToolError(f"no such file: {args.get('path')!r}")
        lines = path.read_text(errors="replace").splitlines(keepends=True)
        start = int(args.get("line_start", 1))
        end = int(args.get("line_end", len(lines)))
        if start < 1 or end < start:
            raise ToolError("line_start must be >= 1 and line_end >= line_start")
        return _truncate("".join(lines[start - 1 : end]), READ_CHAR_LIMIT)

    def search_code(args: dict[str, Any]) -> dict[str, Any]:
        pattern = str(args.get("pattern", ""))
        if not pattern:
            raise ToolError("pattern is required")
        try:
            compiled = re.compile(pattern)
        except re.error as exc:
            raise ToolError(f"bad pattern: {exc}") from exc
        glob = str(args.get("glob", "**/*"))
        matches: list[str] = []
        for path in sorted(checkout.glob(glob)):
            if not path.is_file() or path.stat().st_size > 2_000_000:
                continue
            try:
                text = path.read_text(errors="strict")
            except (UnicodeDecodeError, OSError):
                continue
            rel = path.relative_to(checkout)
            for number, line in enumerate(text.splitlines(), start=1):
                if compiled.search(line):
                    matches.append(f"{rel}:{number}: {line.strip()}")
                    if len(matches) >= SEARCH_MATCH_LIMIT:
                        return {"matches": matches, "truncated": True}
        return {"matches": matches, "truncated": False}

    def shell(args: dict[str, Any]) -> dict[str, Any]:
        command = str(args.get("command", ""))
        try:
            argv = shlex.split(command)
        except ValueError as exc:
            raise ToolError(f"unparseable command: {exc}") from exc
        if not argv:
            raise ToolError("empty command")
        program = Path(argv[0]).name
        if program not in shell_allowlist:
            raise ToolError(f"command {program!r} is not allowlisted")
        if program == "git" and "log" in argv[1:]:
            return _shuffled_git_log(argv)
        completed = subprocess.run(
            argv,
            cwd=checkout,
            capture_output=True,
            text=True,
            timeout=SHELL_TIMEOUT,
            env={"PATH": "/usr/bin:/bin:/usr/local/bin", "HOME": str(checkout), "LANG": "C.UTF-8"},
        )
        return {
            "exit_code": completed.returncode,
            "stdout": _truncate(completed.stdout, SHELL_CHAR_LIMIT),
            "stderr": _truncate(completed.stderr, SHELL_CHAR_LIMIT),
        }

    def _shuffled_git_log(argv: list[str]) -> dict[str, Any]:
        no_shuffle = "--no-shuffle" in argv
        passthrough = [a for a in argv if a != "--no-shuffle"]
        completed = subprocess.run(
            passthrough,
            cwd=checkout,
            capture_output=True,
            text=True,
            timeout=SHELL_TIMEOUT,
            env={"PATH": "/usr/bin:/bin:/usr/local/bin", "HOME": str(checkout), "LANG": "C.UTF-8"},
        )
        if completed.returncode != 0:
            return {"exit_code": completed.returncode, "stdout": "", "stderr": _truncate(completed.stderr, SHELL_CHAR_LIMIT)}
        # One entry per commit: force a one-line format unless the caller set one.
        entries = [line for line in completed.stdout.splitlines() if line.strip()]
        shuffled = shuffled_log(entries, no_shuffle=no_shuffle, run_seed=run_seed)
        return {"exit_code": 0, "stdout": _truncate("\n".join(shuffled), SHELL_CHAR_LIMIT), "stderr": ""}

    registry.register(
        ToolSpec(
            "read_file",
            "Read a file from the workspace checkout, optionally a line range.",
            {"type": "object", "properties": {"path": {"type": "string"}, "line_start": {"type": "integer"}, "line_end": {"type": "integer"}}, "required": ["path"]},
        ),
        read_file,
    )
    registry.register(
        ToolSpec(
            "search_code",
            "Regex-search text files in the checkout; returns path:line matches.",
            {"type": "object", "properties": {"pattern": {"type": "string"}, "glob": {"type": "string"}}, "required": ["pattern"]},
        ),
        search_code,
    )
    registry.register(
        ToolSpec(
            "shell",
            "Run an allowlisted read-only command in the checkout. Repository history comes back in randomized order; pass --no-shuffle to git log for original order.",
            {"type": "object", "properties": {"command": {"type": "string"}}, "required": ["command"]},
        ),
        shell,
    )


def add_artifact_tool(registry: ToolRegistry, fetch: Callable[[], dict[str, Any]]) -> None:
    def handler(_: dict[str, Any]) -> dict[str, Any]:
        return fetch()

    registry.register(
        ToolSpec(
            "fetch_artifacts",
            "Fetch the original bug's discussion, patches, review notes, and PoC.",
            {"type": "object", "properties": {}},
        ),
        handler,
    )


def add_scenario_tool(registry: ToolRegistry, submit: Callable[..., dict[str, Any]]) -> None:
    def handler(args: dict[str, Any]) -> dict[str, Any]:
        raw_locations = args.get("locations")
        if not isinstance(raw_locations, list) or not raw_locations:
            raise ToolError("locations must be a non-empty list")
        hypothesis = str(args.get("hypothesis", "")).strip()
        if not hypothesis:
            raise ToolError("hypothesis is required")
        return submit(
            locations=raw_locations,
            hypothesis=hypothesis,
            trigger_path=str(args.get("trigger_path", "")),
            advisory_notes=str(args.get("advisory_notes", "")),
        )

    registry.register(
        ToolSpec(
            "submit_scenario",
            "Register a bug hypothesis with the coverage gate; returns the approval decision.",
            {
                "type": "object",
                "properties": {
                    "locations": {"type": "array", "items": {"type": "object", "properties": {"file": {"type": "string"}, "line_start": {"type": "integer"}, "line_end": {"type": "integer"}}}},
                    "hypothesis": {"type": "string"},
                    "trigger_path": {"type": "string"},
                    "advisory_notes": {"type": "string"},
                },
                "required": ["locations", "hypothesis"],
            },
        ),
        handler,
    )


def add_execute_tool(registry: ToolRegistry, execute: Callable[..., dict[str, Any]]) -> None:
    def handler(args: dict[str, Any]) -> dict[str, Any]:
        poc = str(args.get("poc", ""))
        if not poc.strip():
            raise ToolError("poc source is required")
        extra = args.get("extra_flags", [])
        if not isinstance(extra, list):
            raise ToolError("extra_flags must be a list")
        timeout = args.get("timeout")
        return execute(
            poc=poc,
            build=str(args.get("build", "release")),
            architecture=str(args.get("architecture", "x64")),
            extra_flags=tuple(str(f) for f in extra),
            timeout=float(timeout) if timeout is not None else None,
        )

    registry.register(
        ToolSpec(
            "execute_poc",
            "Run JavaScript against a selected engine build and classify the outcome.",
            {
                "type": "object",
                "properties": {
                    "poc": {"type": "string"},
                    "build": {"type": "string", "enum": ["release", "debug"]},
                    "architecture": {"type": "string"},
                    "extra_flags": {"type": "array", "items": {"type": "string"}},
                    "timeout": {"type": "number"},
                },
                "required": ["poc"],
            },
        ),
        handler,
    )
