"""Conversational agent backend contract.

A backend is stateless per turn: it receives the system prompt, the
message history, and the tool surface, and answers with either one tool
invocation or final text. The orchestrator owns the loop, tool dispatch,
time-warning injection, and output parsing.

Fixture scripts for the scripted backend are JSON documents:

    {"version": 1,
     "scripts": {"analyzer/seed-1": [
        {"tool": {"name": "read_file", "arguments": {"path": "a.cc"}},
         "usage": {"input_tokens": 900, "output_tokens": 60}, "duration": 30.0},
        {"text": "{...final JSON...}",
         "usage": {"input_tokens": 1200, "output_tokens": 300}, "duration": 45.0}
     ]}}

Stage/context script keys are tried most-specific first:
"{stage}/{seed}/{context}" then "{stage}/{seed}".
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Protocol

import httpx

from variantlab.errors import InfrastructureError
from variantlab.pipeline.models import Stage


@dataclass(frozen=True)
class Usage:
    input_tokens: int = 0
    output_tokens: int = 0
    model: str = ""


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: dict[str, Any]


@dataclass(frozen=True)
class AgentTurn:
    """Either one tool call or final text, never both."""

    tool_call: ToolCall | None = None
    text: str | None = None
    usage: Usage = field(default_factory=Usage)
    duration: float = 0.0

    def __post_init__(self) -> None:
        if (self.tool_call is None) == (self.text is None):
            raise ValueError("a turn is exactly one of tool_call or text")


@dataclass(frozen=True)
class TurnRequest:
    stage: Stage
    seed_id: str
    system_prompt: str
    messages: tuple[dict[str, Any], ...]
    tools: tuple[dict[str, Any], ...]
    effort: str = "medium"
    context_id: str = ""  # scenario id for per-scenario stages


class AgentBackend(Protocol):
    def step(self, request: TurnRequest) -> AgentTurn: ...


@dataclass(frozen=True)
class PriceTable:
    """Currency cost per 1000 tokens, by model tag ('' falls back to default)."""

    input_per_1k: float = 0.003
    output_per_1k: float = 0.015
    by_model: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def cost(self, usage: Usage) -> float:
        rate_in, rate_out = self.by_model.get(usage.model, (self.input_per_1k, self.output_per_1k))
        return (usage.input_tokens * rate_in + usage.output_tokens * rate_out) / 1000.0


class BackendScriptError(Exception):
    """A scripted backend had no (or no more) turns for the requested run."""


def _turn_from_dict(raw: dict[str, Any]) -> AgentTurn:
    usage_raw = raw.get("usage", {})
    usage = Usage(
        input_tokens=int(usage_raw.get("input_tokens", 0)),
        output_tokens=int(usage_raw.get("output_tokens", 0)),
        model=usage_raw.get("model", ""),
    )
    duration = float(raw.get("duration", 0.0))
    if "tool" in raw:
        tool = raw["tool"]
        return AgentTurn(tool_call=ToolCall(name=tool["name"], arguments=dict(tool.get("arguments", {}))), usage=usage, duration=duration)
    return AgentTurn(text=raw["text"], usage=usage, duration=duration)


class ScriptedBackend:
    """Replays authored turn scripts; the workhorse for deterministic tests."""

    def __init__(self, scripts: Mapping[str, list[dict[str, Any]]]):
        self._scripts = {key: list(turns) for key, turns in scripts.items()}
        self._cursors: dict[str, int] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ScriptedBackend":
        return cls(data["scripts"])

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def _key_for(self, request: TurnRequest) -> str:
        specific = f"{request.stage.value}/{request.seed_id}/{request.context_id}"
        if request.context_id and specific in self._scripts:
            return specific
        general = f"{request.stage.value}/{request.seed_id}"
        if general in self._scripts:
            return general
        raise BackendScriptError(f"no script for {specific if request.context_id else general!r}")

    def step(self, request: TurnRequest) -> AgentTurn:
        with self._lock:
            key = self._key_for(request)
            cursor = self._cursors.get(key, 0)
            turns = self._scripts[key]
            if cursor >= len(turns):
                raise BackendScriptError(f"script {key!r} exhausted after {len(turns)} turns")
            self._cursors[key] = cursor + 1
            return _turn_from_dict(turns[cursor])


class HttpAgentBackend:
    """Adapter for a remote agent provider speaking the turn contract.

    POST {url} with the TurnRequest as JSON; the response carries the same
    shape a fixture turn does (tool/text + usage + duration).
    """

    def __init__(self, url: str, client: httpx.Client | None = None, timeout: float = 600.0):
        self.url = url
        self._client = client or httpx.Client(timeout=timeout)

    def step(self, request: TurnRequest) -> AgentTurn:
        payload = {
            "stage": request.stage.value,
            "seed_id": request.seed_id,
            "system_prompt": request.system_prompt,
            "messages": list(request.messages),
            "tools": list(request.tools),
            "effort": request.effort,
            "context_id": request.context_id,
        }
        try:
            response = self._client.post(self.url, json=payload)
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise InfrastructureError(f"agent backend transport failed: {exc}") from exc
        return _turn_from_dict(response.json())
