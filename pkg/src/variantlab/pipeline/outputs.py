"""Parsing and validation of final stage outputs.

Stages end with one JSON document. Parsing is strict about the fields
downstream code relies on; a failure carries a reason the orchestrator
hands back to the agent for exactly one repair attempt.
"""

from __future__ import annotations

import json
import re
from typing import Any

from variantlab.pipeline.models import AffectedSite, AnalysisReport

_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


class StageOutputError(Exception):
    """Final output failed schema validation; str(exc) explains what to fix."""


def extract_json(text: str) -> dict[str, Any]:
    """Parse a JSON object from final text, tolerating a code fence around it."""
    candidate = text.strip()
    fenced = _FENCE_RE.search(candidate)
    if fenced:
        candidate = fenced.group(1).strip()
    try:
        value = json.loads(candidate)
    except json.JSONDecodeError as exc:
        raise StageOutputError(f"not valid JSON: {exc}") from exc
    if not isinstance(value, dict):
        raise StageOutputError("top-level JSON value must be an object")
    return value


def _require_str(data: dict[str, Any], key: str) -> str:
    value = data.get(key)
    if not isinstance(value, str) or not value.strip():
        raise StageOutputError(f"field {key!r} must be a non-empty string")
    return value


def _optional_str(data: dict[str, Any], key: str) -> str:
    value = data.get(key, "")
    if not isinstance(value, str):
        raise StageOutputError(f"field {key!r} must be a string")
    return value


def _str_list(data: dict[str, Any], key: str, *, required: bool = False) -> tuple[str, ...]:
    value = data.get(key, [])
    if not isinstance(value, list) or any(not isinstance(item, str) for item in value):
        raise StageOutputError(f"field {key!r} must be a list of strings")
    if required and not value:
        raise StageOutputError(f"field {key!r} must not be empty")
    return tuple(value)


def parse_analysis(text: str, seed_id: str) -> AnalysisReport:
    data = extract_json(text)
    affected_raw = data.get("affected", [])
    if not isinstance(affected_raw, list):
        raise StageOutputError("field 'affected' must be a list")
    affected = []
    for item in affected_raw:
        if not isinstance(item, dict) or "file" not in item:
            raise StageOutputError("each 'affected' entry needs a 'file'")
        affected.append(AffectedSite(file=str(item["file"]), function=str(item.get("function", ""))))
    return AnalysisReport(
        seed_id=seed_id,
        root_cause=_require_str(data, "root_cause"),
        bug_mechanism=_str_list(data, "bug_mechanism", required=True),
        impact=_require_str(data, "impact"),
        fix_description=_require_str(data, "fix_description"),
        affected=tuple(affected),
        vulnerable_snippets=_str_list(data, "vulnerable_snippets"),
        patch=_optional_str(data, "patch"),
    )


def parse_investigation_summary(text: str) -> dict[str, Any]:
    data = extract_json(text)
    _require_str(data, "summary")
    return data


def parse_scenario_result(text: str) -> dict[str, Any]:
    data = extract_json(text)
    status = data.get("status")
    if status not in ("success", "failure"):
        raise StageOutputError("field 'status' must be 'success' or 'failure'")
    if status == "success":
        _require_str(data, "poc")
    data.setdefault("poc", "")
    data["evidence_summary"] = _optional_str(data, "evidence_summary")
    data["approaches_tried"] = list(_str_list(data, "approaches_tried"))
    return data


def parse_validation(text: str) -> dict[str, Any]:
    data = extract_json(text)
    verdict = data.get("verdict")
    if verdict not in ("confirmed", "refuted"):
        raise StageOutputError("field 'verdict' must be 'confirmed' or 'refuted'")
    if verdict == "confirmed":
        for key in ("title", "root_cause", "mechanism", "poc"):
            _require_str(data, key)
    for key in ("title", "root_cause", "mechanism", "poc", "suggested_patch", "rationale"):
        data[key] = _optional_str(data, key)
    data["waived_warnings"] = list(_str_list(data, "waived_warnings"))
    data["scenario_id"] = _optional_str(data, "scenario_id")
    return data


def parse_finder_results(text: str) -> dict[str, Any]:
    """Merged-stage output carrying per-scenario reproduction results."""
    data = extract_json(text)
    _require_str(data, "summary")
    results_raw = data.get("scenario_results", [])
    if not isinstance(results_raw, list):
        raise StageOutputError("field 'scenario_results' must be a list")
    results = []
    for item in results_raw:
        if not isinstance(item, dict):
            raise StageOutputError("each scenario result must be an object")
        status = item.get("status")
        if status not in ("success", "failure"):
            raise StageOutputError("scenario result 'status' must be 'success' or 'failure'")
        entry = {
            "scenario_id": _require_str(item, "scenario_id"),
            "status": status,
            "poc": _require_str(item, "poc") if status == "success" else _optional_str(item, "poc"),
        }
        results.append(entry)
    data["scenario_results"] = results
    return data
