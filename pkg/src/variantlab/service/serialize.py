"""JSON document converters for persisted domain objects.

Every converter pair round-trips exactly: from_doc(to_doc(x)) == x. The
store and the API both speak these documents, so CLI and dashboard see
the same shapes.
"""

from __future__ import annotations

from typing import Any

from variantlab.corpus.models import Embedding, PreAnalysis, Seed, SeedArtifacts, SeedStatus
from variantlab.coverage.models import CoverageEntry
from variantlab.pipeline.models import (
    AgentRun,
    Location,
    RunOutcome,
    Scenario,
    ScenarioState,
    Stage,
    VulnerabilityReport,
)


def seed_to_doc(seed: Seed) -> dict[str, Any]:
    return {
        "id": seed.id,
        "source": seed.source,
        "title": seed.title,
        "created_at": seed.created_at,
        "status": seed.status.value,
        "body": seed.body,
        "labels": list(seed.labels),
        "artifacts": {
            "discussion": seed.artifacts.discussion,
            "patches": seed.artifacts.patches,
            "review": seed.artifacts.review,
            "poc": seed.artifacts.poc,
            "fetched_at": seed.artifacts.fetched_at,
        },
    }


def seed_from_doc(doc: dict[str, Any]) -> Seed:
    art = doc.get("artifacts") or {}
    return Seed(
        id=doc["id"],
        source=doc["source"],
        title=doc["title"],
        created_at=doc["created_at"],
        status=SeedStatus(doc["status"]),
        body=doc.get("body", ""),
        labels=tuple(doc.get("labels", ())),
        artifacts=SeedArtifacts(
            discussion=art.get("discussion"),
            patches=art.get("patches"),
            review=art.get("review"),
            poc=art.get("poc"),
            fetched_at=art.get("fetched_at"),
        ),
    )


def preanalysis_to_doc(pre: PreAnalysis) -> dict[str, Any]:
    return {
        "seed_id": pre.seed_id,
        "text": pre.text,
        "prompt_version": pre.prompt_version,
        "produced_by": pre.produced_by,
        "cost": pre.cost,
        "duration": pre.duration,
    }


def preanalysis_from_doc(doc: dict[str, Any]) -> PreAnalysis:
    return PreAnalysis(
        seed_id=doc["seed_id"],
        text=doc["text"],
        prompt_version=doc["prompt_version"],
        produced_by=doc["produced_by"],
        cost=doc.get("cost", 0.0),
        duration=doc.get("duration", 0.0),
    )


def embedding_to_doc(emb: Embedding) -> dict[str, Any]:
    return {"seed_id": emb.seed_id, "vector": list(emb.vector), "provider_tag": emb.provider_tag}


def embedding_from_doc(doc: dict[str, Any]) -> Embedding:
    return Embedding(seed_id=doc["seed_id"], vector=tuple(doc["vector"]), provider_tag=doc["provider_tag"])


def location_to_doc(loc: Location) -> dict[str, Any]:
    return {"file": loc.file, "line_start": loc.line_start, "line_end": loc.line_end}


def location_from_doc(doc: dict[str, Any]) -> Location:
    return Location(file=doc["file"], line_start=doc["line_start"], line_end=doc["line_end"])


def scenario_to_doc(scenario: Scenario) -> dict[str, Any]:
    return {
        "id": scenario.id,
        "seed_id": scenario.seed_id,
        "locations": [location_to_doc(loc) for loc in scenario.locations],
        "hypothesis": scenario.hypothesis,
        "trigger_path": scenario.trigger_path,
        "advisory_notes": scenario.advisory_notes,
        "state": scenario.state.value,
        "poc": scenario.poc,
    }


def scenario_from_doc(doc: dict[str, Any]) -> Scenario:
    return Scenario(
        id=doc["id"],
        seed_id=doc["seed_id"],
        locations=tuple(location_from_doc(d) for d in doc["locations"]),
        hypothesis=doc["hypothesis"],
        trigger_path=doc.get("trigger_path", ""),
        advisory_notes=doc.get("advisory_notes", ""),
        state=ScenarioState(doc["state"]),
        poc=doc.get("poc"),
    )


def run_to_doc(run: AgentRun) -> dict[str, Any]:
    return {
        "id": run.id,
        "stage": run.stage.value,
        "seed_id": run.seed_id,
        "transcript": run.transcript,
        "cost": run.cost,
        "input_tokens": run.input_tokens,
        "output_tokens": run.output_tokens,
        "wall_time": run.wall_time,
        "outcome": run.outcome.value,
        "retryable": run.retryable,
        "retries": run.retries,
        "started_at": run.started_at,
    }


def run_from_doc(doc: dict[str, Any]) -> AgentRun:
    return AgentRun(
        id=doc["id"],
        stage=Stage(doc["stage"]),
        seed_id=doc["seed_id"],
        transcript=list(doc.get("transcript", ())),
        cost=doc.get("cost", 0.0),
        input_tokens=doc.get("input_tokens", 0),
        output_tokens=doc.get("output_tokens", 0),
        wall_time=doc.get("wall_time", 0.0),
        outcome=RunOutcome(doc["outcome"]),
        retryable=doc.get("retryable", False),
        retries=doc.get("retries", 0),
        started_at=doc.get("started_at", ""),
    )


def report_to_doc(report: VulnerabilityReport) -> dict[str, Any]:
    return {
        "id": report.id,
        "seed_id": report.seed_id,
        "scenario_id": report.scenario_id,
        "title": report.title,
        "root_cause": report.root_cause,
        "mechanism": report.mechanism,
        "poc": report.poc,
        "release_output": report.release_output,
        "debug_output": report.debug_output,
        "suggested_patch": report.suggested_patch,
        "waived_warnings": list(report.waived_warnings),
        "created_at": report.created_at,
    }


def report_from_doc(doc: dict[str, Any]) -> VulnerabilityReport:
    return VulnerabilityReport(
        id=doc["id"],
        seed_id=doc["seed_id"],
        scenario_id=doc["scenario_id"],
        title=doc["title"],
        root_cause=doc["root_cause"],
        mechanism=doc["mechanism"],
        poc=doc["poc"],
        release_output=doc["release_output"],
        debug_output=doc["debug_output"],
        suggested_patch=doc.get("suggested_patch", ""),
        waived_warnings=tuple(doc.get("waived_warnings", ())),
        created_at=doc.get("created_at", ""),
    )


def coverage_entry_to_doc(entry: CoverageEntry) -> dict[str, Any]:
    return {
        "entry_id": entry.entry_id,
        "locations": [location_to_doc(loc) for loc in entry.locations],
        "hypothesis": entry.hypothesis,
        "origin_seed_id": entry.origin_seed_id,
        "approved_at": entry.approved_at,
    }


def coverage_entry_from_doc(doc: dict[str, Any]) -> CoverageEntry:
    return CoverageEntry(
        entry_id=doc["entry_id"],
        locations=tuple(location_from_doc(d) for d in doc["locations"]),
        hypothesis=doc["hypothesis"],
        origin_seed_id=doc.get("origin_seed_id", ""),
        approved_at=doc.get("approved_at", ""),
    )
