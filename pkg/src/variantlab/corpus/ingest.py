"""Tracker-export ingestion.

The export format is line-delimited JSON, one record per line:

    {"id": "440048019", "url": "https://tracker/440048019",
     "title": "...", "labels": ["Security"], "created_at": "2025-06-01T12:00:00Z",
     "body": "..."}

Records may carry "commit" instead of "url" when the seed is a security
commit rather than a tracker issue. Full field reference: docs/formats.md.
Malformed records are rejected individually; one bad line never aborts the
batch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from variantlab.corpus.models import Seed, SeedStatus, parse_timestamp
from variantlab.corpus.store import CorpusStore

# Tracker labels that exclude a seed from campaigns, normalized to
# lowercase with '-' separators before lookup.
_STATUS_BY_LABEL = {
    "duplicate": SeedStatus.DUPLICATE,
    "intended-behavior": SeedStatus.INTENDED_BEHAVIOR,
    "working-as-intended": SeedStatus.INTENDED_BEHAVIOR,
    "infeasible": SeedStatus.INFEASIBLE,
    "obsolete": SeedStatus.OBSOLETE,
    "non-reproducible": SeedStatus.NON_REPRODUCIBLE,
}


@dataclass(frozen=True)
class RecordRejection:
    line_number: int
    reason: str
    raw: str


@dataclass
class IngestResult:
    seeds: list[Seed] = field(default_factory=list)
    rejections: list[RecordRejection] = field(default_factory=list)
    inserted: int = 0
    updated: int = 0


def _normalize_label(label: str) -> str:
    return label.strip().lower().replace("_", "-").replace(" ", "-")


def status_from_labels(labels: list[str]) -> SeedStatus:
    """First matching exclusion label wins; unlabeled records are valid."""
    for label in labels:
        status = _STATUS_BY_LABEL.get(_normalize_label(label))
        if status is not None:
            return status
    return SeedStatus.VALID


def _parse_record(obj: dict) -> Seed:
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    raw_id = obj.get("id")
    if raw_id is None or (isinstance(raw_id, str) and not raw_id.strip()):
        raise ValueError("missing field: id")
    seed_id = str(raw_id).strip()

    url = obj.get("url")
    commit = obj.get("commit")
    if url:
        source = str(url)
    elif commit:
        source = str(commit)
    else:
        raise ValueError("missing field: url or commit")

    title = obj.get("title")
    if not isinstance(title, str) or not title.strip():
        raise ValueError("missing field: title")

    created_at = obj.get("created_at")
    if not isinstance(created_at, str):
        raise ValueError("missing field: created_at")
    try:
        parse_timestamp(created_at)
    except ValueError as exc:
        raise ValueError(f"bad created_at: {exc}") from exc

    labels = obj.get("labels", [])
    if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
        raise ValueError("bad field: labels must be a list of strings")

    body = obj.get("body", "")
    if not isinstance(body, str):
        raise ValueError("bad field: body must be a string")

    return Seed(
        id=seed_id,
        source=source,
        title=title.strip(),
        created_at=created_at,
        status=status_from_labels(labels),
        body=body,
        labels=tuple(labels),
    )


def parse_export(text: str) -> tuple[list[Seed], list[RecordRejection]]:
    """Parse a line-delimited export; returns (seeds, per-record rejections)."""
    seeds: list[Seed] = []
    rejections: list[RecordRejection] = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            rejections.append(RecordRejection(line_number, f"invalid JSON: {exc.msg}", stripped))
            continue
        try:
            seeds.append(_parse_record(obj))
        except ValueError as exc:
            rejections.append(RecordRejection(line_number, str(exc), stripped))
    return seeds, rejections


def ingest_tracker_export(text: str, store: CorpusStore) -> IngestResult:
    """Upsert every parseable record; re-ingesting the same export is a no-op."""
    seeds, rejections = parse_export(text)
    result = IngestResult(seeds=seeds, rejections=rejections)
    for seed in seeds:
        existing = store.get_seed(seed.id)
        if existing is None:
            result.inserted += 1
        elif _core_fields(existing) != _core_fields(seed):
            result.updated += 1
        else:
            continue
        # Preserve artifacts already fetched for this seed.
        if existing is not None:
            seed = seed.with_artifacts(existing.artifacts)
        store.upsert_seed(seed)
    return result


def _core_fields(seed: Seed) -> tuple:
    return (seed.id, seed.source, seed.title, seed.created_at, seed.status, seed.body, seed.labels)
