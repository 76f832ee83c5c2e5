"""Coverage gate: linearizable check-then-record over the coverage store.

Writers are serialized per file-path shard: a proposal locks every file it
touches (sorted, so lock order is global) before checking and inserting.
Two concurrent proposals sharing a file therefore serialize, which makes
"exactly one of N identical proposals is approved" hold under any
interleaving. Proposals with disjoint files never interact spatially and
may proceed in parallel.
"""

from __future__ import annotations

import json
import threading
from contextlib import contextmanager
from typing import Iterable, Protocol, Sequence

from variantlab.clock import Clock, SystemClock, isoformat
from variantlab.coverage.judge import JudgeSubject, SemanticJudge
from variantlab.coverage.models import CoverageEntry, OverlapDecision, Verdict
from variantlab.coverage.window import WINDOW_LINES, spatial_overlaps
from variantlab.pipeline.models import Location


class CoverageStore(Protocol):
    def insert(self, entry: CoverageEntry) -> None: ...

    def entries(self) -> list[CoverageEntry]: ...

    def for_files(self, files: Iterable[str]) -> list[CoverageEntry]: ...


class MemoryCoverageStore:
    """Append-only in-memory entry store with a per-file index."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._entries: list[CoverageEntry] = []
        self._by_file: dict[str, list[int]] = {}

    def insert(self, entry: CoverageEntry) -> None:
        with self._lock:
            index = len(self._entries)
            self._entries.append(entry)
            for loc in entry.locations:
                self._by_file.setdefault(loc.file, []).append(index)

    def entries(self) -> list[CoverageEntry]:
        with self._lock:
            return list(self._entries)

    def for_files(self, files: Iterable[str]) -> list[CoverageEntry]:
        with self._lock:
            seen: set[int] = set()
            for f in files:
                seen.update(self._by_file.get(f, ()))
            return [self._entries[i] for i in sorted(seen)]


class ScenarioLike(Protocol):
    locations: Sequence[Location]
    hypothesis: str


class CoverageTracker:
    """The campaign-global coverage gate."""

    def __init__(
        self,
        store: CoverageStore | None = None,
        judge: SemanticJudge | None = None,
        window: int = WINDOW_LINES,
        clock: Clock | None = None,
    ):
        if judge is None:
            raise ValueError("a semantic judge is required")
        self._store = store if store is not None else MemoryCoverageStore()
        self._judge = judge
        self._window = window
        self._clock = clock or SystemClock()
        self._meta_lock = threading.Lock()
        self._shard_locks: dict[str, threading.Lock] = {}
        self._counter = 0
        self._counter_lock = threading.Lock()

    @property
    def store(self) -> CoverageStore:
        return self._store

    def _shard(self, file: str) -> threading.Lock:
        with self._meta_lock:
            lock = self._shard_locks.get(file)
            if lock is None:
                lock = self._shard_locks[file] = threading.Lock()
            return lock

    @contextmanager
    def _locked(self, files: Sequence[str]):
        # Sorted acquisition gives a global lock order: no deadlock.
        locks = [self._shard(f) for f in sorted(set(files))]
        for lock in locks:
            lock.acquire()
        try:
            yield
        finally:
            for lock in reversed(locks):
                lock.release()

    def _next_entry_id(self) -> str:
        with self._counter_lock:
            self._counter += 1
            return f"cov-{self._counter:05d}"

    def check_and_record(
        self,
        proposed: ScenarioLike,
        origin_seed_id: str = "",
        entry_id: str | None = None,
    ) -> OverlapDecision:
        """Atomically decide a proposal and record its footprint on approval.

        Raises JudgeUnavailableError without recording anything when the
        semantic judge is down: the gate fails closed and the caller holds
        the scenario.
        """
        files = [loc.file for loc in proposed.locations]
        subject = JudgeSubject(hypothesis=proposed.hypothesis, locations=tuple(proposed.locations))
        with self._locked(files):
            candidates = self._store.for_files(set(files))
            matches = spatial_overlaps(proposed, candidates, self._window)
            match_ids = tuple(m.entry_id for m in matches)
            for match in matches:
                verdict = self._judge.compare(subject, match)
                if verdict.redundant:
                    return OverlapDecision(
                        verdict=Verdict.REJECTED_REDUNDANT,
                        spatial_matches=match_ids,
                        semantic_match=match.entry_id,
                        judge_rationale=verdict.rationale,
                    )
            entry = CoverageEntry(
                entry_id=entry_id or getattr(proposed, "id", None) or self._next_entry_id(),
                locations=tuple(proposed.locations),
                hypothesis=proposed.hypothesis,
                origin_seed_id=origin_seed_id or getattr(proposed, "seed_id", ""),
                approved_at=isoformat(self._clock.now()),
            )
            self._store.insert(entry)
            return OverlapDecision(verdict=Verdict.APPROVED, spatial_matches=match_ids, entry_id=entry.entry_id)


def export_entries(store: CoverageStore) -> str:
    """Line-delimited export, one record per entry location.

    Record fields: file, start, end, hypothesis, origin_seed, approved_at.
    Multi-location entries emit consecutive lines sharing the other fields.
    """
    lines = []
    for entry in store.entries():
        for loc in entry.locations:
            lines.append(
                json.dumps(
                    {
                        "file": loc.file,
                        "start": loc.line_start,
                        "end": loc.line_end,
                        "hypothesis": entry.hypothesis,
                        "origin_seed": entry.origin_seed_id,
                        "approved_at": entry.approved_at,
                    },
                    sort_keys=True,
                )
            )
    return "\n".join(lines) + ("\n" if lines else "")


def import_entries(text: str, store: CoverageStore, id_prefix: str = "imported") -> int:
    """Rebuild entries from an export; consecutive records sharing
    (hypothesis, origin_seed, approved_at) regroup into one entry."""
    groups: list[tuple[tuple[str, str, str], list[Location]]] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        key = (rec["hypothesis"], rec["origin_seed"], rec["approved_at"])
        loc = Location(rec["file"], int(rec["start"]), int(rec["end"]))
        if groups and groups[-1][0] == key:
            groups[-1][1].append(loc)
        else:
            groups.append((key, [loc]))
    for n, (key, locs) in enumerate(groups, start=1):
        hypothesis, origin_seed, approved_at = key
        store.insert(
            CoverageEntry(
                entry_id=f"{id_prefix}-{n:05d}",
                locations=tuple(locs),
                hypothesis=hypothesis,
                origin_seed_id=origin_seed,
                approved_at=approved_at,
            )
        )
    return len(groups)
