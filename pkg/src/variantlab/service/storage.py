"""Embedded persistence: one SQLite file holding the whole campaign record.

Materialized tables (seeds, runs, scenarios, coverage, reports, campaigns)
sit next to an append-only event log; every mutation that matters to a
live viewer appends an event carrying the updated document, so the stream
alone can reconstruct the board. A single connection guarded by one lock
serializes writers; WAL keeps the file readable by other processes.

Per-seed checkpointing: pipeline artifacts are written through as they
happen, but a seed only counts as processed once finish_seed() commits
its ledger row. On restart, artifacts of unfinished seeds are purged and
those seeds run again from scratch, so totals never double-count.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

from variantlab.corpus.models import Embedding, PreAnalysis, Seed, SeedStatus
from variantlab.coverage.models import CoverageEntry
from variantlab.pipeline.models import AgentRun, Scenario, ScenarioState, VulnerabilityReport
from variantlab.service import serialize

SCHEMA_VERSION = 1

_TABLES = """
CREATE TABLE IF NOT EXISTS meta (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS seeds (
    id TEXT PRIMARY KEY,
    status TEXT NOT NULL,
    created_at TEXT NOT NULL,
    doc TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS preanalyses (
    seed_id TEXT PRIMARY KEY,
    doc TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS embeddings (
    seed_id TEXT PRIMARY KEY,
    provider_tag TEXT NOT NULL,
    doc TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS campaigns (
    id TEXT PRIMARY KEY,
    state TEXT NOT NULL,
    doc TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS processed_seeds (
    campaign_id TEXT NOT NULL,
    seed_id TEXT NOT NULL,
    position INTEGER NOT NULL,
    cost REAL NOT NULL,
    wall_time REAL NOT NULL,
    status TEXT NOT NULL,
    PRIMARY KEY (campaign_id, seed_id)
);
CREATE TABLE IF NOT EXISTS runs (
    id TEXT NOT NULL,
    campaign_id TEXT NOT NULL,
    seed_id TEXT NOT NULL,
    stage TEXT NOT NULL,
    doc TEXT NOT NULL,
    PRIMARY KEY (campaign_id, id)
);
CREATE TABLE IF NOT EXISTS scenarios (
    id TEXT NOT NULL,
    campaign_id TEXT NOT NULL,
    seed_id TEXT NOT NULL,
    state TEXT NOT NULL,
    doc TEXT NOT NULL,
    PRIMARY KEY (campaign_id, id)
);
CREATE TABLE IF NOT EXISTS coverage_entries (
    entry_id TEXT NOT NULL,
    campaign_id TEXT NOT NULL,
    origin_seed_id TEXT NOT NULL,
    doc TEXT NOT NULL,
    PRIMARY KEY (campaign_id, entry_id)
);
CREATE TABLE IF NOT EXISTS reports (
    id TEXT NOT NULL,
    campaign_id TEXT NOT NULL,
    seed_id TEXT NOT NULL,
    doc TEXT NOT NULL,
    triage TEXT,
    triage_history TEXT NOT NULL DEFAULT '[]',
    PRIMARY KEY (campaign_id, id)
);
CREATE TABLE IF NOT EXISTS events (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    campaign_id TEXT NOT NULL,
    kind TEXT NOT NULL,
    at TEXT NOT NULL,
    doc TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS idempotency (
    token TEXT PRIMARY KEY,
    doc TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS selection_trace (
    campaign_id TEXT NOT NULL,
    step INTEGER NOT NULL,
    chosen TEXT NOT NULL,
    marginal_gain REAL,
    ties_broken INTEGER NOT NULL,
    PRIMARY KEY (campaign_id, step)
);
CREATE INDEX IF NOT EXISTS idx_runs_campaign ON runs (campaign_id, seed_id);
CREATE INDEX IF NOT EXISTS idx_scenarios_campaign ON scenarios (campaign_id, state);
CREATE INDEX IF NOT EXISTS idx_coverage_campaign ON coverage_entries (campaign_id);
CREATE INDEX IF NOT EXISTS idx_reports_campaign ON reports (campaign_id);
CREATE INDEX IF NOT EXISTS idx_events_campaign ON events (campaign_id, seq);
"""


@dataclass(frozen=True)
class EventRecord:
    seq: int
    campaign_id: str
    kind: str
    at: str
    payload: dict[str, Any]


@dataclass(frozen=True)
class ProcessedSeed:
    campaign_id: str
    seed_id: str
    position: int
    cost: float
    wall_time: float
    status: str


class SqliteStore:
    """All persisted state behind one connection and one writer lock.

    Also implements the corpus-store protocol so it can back ingestion
    and scheduling directly.
    """

    def __init__(self, path: str | Path = ":memory:"):
        self.path = str(path)
        if self.path != ":memory:":
            Path(self.path).parent.mkdir(parents=True, exist_ok=True)
        self._conn = sqlite3.connect(self.path, check_same_thread=False, isolation_level=None)
        self._conn.row_factory = sqlite3.Row
        self._lock = threading.RLock()
        self._event_signal = threading.Condition(threading.Lock())
        with self._lock:
            self._conn.execute("PRAGMA journal_mode=WAL")
            self._conn.execute("PRAGMA synchronous=NORMAL")
            self._conn.executescript(_TABLES)
            self._conn.execute(
                "INSERT OR IGNORE INTO meta (key, value) VALUES ('schema_version', ?)",
                (str(SCHEMA_VERSION),),
            )

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    # -- transactions -------------------------------------------------

    def transaction(self) -> "_Transaction":
        return _Transaction(self)

    def _notify_events(self) -> None:
        with self._event_signal:
            self._event_signal.notify_all()

    # -- corpus-store protocol ----------------------------------------

    def upsert_seed(self, seed: Seed) -> None:
        doc = json.dumps(serialize.seed_to_doc(seed))
        with self._lock:
            self._conn.execute(
                "INSERT INTO seeds (id, status, created_at, doc) VALUES (?, ?, ?, ?) "
                "ON CONFLICT(id) DO UPDATE SET status = excluded.status, doc = excluded.doc",
                (seed.id, seed.status.value, seed.created_at, doc),
            )

    def get_seed(self, seed_id: str) -> Seed | None:
        with self._lock:
            row = self._conn.execute("SELECT doc FROM seeds WHERE id = ?", (seed_id,)).fetchone()
        return serialize.seed_from_doc(json.loads(row["doc"])) if row else None

    def seeds(self, status: SeedStatus | None = None) -> list[Seed]:
        query = "SELECT doc FROM seeds"
        args: tuple = ()
        if status is not None:
            query += " WHERE status = ?"
            args = (status.value,)
        with self._lock:
            rows = self._conn.execute(query + " ORDER BY id", args).fetchall()
        return [serialize.seed_from_doc(json.loads(r["doc"])) for r in rows]

    def put_preanalysis(self, pre: PreAnalysis) -> None:
        doc = json.dumps(serialize.preanalysis_to_doc(pre))
        with self._lock:
            self._conn.execute(
                "INSERT INTO preanalyses (seed_id, doc) VALUES (?, ?) "
                "ON CONFLICT(seed_id) DO UPDATE SET doc = excluded.doc",
                (pre.seed_id, doc),
            )

    def get_preanalysis(self, seed_id: str) -> PreAnalysis | None:
        with self._lock:
            row = self._conn.execute("SELECT doc FROM preanalyses WHERE seed_id = ?", (seed_id,)).fetchone()
        return serialize.preanalysis_from_doc(json.loads(row["doc"])) if row else None

    def put_embedding(self, emb: Embedding) -> None:
        doc = json.dumps(serialize.embedding_to_doc(emb))
        with self._lock:
            self._conn.execute(
                "INSERT INTO embeddings (seed_id, provider_tag, doc) VALUES (?, ?, ?) "
                "ON CONFLICT(seed_id) DO UPDATE SET provider_tag = excluded.provider_tag, doc = excluded.doc",
                (emb.seed_id, emb.provider_tag, doc),
            )

    def get_embedding(self, seed_id: str) -> Embedding | None:
        with self._lock:
            row = self._conn.execute("SELECT doc FROM embeddings WHERE seed_id = ?", (seed_id,)).fetchone()
        return serialize.embedding_from_doc(json.loads(row["doc"])) if row else None

    def embeddings(self, seed_ids: Iterable[str] | None = None) -> dict[str, Embedding]:
        with self._lock:
            rows = self._conn.execute("SELECT doc FROM embeddings").fetchall()
        out = {}
        wanted = set(seed_ids) if seed_ids is not None else None
        for row in rows:
            emb = serialize.embedding_from_doc(json.loads(row["doc"]))
            if wanted is None or emb.seed_id in wanted:
                out[emb.seed_id] = emb
        return out

    def campaign_seed_ids(self) -> list[str]:
        """Seeds eligible for campaigns: status valid and a PreAnalysis exists."""
        with self._lock:
            rows = self._conn.execute(
                "SELECT s.id FROM seeds s JOIN preanalyses p ON p.seed_id = s.id "
                "WHERE s.status = ? ORDER BY s.id",
                (SeedStatus.VALID.value,),
            ).fetchall()
        return [r["id"] for r in rows]

    # -- campaigns ----------------------------------------------------

    def put_campaign(self, doc: dict[str, Any]) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT INTO campaigns (id, state, doc) VALUES (?, ?, ?) "
                "ON CONFLICT(id) DO UPDATE SET state = excluded.state, doc = excluded.doc",
                (doc["id"], doc["state"], json.dumps(doc)),
            )

    def get_campaign(self, campaign_id: str) -> dict[str, Any] | None:
        with self._lock:
            row = self._conn.execute("SELECT doc FROM campaigns WHERE id = ?", (campaign_id,)).fetchone()
        return json.loads(row["doc"]) if row else None

    def campaigns(self) -> list[dict[str, Any]]:
        with self._lock:
            rows = self._conn.execute("SELECT doc FROM campaigns ORDER BY id").fetchall()
        return [json.loads(r["doc"]) for r in rows]

    # -- per-seed checkpoint ------------------------------------------

    def processed_seeds(self, campaign_id: str) -> list[ProcessedSeed]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM processed_seeds WHERE campaign_id = ? ORDER BY position",
                (campaign_id,),
            ).fetchall()
        return [
            ProcessedSeed(
                campaign_id=r["campaign_id"],
                seed_id=r["seed_id"],
                position=r["position"],
                cost=r["cost"],
                wall_time=r["wall_time"],
                status=r["status"],
            )
            for r in rows
        ]

    def finish_seed(self, record: ProcessedSeed, event_at: str) -> int:
        """Atomically commit the per-seed ledger row plus its event."""
        with self.transaction():
            self._conn.execute(
                "INSERT INTO processed_seeds (campaign_id, seed_id, position, cost, wall_time, status) "
                "VALUES (?, ?, ?, ?, ?, ?)",
                (record.campaign_id, record.seed_id, record.position, record.cost, record.wall_time, record.status),
            )
            seq = self._append_event_locked(
                record.campaign_id,
                "seed_processed",
                event_at,
                {
                    "seed_id": record.seed_id,
                    "position": record.position,
                    "cost": record.cost,
                    "wall_time": record.wall_time,
                    "status": record.status,
                },
            )
        self._notify_events()
        return seq

    def campaign_totals(self, campaign_id: str) -> dict[str, Any]:
        """Totals recomputed from the ledger; never cached state."""
        with self._lock:
            row = self._conn.execute(
                "SELECT COUNT(*) AS n, COALESCE(SUM(cost), 0.0) AS cost, "
                "COALESCE(SUM(wall_time), 0.0) AS wall_time "
                "FROM processed_seeds WHERE campaign_id = ?",
                (campaign_id,),
            ).fetchone()
            triage = self._conn.execute(
                "SELECT triage FROM reports WHERE campaign_id = ? AND triage IS NOT NULL",
                (campaign_id,),
            ).fetchall()
        verdicts = [json.loads(t["triage"])["verdict"] for t in triage]
        return {
            "seeds_processed": row["n"],
            "cost": row["cost"],
            "wall_time": row["wall_time"],
            "true_positives": sum(1 for v in verdicts if v == "tp"),
            "false_positives": sum(1 for v in verdicts if v == "fp"),
            "duplicates": sum(1 for v in verdicts if v == "duplicate"),
        }

    def purge_unfinished_seed(self, campaign_id: str, seed_id: str) -> None:
        """Drop write-through artifacts of a seed that never checkpointed."""
        with self.transaction():
            self._conn.execute("DELETE FROM runs WHERE campaign_id = ? AND seed_id = ?", (campaign_id, seed_id))
            self._conn.execute("DELETE FROM scenarios WHERE campaign_id = ? AND seed_id = ?", (campaign_id, seed_id))
            self._conn.execute("DELETE FROM reports WHERE campaign_id = ? AND seed_id = ?", (campaign_id, seed_id))
            self._conn.execute(
                "DELETE FROM coverage_entries WHERE campaign_id = ? AND origin_seed_id = ?",
                (campaign_id, seed_id),
            )

    def unfinished_seed_ids(self, campaign_id: str) -> list[str]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT DISTINCT seed_id FROM runs WHERE campaign_id = ? AND seed_id NOT IN "
                "(SELECT seed_id FROM processed_seeds WHERE campaign_id = ?)",
                (campaign_id, campaign_id),
            ).fetchall()
        return [r["seed_id"] for r in rows]

    # -- pipeline artifacts -------------------------------------------

    def upsert_run(self, campaign_id: str, run: AgentRun) -> None:
        doc = json.dumps(serialize.run_to_doc(run))
        with self._lock:
            self._conn.execute(
                "INSERT INTO runs (id, campaign_id, seed_id, stage, doc) VALUES (?, ?, ?, ?, ?) "
                "ON CONFLICT(campaign_id, id) DO UPDATE SET doc = excluded.doc",
                (run.id, campaign_id, run.seed_id, run.stage.value, doc),
            )

    def get_run(self, campaign_id: str, run_id: str) -> AgentRun | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT doc FROM runs WHERE campaign_id = ? AND id = ?", (campaign_id, run_id)
            ).fetchone()
        return serialize.run_from_doc(json.loads(row["doc"])) if row else None

    def runs(self, campaign_id: str, seed_id: str | None = None) -> list[AgentRun]:
        query = "SELECT doc FROM runs WHERE campaign_id = ?"
        args: list[Any] = [campaign_id]
        if seed_id is not None:
            query += " AND seed_id = ?"
            args.append(seed_id)
        with self._lock:
            rows = self._conn.execute(query + " ORDER BY id", args).fetchall()
        return [serialize.run_from_doc(json.loads(r["doc"])) for r in rows]

    def upsert_scenario(self, campaign_id: str, scenario: Scenario) -> None:
        doc = json.dumps(serialize.scenario_to_doc(scenario))
        with self._lock:
            self._conn.execute(
                "INSERT INTO scenarios (id, campaign_id, seed_id, state, doc) VALUES (?, ?, ?, ?, ?) "
                "ON CONFLICT(campaign_id, id) DO UPDATE SET state = excluded.state, doc = excluded.doc",
                (scenario.id, campaign_id, scenario.seed_id, scenario.state.value, doc),
            )

    def get_scenario(self, campaign_id: str, scenario_id: str) -> Scenario | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT doc FROM scenarios WHERE campaign_id = ? AND id = ?", (campaign_id, scenario_id)
            ).fetchone()
        return serialize.scenario_from_doc(json.loads(row["doc"])) if row else None

    def scenarios(self, campaign_id: str, state: ScenarioState | None = None) -> list[Scenario]:
        query = "SELECT doc FROM scenarios WHERE campaign_id = ?"
        args: list[Any] = [campaign_id]
        if state is not None:
            query += " AND state = ?"
            args.append(state.value)
        with self._lock:
            rows = self._conn.execute(query + " ORDER BY id", args).fetchall()
        return [serialize.scenario_from_doc(json.loads(r["doc"])) for r in rows]

    def scenario_state_counts(self, campaign_id: str) -> dict[str, int]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT state, COUNT(*) AS n FROM scenarios WHERE campaign_id = ? GROUP BY state",
                (campaign_id,),
            ).fetchall()
        return {r["state"]: r["n"] for r in rows}

    def insert_coverage_entry(self, campaign_id: str, entry: CoverageEntry) -> None:
        doc = json.dumps(serialize.coverage_entry_to_doc(entry))
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO coverage_entries (entry_id, campaign_id, origin_seed_id, doc) "
                "VALUES (?, ?, ?, ?)",
                (entry.entry_id, campaign_id, entry.origin_seed_id, doc),
            )

    def coverage_entries(self, campaign_id: str) -> list[CoverageEntry]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT doc FROM coverage_entries WHERE campaign_id = ? ORDER BY entry_id",
                (campaign_id,),
            ).fetchall()
        return [serialize.coverage_entry_from_doc(json.loads(r["doc"])) for r in rows]

    def upsert_report(self, campaign_id: str, report: VulnerabilityReport) -> None:
        doc = json.dumps(serialize.report_to_doc(report))
        with self._lock:
            self._conn.execute(
                "INSERT INTO reports (id, campaign_id, seed_id, doc) VALUES (?, ?, ?, ?) "
                "ON CONFLICT(campaign_id, id) DO UPDATE SET doc = excluded.doc",
                (report.id, campaign_id, report.seed_id, doc),
            )

    def get_report(
        self, campaign_id: str, report_id: str
    ) -> tuple[VulnerabilityReport, dict[str, Any] | None, list] | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT doc, triage, triage_history FROM reports WHERE campaign_id = ? AND id = ?",
                (campaign_id, report_id),
            ).fetchone()
        if row is None:
            return None
        report = serialize.report_from_doc(json.loads(row["doc"]))
        triage = json.loads(row["triage"]) if row["triage"] else None
        return report, triage, json.loads(row["triage_history"])

    def reports(self, campaign_id: str) -> list[tuple[VulnerabilityReport, dict[str, Any] | None]]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT doc, triage FROM reports WHERE campaign_id = ? ORDER BY id", (campaign_id,)
            ).fetchall()
        return [
            (serialize.report_from_doc(json.loads(r["doc"])), json.loads(r["triage"]) if r["triage"] else None)
            for r in rows
        ]

    # -- triage (idempotent by client token) ---------------------------

    def apply_triage(
        self, campaign_id: str, report_id: str, verdict: str, note: str, token: str, at: str
    ) -> dict[str, Any]:
        """Record a triage verdict once per client token.

        Replays with a known token return the original result without
        touching history.
        """
        with self.transaction():
            prior = self._conn.execute("SELECT doc FROM idempotency WHERE token = ?", (token,)).fetchone()
            if prior is not None:
                return json.loads(prior["doc"])
            row = self._conn.execute(
                "SELECT triage, triage_history FROM reports WHERE campaign_id = ? AND id = ?",
                (campaign_id, report_id),
            ).fetchone()
            if row is None:
                raise KeyError(report_id)
            action = {"verdict": verdict, "note": note, "token": token, "at": at}
            history = json.loads(row["triage_history"])
            history.append(action)
            self._conn.execute(
                "UPDATE reports SET triage = ?, triage_history = ? WHERE campaign_id = ? AND id = ?",
                (json.dumps(action), json.dumps(history), campaign_id, report_id),
            )
            result = {"report_id": report_id, "triage": action, "applied": True}
            self._conn.execute(
                "INSERT INTO idempotency (token, doc) VALUES (?, ?)",
                (token, json.dumps({**result, "applied": False})),
            )
            self._append_event_locked(
                campaign_id, "triage", at, {"report_id": report_id, "triage": action}
            )
        self._notify_events()
        return result

    # -- event log ------------------------------------------------------

    def _append_event_locked(self, campaign_id: str, kind: str, at: str, payload: dict[str, Any]) -> int:
        cursor = self._conn.execute(
            "INSERT INTO events (campaign_id, kind, at, doc) VALUES (?, ?, ?, ?)",
            (campaign_id, kind, at, json.dumps(payload)),
        )
        return int(cursor.lastrowid)

    def append_event(self, campaign_id: str, kind: str, at: str, payload: dict[str, Any]) -> int:
        with self._lock:
            seq = self._append_event_locked(campaign_id, kind, at, payload)
        self._notify_events()
        return seq

    def events_after(self, campaign_id: str, after_seq: int, limit: int = 500) -> list[EventRecord]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT seq, campaign_id, kind, at, doc FROM events "
                "WHERE campaign_id = ? AND seq > ? ORDER BY seq LIMIT ?",
                (campaign_id, after_seq, limit),
            ).fetchall()
        return [
            EventRecord(
                seq=r["seq"],
                campaign_id=r["campaign_id"],
                kind=r["kind"],
                at=r["at"],
                payload=json.loads(r["doc"]),
            )
            for r in rows
        ]

    def last_event_seq(self, campaign_id: str | None = None) -> int:
        query = "SELECT COALESCE(MAX(seq), 0) AS seq FROM events"
        args: tuple = ()
        if campaign_id is not None:
            query += " WHERE campaign_id = ?"
            args = (campaign_id,)
        with self._lock:
            row = self._conn.execute(query, args).fetchone()
        return int(row["seq"])

    def wait_for_events(self, campaign_id: str, after_seq: int, timeout: float) -> bool:
        """Block until an event newer than after_seq exists (or timeout)."""
        with self._event_signal:
            if self.last_event_seq(campaign_id) > after_seq:
                return True
            self._event_signal.wait(timeout)
        return self.last_event_seq(campaign_id) > after_seq

    # -- selection trace -------------------------------------------------

    def append_selection(self, campaign_id: str, step: int, chosen: str, marginal_gain: float | None, ties_broken: int) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO selection_trace (campaign_id, step, chosen, marginal_gain, ties_broken) "
                "VALUES (?, ?, ?, ?, ?)",
                (campaign_id, step, chosen, marginal_gain, ties_broken),
            )

    def selection_trace(self, campaign_id: str) -> list[dict[str, Any]]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT step, chosen, marginal_gain, ties_broken FROM selection_trace "
                "WHERE campaign_id = ? ORDER BY step",
                (campaign_id,),
            ).fetchall()
        return [dict(r) for r in rows]


class _Transaction:
    """BEGIN IMMEDIATE under the store lock; commit or roll back on exit."""

    def __init__(self, store: SqliteStore):
        self._store = store

    def __enter__(self) -> "_Transaction":
        self._store._lock.acquire()
        self._store._conn.execute("BEGIN IMMEDIATE")
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        try:
            if exc_type is None:
                self._store._conn.execute("COMMIT")
            else:
                self._store._conn.execute("ROLLBACK")
        finally:
            self._store._lock.release()


class CampaignCoverageStore:
    """Coverage-store facade over one campaign's entries."""

    def __init__(self, store: SqliteStore, campaign_id: str):
        self._store = store
        self._campaign_id = campaign_id

    def insert(self, entry: CoverageEntry) -> None:
        self._store.insert_coverage_entry(self._campaign_id, entry)

    def entries(self) -> list[CoverageEntry]:
        return self._store.coverage_entries(self._campaign_id)

    def for_files(self, files: Iterable[str]) -> list[CoverageEntry]:
        wanted = set(files)
        return [e for e in self.entries() if any(loc.file in wanted for loc in e.locations)]
