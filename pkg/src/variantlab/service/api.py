"""HTTP surface: campaign lifecycle, artifact queries, triage, live events.

The CLI and the dashboard both consume exactly these endpoints; neither
has another path into the store. All mutation endpoints are idempotent
by client token where repeat delivery is possible (triage), and the
event stream replays from any cursor with no gaps or duplicates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator

from fastapi import FastAPI, HTTPException, Query, Request, Response
from fastapi.responses import StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from variantlab.clock import Clock, SystemClock, isoformat
from variantlab.corpus.ingest import ingest_tracker_export
from variantlab.corpus.models import Seed, SeedStatus
from variantlab.errors import ConfigurationError
from variantlab.pipeline.models import BudgetClock, ScenarioState
from variantlab.service import serialize
from variantlab.service.campaign import (
    CampaignConfig,
    CampaignStateError,
    CampaignSupervisor,
    campaign_view,
    create_campaign,
)
from variantlab.service.metrics import compute_metrics
from variantlab.service.storage import SqliteStore

TRIAGE_VERDICTS = ("tp", "fp", "duplicate")

# Follow-mode stream housekeeping: how long one poll blocks, and the
# comment ping that keeps intermediaries from closing an idle stream.
STREAM_POLL_SECONDS = 1.0
STREAM_KEEPALIVE = ": keepalive\n\n"


@dataclass
class ServiceContext:
    """Everything the endpoints need, injected by the composition root."""

    store: SqliteStore
    supervisor: CampaignSupervisor
    preanalyze: Callable[[Seed], dict[str, Any]] | None = None
    poke: Callable[[str, str], dict[str, Any]] | None = None
    token: str | None = None
    clock: Clock = field(default_factory=SystemClock)
    budget: BudgetClock = field(default_factory=BudgetClock)


class IngestBody(BaseModel):
    export: str


class PreanalyzeBody(BaseModel):
    seed_id: str | None = None
    all: bool = False


class CampaignBody(BaseModel):
    target: str
    pipeline_shape: str = "four"
    scheduling: str = "dpp-map"
    run_seed: int | None = None
    budget: dict[str, Any] = Field(default_factory=dict)
    parallelism: int = 4
    scenario_cap: int = 8


class TriageBody(BaseModel):
    verdict: str
    note: str = ""
    token: str


class PokeBody(BaseModel):
    poc: str
    build: str = "release"


def _run_summary(run) -> dict[str, Any]:
    return {
        "id": run.id,
        "seed_id": run.seed_id,
        "stage": run.stage.value,
        "outcome": run.outcome.value,
        "cost": run.cost,
        "input_tokens": run.input_tokens,
        "output_tokens": run.output_tokens,
        "wall_time": run.wall_time,
        "retries": run.retries,
        "started_at": run.started_at,
        "last_event": run.transcript[-1] if run.transcript else None,
    }


def _report_view(report, triage) -> dict[str, Any]:
    return {**serialize.report_to_doc(report), "triage": triage}


def _sse_frame(record) -> str:
    payload = json.dumps({"kind": record.kind, "at": record.at, **record.payload})
    return f"id: {record.seq}\nevent: {record.kind}\ndata: {payload}\n\n"


def create_app(ctx: ServiceContext, dashboard_dist: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="variantlab", docs_url=None, redoc_url=None)
    store = ctx.store

    @app.middleware("http")
    async def check_auth(request: Request, call_next):
        if ctx.token and request.url.path.startswith(("/campaigns", "/corpus", "/reports", "/runs", "/exec")):
            supplied = request.headers.get("authorization", "")
            if supplied != f"Bearer {ctx.token}":
                return Response(
                    content=json.dumps({"detail": "missing or bad token"}),
                    status_code=401,
                    media_type="application/json",
                )
        return await call_next(request)

    def get_campaign_doc(campaign_id: str) -> dict[str, Any]:
        doc = store.get_campaign(campaign_id)
        if doc is None:
            raise HTTPException(status_code=404, detail=f"no campaign {campaign_id}")
        return doc

    @app.get("/health")
    def health() -> dict[str, Any]:
        return {"ok": True}

    # -- corpus ------------------------------------------------------

    @app.post("/corpus/ingest")
    def corpus_ingest(body: IngestBody) -> dict[str, Any]:
        result = ingest_tracker_export(body.export, store)
        return {
            "inserted": result.inserted,
            "updated": result.updated,
            "seeds": [s.id for s in result.seeds],
            "rejections": [
                {"line_number": r.line_number, "reason": r.reason} for r in result.rejections
            ],
        }

    @app.get("/corpus/seeds")
    def corpus_seeds(status: str | None = None) -> list[dict[str, Any]]:
        parsed = None
        if status:
            try:
                parsed = SeedStatus(status)
            except ValueError:
                raise HTTPException(status_code=422, detail=f"unknown seed status {status!r}")
        return [serialize.seed_to_doc(s) for s in store.seeds(parsed)]

    @app.post("/corpus/preanalyze")
    def corpus_preanalyze(body: PreanalyzeBody) -> dict[str, Any]:
        if ctx.preanalyze is None:
            raise HTTPException(status_code=503, detail="no pre-analysis backend configured")
        if body.all:
            targets = store.seeds(SeedStatus.VALID)
        elif body.seed_id:
            seed = store.get_seed(body.seed_id)
            if seed is None:
                raise HTTPException(status_code=404, detail=f"no seed {body.seed_id}")
            targets = [seed]
        else:
            raise HTTPException(status_code=422, detail="pass seed_id or all=true")
        return {"preanalyzed": [ctx.preanalyze(seed) for seed in targets]}

    # -- campaign lifecycle -------------------------------------------

    @app.post("/campaigns", status_code=201)
    def campaigns_create(body: CampaignBody) -> dict[str, Any]:
        try:
            config = CampaignConfig.from_dict(body.model_dump())
        except ConfigurationError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        doc = create_campaign(store, config, clock=ctx.clock)
        return campaign_view(store, doc)

    @app.get("/campaigns")
    def campaigns_list() -> list[dict[str, Any]]:
        return [campaign_view(store, doc) for doc in store.campaigns()]

    @app.get("/campaigns/{campaign_id}")
    def campaigns_get(campaign_id: str) -> dict[str, Any]:
        return campaign_view(store, get_campaign_doc(campaign_id))

    def _lifecycle(campaign_id: str, action: str) -> dict[str, Any]:
        get_campaign_doc(campaign_id)
        try:
            if action == "pause":
                state = ctx.supervisor.pause(campaign_id)
            else:
                state = ctx.supervisor.start(campaign_id)
        except CampaignStateError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ConfigurationError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"id": campaign_id, "state": state}

    @app.post("/campaigns/{campaign_id}/start")
    def campaigns_start(campaign_id: str) -> dict[str, Any]:
        return _lifecycle(campaign_id, "start")

    @app.post("/campaigns/{campaign_id}/pause")
    def campaigns_pause(campaign_id: str) -> dict[str, Any]:
        return _lifecycle(campaign_id, "pause")

    @app.post("/campaigns/{campaign_id}/resume")
    def campaigns_resume(campaign_id: str) -> dict[str, Any]:
        return _lifecycle(campaign_id, "resume")

    # -- campaign queries ----------------------------------------------

    @app.get("/campaigns/{campaign_id}/seeds")
    def campaigns_seeds(campaign_id: str) -> dict[str, Any]:
        get_campaign_doc(campaign_id)
        processed = store.processed_seeds(campaign_id)
        done = {p.seed_id for p in processed}
        return {
            "processed": [
                {
                    "seed_id": p.seed_id,
                    "position": p.position,
                    "cost": p.cost,
                    "wall_time": p.wall_time,
                    "status": p.status,
                }
                for p in processed
            ],
            "pending": [sid for sid in store.campaign_seed_ids() if sid not in done],
        }

    @app.get("/campaigns/{campaign_id}/runs")
    def campaigns_runs(campaign_id: str, seed_id: str | None = None) -> list[dict[str, Any]]:
        get_campaign_doc(campaign_id)
        return [_run_summary(r) for r in store.runs(campaign_id, seed_id)]

    @app.get("/campaigns/{campaign_id}/runs/{run_id:path}")
    def run_detail(campaign_id: str, run_id: str) -> dict[str, Any]:
        get_campaign_doc(campaign_id)
        run = store.get_run(campaign_id, run_id)
        if run is None:
            raise HTTPException(status_code=404, detail=f"no run {run_id}")
        return serialize.run_to_doc(run)

    @app.get("/campaigns/{campaign_id}/scenarios")
    def campaigns_scenarios(campaign_id: str, state: str | None = None) -> list[dict[str, Any]]:
        get_campaign_doc(campaign_id)
        parsed = None
        if state is not None:
            try:
                parsed = ScenarioState(state)
            except ValueError:
                raise HTTPException(status_code=422, detail=f"unknown scenario state {state!r}")
        return [serialize.scenario_to_doc(s) for s in store.scenarios(campaign_id, parsed)]

    @app.get("/campaigns/{campaign_id}/coverage")
    def campaigns_coverage(campaign_id: str) -> list[dict[str, Any]]:
        get_campaign_doc(campaign_id)
        return [serialize.coverage_entry_to_doc(e) for e in store.coverage_entries(campaign_id)]

    @app.get("/campaigns/{campaign_id}/reports")
    def campaigns_reports(campaign_id: str) -> list[dict[str, Any]]:
        get_campaign_doc(campaign_id)
        return [_report_view(report, triage) for report, triage in store.reports(campaign_id)]

    @app.get("/campaigns/{campaign_id}/metrics")
    def campaigns_metrics(campaign_id: str) -> dict[str, Any]:
        get_campaign_doc(campaign_id)
        return compute_metrics(store, campaign_id)

    @app.get("/campaigns/{campaign_id}/selection")
    def campaigns_selection(campaign_id: str) -> list[dict[str, Any]]:
        get_campaign_doc(campaign_id)
        return store.selection_trace(campaign_id)

    @app.get("/campaigns/{campaign_id}/board")
    def campaigns_board(campaign_id: str) -> dict[str, Any]:
        """Full snapshot plus the event cursor it corresponds to."""
        doc = get_campaign_doc(campaign_id)
        cursor = store.last_event_seq(campaign_id)
        return {
            "campaign": campaign_view(store, doc),
            "runs": [_run_summary(r) for r in store.runs(campaign_id)],
            "scenarios": [serialize.scenario_to_doc(s) for s in store.scenarios(campaign_id)],
            "reports": [_report_view(r, t) for r, t in store.reports(campaign_id)],
            "metrics": compute_metrics(store, campaign_id),
            "budget": {
                "soft_limit": ctx.budget.soft_limit,
                "hard_limit": ctx.budget.hard_limit,
                "warn_fractions": list(ctx.budget.warn_fractions),
                "post_soft_interval": ctx.budget.post_soft_interval,
            },
            "cursor": cursor,
        }

    # -- reports and triage ----------------------------------------------

    @app.get("/campaigns/{campaign_id}/reports/{report_id:path}/triage")
    def report_triage_history(campaign_id: str, report_id: str) -> dict[str, Any]:
        get_campaign_doc(campaign_id)
        found = store.get_report(campaign_id, report_id)
        if found is None:
            raise HTTPException(status_code=404, detail=f"no report {report_id}")
        _, triage, history = found
        return {"report_id": report_id, "triage": triage, "history": history}

    @app.post("/campaigns/{campaign_id}/reports/{report_id:path}/triage")
    def report_triage(campaign_id: str, report_id: str, body: TriageBody) -> dict[str, Any]:
        get_campaign_doc(campaign_id)
        if body.verdict not in TRIAGE_VERDICTS:
            raise HTTPException(
                status_code=422, detail=f"verdict must be one of {', '.join(TRIAGE_VERDICTS)}"
            )
        if not body.token:
            raise HTTPException(status_code=422, detail="client token is required")
        try:
            return store.apply_triage(
                campaign_id, report_id, body.verdict, body.note, body.token, isoformat(ctx.clock.now())
            )
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no report {report_id}")

    @app.get("/campaigns/{campaign_id}/reports/{report_id:path}")
    def report_detail(campaign_id: str, report_id: str) -> dict[str, Any]:
        get_campaign_doc(campaign_id)
        found = store.get_report(campaign_id, report_id)
        if found is None:
            raise HTTPException(status_code=404, detail=f"no report {report_id}")
        report, triage, history = found
        return {**_report_view(report, triage), "triage_history": history}

    # -- event stream -----------------------------------------------------

    @app.get("/campaigns/{campaign_id}/events")
    def campaigns_events(
        campaign_id: str,
        request: Request,
        after: int = Query(default=0, ge=0),
        follow: bool = False,
        max_seconds: float = Query(default=30.0, gt=0, le=3600.0),
    ) -> StreamingResponse:
        """Server-sent events from a cursor.

        Replay starts strictly after the cursor, taken from the
        Last-Event-ID header when present (standard SSE reconnect) and
        the `after` query parameter otherwise. Without `follow` the
        stream ends at the log's current tail; with it, the stream
        stays open for up to max_seconds.
        """
        get_campaign_doc(campaign_id)
        header_cursor = request.headers.get("last-event-id")
        cursor = after
        if header_cursor is not None:
            try:
                cursor = int(header_cursor)
            except ValueError:
                raise HTTPException(status_code=422, detail="Last-Event-ID must be an integer")

        def stream(start: int) -> Iterator[str]:
            position = start
            yield "retry: 2000\n\n"
            waited = 0.0
            while True:
                batch = store.events_after(campaign_id, position)
                for record in batch:
                    position = record.seq
                    yield _sse_frame(record)
                if batch:
                    continue
                if not follow or waited >= max_seconds:
                    return
                store.wait_for_events(campaign_id, position, STREAM_POLL_SECONDS)
                waited += STREAM_POLL_SECONDS
                yield STREAM_KEEPALIVE

        return StreamingResponse(stream(cursor), media_type="text/event-stream")

    # -- operator executor access ------------------------------------------

    @app.post("/exec/poke")
    def exec_poke(body: PokeBody) -> dict[str, Any]:
        if ctx.poke is None:
            raise HTTPException(status_code=503, detail="no executor configured")
        try:
            return ctx.poke(body.poc, body.build)
        except ConfigurationError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    if dashboard_dist is not None and Path(dashboard_dist).is_dir():
        app.mount("/", StaticFiles(directory=str(dashboard_dist), html=True), name="dashboard")

    return app
