"""Campaign lifecycle: scheduling, dispatch, budget stops, crash recovery.

A campaign walks its seed corpus in the order its strategy dictates,
hands each seed to the pipeline, and checkpoints one ledger row per
finished seed. Everything the engine needs to resume after a crash is
in the store: the processed ledger rebuilds the scheduler's conditioning
set, totals are recomputed from per-seed costs, and artifacts of seeds
that never checkpointed are purged before they run again.

Budget stops:
  - seed cap: stop dispatching once the ledger holds that many rows
    (state completed).
  - cost cap: dispatch the next seed only while committed cost is below
    the cap, so the cap can be exceeded by at most the one seed in
    flight (state exhausted). Cost-capped campaigns therefore dispatch
    serially even when parallelism is configured higher.
"""

from __future__ import annotations

import random
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable

from variantlab.clock import Clock, SystemClock, isoformat
from variantlab.corpus.models import Seed
from variantlab.errors import ConfigurationError
from variantlab.pipeline.runner import PipelineSink, SeedOutcome
from variantlab.scheduler.baselines import baseline_order
from variantlab.scheduler.greedy import DppScheduler
from variantlab.service.storage import ProcessedSeed, SqliteStore

CAMPAIGN_STATES = ("created", "running", "paused", "exhausted", "completed")
SCHEDULING_STRATEGIES = ("dpp-map", "newest-first", "random")
PIPELINE_SHAPES = ("four", "three", "one")

# created -> running <-> paused; running ends at exhausted or completed.
_STATE_TRANSITIONS = {
    "created": {"running"},
    "running": {"paused", "exhausted", "completed"},
    "paused": {"running"},
    "exhausted": set(),
    "completed": set(),
}


class CampaignStateError(Exception):
    """Requested lifecycle change is not legal from the current state."""


@dataclass(frozen=True)
class CampaignConfig:
    """Validated campaign settings as supplied at creation."""

    target: str
    pipeline_shape: str = "four"
    scheduling: str = "dpp-map"
    run_seed: int | None = None
    cost_cap: float | None = None
    seed_cap: int | None = None
    parallelism: int = 4
    scenario_cap: int = 8

    def __post_init__(self) -> None:
        if not self.target:
            raise ConfigurationError("campaign config: target is required")
        if self.pipeline_shape not in PIPELINE_SHAPES:
            raise ConfigurationError(f"campaign config: unknown pipeline shape {self.pipeline_shape!r}")
        if self.scheduling not in SCHEDULING_STRATEGIES:
            raise ConfigurationError(f"campaign config: unknown scheduling strategy {self.scheduling!r}")
        if self.cost_cap is not None and self.cost_cap <= 0:
            raise ConfigurationError("campaign config: cost cap must be positive")
        if self.seed_cap is not None and self.seed_cap <= 0:
            raise ConfigurationError("campaign config: seed cap must be positive")
        if self.parallelism < 1:
            raise ConfigurationError("campaign config: parallelism must be at least 1")

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "CampaignConfig":
        budget = data.get("budget", {})
        return CampaignConfig(
            target=str(data.get("target", "")),
            pipeline_shape=data.get("pipeline_shape", "four"),
            scheduling=data.get("scheduling", "dpp-map"),
            run_seed=data.get("run_seed"),
            cost_cap=budget.get("cost_cap", data.get("cost_cap")),
            seed_cap=budget.get("seed_cap", data.get("seed_cap")),
            parallelism=int(data.get("parallelism", 4)),
            scenario_cap=int(data.get("scenario_cap", 8)),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "target": self.target,
            "pipeline_shape": self.pipeline_shape,
            "scheduling": self.scheduling,
            "run_seed": self.run_seed,
            "budget": {"cost_cap": self.cost_cap, "seed_cap": self.seed_cap},
            "parallelism": self.parallelism,
            "scenario_cap": self.scenario_cap,
        }


def create_campaign(store: SqliteStore, config: CampaignConfig, clock: Clock | None = None) -> dict[str, Any]:
    """Persist a new campaign in state created; returns its document.

    A random strategy without an explicit run seed gets one generated
    here and recorded, so the schedule stays reproducible.
    """
    clock = clock or SystemClock()
    config_doc = config.to_dict()
    if config.scheduling == "random" and config.run_seed is None:
        config_doc["run_seed"] = random.SystemRandom().randrange(2**31)
    campaign_id = f"cmp-{uuid.uuid4().hex[:12]}"
    doc = {
        "id": campaign_id,
        "state": "created",
        "config": config_doc,
        "created_at": isoformat(clock.now()),
    }
    store.put_campaign(doc)
    store.append_event(campaign_id, "campaign_state", doc["created_at"], {"state": "created", "campaign": doc})
    return doc


def campaign_view(store: SqliteStore, doc: dict[str, Any]) -> dict[str, Any]:
    """Campaign document plus totals recomputed from the ledger."""
    return {**doc, "totals": store.campaign_totals(doc["id"])}


# Dispatch callback: (seed, sink, position) -> SeedOutcome. The service
# wires this to run_pipeline; tests substitute scripted outcomes.
DispatchFn = Callable[[Seed, PipelineSink, int], SeedOutcome]


class _StoreSink:
    """Write-through pipeline sink bound to one campaign.

    Every record lands in the store immediately and emits a fat event,
    so a live board follows stage-by-stage without polling.
    """

    def __init__(self, store: SqliteStore, campaign_id: str, clock: Clock):
        self._store = store
        self._campaign_id = campaign_id
        self._clock = clock

    def _now(self) -> str:
        return isoformat(self._clock.now())

    def record_run(self, run) -> None:
        self._store.upsert_run(self._campaign_id, run)
        # Fat event: everything a run summary row shows, so a live board
        # can build rows from the stream alone and still match a snapshot.
        doc = {
            "run_id": run.id,
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
        self._store.append_event(self._campaign_id, "run_update", self._now(), doc)

    def record_scenario(self, scenario) -> None:
        self._store.upsert_scenario(self._campaign_id, scenario)
        from variantlab.service.serialize import scenario_to_doc

        self._store.append_event(self._campaign_id, "scenario_update", self._now(), scenario_to_doc(scenario))

    def record_report(self, report) -> None:
        self._store.upsert_report(self._campaign_id, report)
        from variantlab.service.serialize import report_to_doc

        self._store.append_event(self._campaign_id, "report_update", self._now(), report_to_doc(report))


class CampaignEngine:
    """Drives one campaign; owns its scheduler state and pause flag.

    step() processes exactly one scheduling decision synchronously;
    run_until_blocked() loops until pause or a terminal state. The
    supervisor runs the latter on a thread for live service use, while
    tests call the methods directly.
    """

    def __init__(
        self,
        store: SqliteStore,
        campaign_id: str,
        dispatch: DispatchFn,
        clock: Clock | None = None,
    ):
        doc = store.get_campaign(campaign_id)
        if doc is None:
            raise KeyError(campaign_id)
        self.store = store
        self.campaign_id = campaign_id
        self.config = CampaignConfig.from_dict(doc["config"])
        self._dispatch = dispatch
        self._clock = clock or SystemClock()
        self._pause_requested = threading.Event()
        self._lock = threading.Lock()
        self._recover()
        self._dpp: DppScheduler | None = None
        self._baseline: list[str] | None = None
        self._baseline_step = 0

    # -- state machine --------------------------------------------------

    @property
    def state(self) -> str:
        doc = self.store.get_campaign(self.campaign_id)
        return doc["state"] if doc else "unknown"

    def _set_state(self, new_state: str) -> None:
        doc = self.store.get_campaign(self.campaign_id)
        current = doc["state"]
        if new_state == current:
            return
        if new_state not in _STATE_TRANSITIONS[current]:
            raise CampaignStateError(f"cannot move campaign from {current} to {new_state}")
        doc["state"] = new_state
        self.store.put_campaign(doc)
        self.store.append_event(
            self.campaign_id, "campaign_state", isoformat(self._clock.now()), {"state": new_state}
        )

    def start(self) -> None:
        self._pause_requested.clear()
        self._set_state("running")

    def request_pause(self) -> None:
        if self.state not in ("running", "paused"):
            raise CampaignStateError(f"cannot pause a campaign in state {self.state}")
        self._pause_requested.set()

    def mark_paused(self) -> None:
        if self.state == "running":
            self._set_state("paused")

    # -- crash recovery ---------------------------------------------------

    def _recover(self) -> None:
        """Purge artifacts of seeds that never checkpointed; fix the state."""
        for seed_id in self.store.unfinished_seed_ids(self.campaign_id):
            self.store.purge_unfinished_seed(self.campaign_id, seed_id)
        doc = self.store.get_campaign(self.campaign_id)
        if doc and doc["state"] == "running":
            # The previous process died while running; hold for resume.
            doc["state"] = "paused"
            self.store.put_campaign(doc)
            self.store.append_event(
                self.campaign_id,
                "campaign_state",
                isoformat(self._clock.now()),
                {"state": "paused", "note": "recovered after restart"},
            )

    # -- scheduling ---------------------------------------------------------

    def _processed_ids(self) -> list[str]:
        return [p.seed_id for p in self.store.processed_seeds(self.campaign_id)]

    def _ensure_schedule(self) -> None:
        if self._dpp is not None or self._baseline is not None:
            return
        processed = self._processed_ids()
        if self.config.scheduling == "dpp-map":
            embeddings = {
                sid: emb.vector for sid, emb in self.store.embeddings(self.store.campaign_seed_ids()).items()
            }
            missing = [sid for sid in self.store.campaign_seed_ids() if sid not in embeddings]
            if missing:
                raise ConfigurationError(
                    f"dpp-map scheduling needs embeddings for every seed; missing: {', '.join(sorted(missing))}"
                )
            self._dpp = DppScheduler(embeddings, processed=processed)
        else:
            seeds = self.store.seeds()
            valid = [s for s in seeds if s.id in set(self.store.campaign_seed_ids())]
            order = baseline_order(
                self.config.scheduling, valid, run_seed=self.config.run_seed
            )
            done = set(processed)
            self._baseline = [sid for sid in order if sid not in done]
            self._baseline_step = len(processed)

    def _next_seed_id(self) -> str | None:
        """Pop the next scheduled seed, recording the pick in the trace.

        Baseline strategies have no gain to report; their rows carry a
        null gain so the chosen order is still auditable per step.
        """
        self._ensure_schedule()
        if self._dpp is not None:
            if self._dpp.remaining() == 0:
                return None
            seed_id, trace = self._dpp.next_seed()
            self.store.append_selection(
                self.campaign_id, trace.step, trace.chosen, trace.marginal_gain, trace.ties_broken
            )
            return seed_id
        assert self._baseline is not None
        if not self._baseline:
            return None
        seed_id = self._baseline.pop(0)
        self.store.append_selection(self.campaign_id, self._baseline_step, seed_id, None, 0)
        self._baseline_step += 1
        return seed_id

    # -- budget -----------------------------------------------------------

    def _committed(self) -> tuple[int, float]:
        totals = self.store.campaign_totals(self.campaign_id)
        return totals["seeds_processed"], totals["cost"]

    def _budget_verdict(self) -> str | None:
        """Terminal state demanded by the ledger, if any."""
        count, cost = self._committed()
        if self.config.seed_cap is not None and count >= self.config.seed_cap:
            return "completed"
        if self.config.cost_cap is not None and cost >= self.config.cost_cap:
            return "exhausted"
        return None

    # -- dispatch ----------------------------------------------------------

    def _process_one(self, seed_id: str, position: int) -> None:
        seed = self.store.get_seed(seed_id)
        if seed is None:
            raise ConfigurationError(f"scheduled seed {seed_id} is not in the store")
        self.store.append_event(
            self.campaign_id,
            "seed_dispatched",
            isoformat(self._clock.now()),
            {"seed_id": seed_id, "position": position},
        )
        sink = _StoreSink(self.store, self.campaign_id, self._clock)
        try:
            outcome = self._dispatch(seed, sink, position)
            cost, wall_time, status = outcome.cost, outcome.agent_seconds, outcome.status
        except Exception as exc:  # one bad seed must not stop the campaign
            self.store.purge_unfinished_seed(self.campaign_id, seed_id)
            self.store.append_event(
                self.campaign_id,
                "seed_error",
                isoformat(self._clock.now()),
                {"seed_id": seed_id, "error": str(exc)},
            )
            cost, wall_time, status = 0.0, 0.0, "error"
        self.store.finish_seed(
            ProcessedSeed(
                campaign_id=self.campaign_id,
                seed_id=seed_id,
                position=position,
                cost=cost,
                wall_time=wall_time,
                status=status,
            ),
            isoformat(self._clock.now()),
        )

    def step(self) -> str:
        """Process one scheduling decision; returns the campaign state.

        Parallel fan-out happens here too: with parallelism n and no
        cost cap, up to n seeds are dispatched together and the step
        ends once all of them have checkpointed.
        """
        with self._lock:
            if self.state != "running":
                return self.state
            verdict = self._budget_verdict()
            if verdict:
                self._set_state(verdict)
                return verdict
            if self._pause_requested.is_set():
                self.mark_paused()
                return "paused"

            try:
                self._ensure_schedule()
            except ConfigurationError as exc:
                # Bad wiring (e.g. missing embeddings) pauses the campaign
                # instead of killing its worker thread silently.
                self.store.append_event(
                    self.campaign_id,
                    "campaign_error",
                    isoformat(self._clock.now()),
                    {"error": str(exc)},
                )
                self.mark_paused()
                return "paused"

            width = 1 if self.config.cost_cap is not None else self.config.parallelism
            batch: list[str] = []
            position = len(self._processed_ids())
            while len(batch) < width:
                seed_id = self._next_seed_id()
                if seed_id is None:
                    break
                batch.append(seed_id)
            if not batch:
                self._set_state("completed")
                return "completed"
            if self.config.seed_cap is not None:
                room = self.config.seed_cap - position
                surplus = batch[room:]
                batch = batch[:room]
                if self._dpp is None and self._baseline is not None and surplus:
                    self._baseline = surplus + self._baseline

            if len(batch) == 1:
                self._process_one(batch[0], position)
            else:
                with ThreadPoolExecutor(max_workers=len(batch)) as pool:
                    futures = [
                        pool.submit(self._process_one, sid, position + i) for i, sid in enumerate(batch)
                    ]
                    for future in futures:
                        future.result()

            verdict = self._budget_verdict()
            if verdict:
                self._set_state(verdict)
                return verdict
            return self.state

    def run_until_blocked(self) -> str:
        """Loop step() until the campaign pauses or reaches a terminal state."""
        while True:
            state = self.step()
            if state != "running":
                return state


class CampaignSupervisor:
    """Holds engines and their worker threads for the live service."""

    def __init__(self, store: SqliteStore, dispatch_factory: Callable[[dict[str, Any]], DispatchFn], clock: Clock | None = None):
        self._store = store
        self._dispatch_factory = dispatch_factory
        self._clock = clock or SystemClock()
        self._engines: dict[str, CampaignEngine] = {}
        self._threads: dict[str, threading.Thread] = {}
        self._lock = threading.Lock()

    def engine(self, campaign_id: str) -> CampaignEngine:
        with self._lock:
            if campaign_id not in self._engines:
                doc = self._store.get_campaign(campaign_id)
                if doc is None:
                    raise KeyError(campaign_id)
                self._engines[campaign_id] = CampaignEngine(
                    self._store, campaign_id, self._dispatch_factory(doc), clock=self._clock
                )
            return self._engines[campaign_id]

    def start(self, campaign_id: str) -> str:
        engine = self.engine(campaign_id)
        engine.start()
        with self._lock:
            thread = self._threads.get(campaign_id)
            if thread is None or not thread.is_alive():
                thread = threading.Thread(target=engine.run_until_blocked, daemon=True, name=f"campaign-{campaign_id}")
                self._threads[campaign_id] = thread
                thread.start()
        return "running"

    def pause(self, campaign_id: str) -> str:
        engine = self.engine(campaign_id)
        engine.request_pause()
        thread = self._threads.get(campaign_id)
        if thread is not None:
            thread.join(timeout=60.0)
        engine.mark_paused()
        return engine.state

    def resume(self, campaign_id: str) -> str:
        return self.start(campaign_id)

    def join(self, campaign_id: str, timeout: float | None = None) -> str:
        thread = self._threads.get(campaign_id)
        if thread is not None:
            thread.join(timeout)
        return self.engine(campaign_id).state
