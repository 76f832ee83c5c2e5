"""Service settings file and the wiring of live runtime dependencies.

The YAML settings file is the one place operators choose backends,
executor binaries, budgets, and prices. build_context() turns settings
plus a store into the ServiceContext the API serves from, including the
per-campaign dispatch function handed to campaign engines.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Callable, Mapping

import yaml

from variantlab.clock import Clock, SystemClock
from variantlab.corpus.embeddings import (
    EmbeddingProvider,
    HashedGaussianProvider,
    HttpEmbeddingProvider,
    embed_preanalysis,
)
from variantlab.corpus.fetch import ArtifactFetcher, FixtureFetcher, GitCommitFetcher
from variantlab.corpus.models import Seed
from variantlab.coverage.judge import EmbeddingThresholdJudge
from variantlab.coverage.tracker import CoverageTracker
from variantlab.errors import ConfigurationError
from variantlab.executor.policy import ThreatModelPolicy
from variantlab.executor.run import (
    BuildMatrix,
    ExecutionRequest,
    Runner,
    ScriptedRunner,
    SubprocessRunner,
    execute,
    result_to_doc,
)
from variantlab.fixtures import load_walkthrough
from variantlab.pipeline.backend import AgentBackend, HttpAgentBackend, PriceTable, ScriptedBackend
from variantlab.pipeline.models import BudgetClock
from variantlab.pipeline.runner import PipelineConfig, run_pipeline
from variantlab.pipeline.stages import PipelineDeps, run_preanalysis
from variantlab.pipeline.workspace import LocalSandboxDriver
from variantlab.service.api import ServiceContext
from variantlab.service.campaign import CampaignConfig, CampaignSupervisor, DispatchFn
from variantlab.service.serialize import embedding_to_doc, preanalysis_to_doc
from variantlab.service.storage import CampaignCoverageStore, SqliteStore


def load_settings(path: str | Path | None) -> dict[str, Any]:
    if path is None:
        return {}
    text = Path(path).read_text(encoding="utf-8")
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ConfigurationError("settings file must hold a mapping")
    return data


def _build_backend(settings: Mapping[str, Any]) -> AgentBackend:
    section = settings.get("backend", {"kind": "walkthrough"})
    kind = section.get("kind", "walkthrough")
    if kind == "walkthrough":
        return load_walkthrough().backend()
    if kind == "scripted":
        return ScriptedBackend.from_file(section["fixture"])
    if kind == "http":
        return HttpAgentBackend(section["url"], timeout=float(section.get("timeout", 600.0)))
    raise ConfigurationError(f"unknown backend kind {kind!r}")


def _build_embedding(settings: Mapping[str, Any]) -> EmbeddingProvider:
    section = settings.get("embedding", {"kind": "hashed"})
    kind = section.get("kind", "hashed")
    if kind == "hashed":
        return HashedGaussianProvider(int(section.get("dim", 256)))
    if kind == "http":
        return HttpEmbeddingProvider(section["url"], section.get("provider_tag", "http"))
    raise ConfigurationError(f"unknown embedding kind {kind!r}")


def _build_runner_and_matrix(settings: Mapping[str, Any]) -> tuple[Runner, BuildMatrix]:
    section = settings.get("executor", {})
    kind = section.get("kind", "walkthrough")
    if kind == "walkthrough":
        fx = load_walkthrough()
        return fx.runner(), fx.matrix()
    if kind == "subprocess":
        return SubprocessRunner(), BuildMatrix.from_dict(section.get("matrix", {}))
    raise ConfigurationError(f"unknown executor kind {kind!r}")


def _build_fetcher(settings: Mapping[str, Any]) -> ArtifactFetcher | None:
    section = settings.get("fetcher", {"kind": "walkthrough"})
    kind = section.get("kind", "walkthrough")
    if kind == "walkthrough":
        return load_walkthrough().fetcher()
    if kind == "git":
        return GitCommitFetcher(section["repo"])
    if kind == "none":
        return None
    raise ConfigurationError(f"unknown fetcher kind {kind!r}")


def _build_policy(settings: Mapping[str, Any]) -> ThreatModelPolicy:
    section = settings.get("policy")
    return ThreatModelPolicy.from_dict(section) if section else ThreatModelPolicy()


def _checkout_source(settings: Mapping[str, Any], workdir: Path) -> Path:
    """Source tree agents explore; the walkthrough default materializes one."""
    section = settings.get("pipeline", {})
    if "checkout" in section:
        return Path(section["checkout"])
    generated = workdir / "walkthrough-checkout"
    checkout = generated / "checkout"
    if not checkout.is_dir():
        return load_walkthrough().materialize_checkout(generated)
    return checkout


def build_context(
    settings: Mapping[str, Any],
    store: SqliteStore,
    *,
    workdir: str | Path | None = None,
    clock: Clock | None = None,
) -> ServiceContext:
    clock = clock or SystemClock()
    workdir = Path(workdir) if workdir is not None else Path(store.path).parent if store.path != ":memory:" else Path(".")
    backend = _build_backend(settings)
    provider = _build_embedding(settings)
    runner, matrix = _build_runner_and_matrix(settings)
    fetcher = _build_fetcher(settings)
    policy = _build_policy(settings)
    budget_section = settings.get("budget", {})
    budget = BudgetClock(
        soft_limit=float(budget_section.get("soft_limit", BudgetClock().soft_limit)),
        hard_limit=float(budget_section.get("hard_limit", BudgetClock().hard_limit)),
    )
    price_section = settings.get("prices", {})
    prices = PriceTable(
        input_per_1k=float(price_section.get("input_per_1k", PriceTable().input_per_1k)),
        output_per_1k=float(price_section.get("output_per_1k", PriceTable().output_per_1k)),
        by_model=price_section.get("by_model", {}),
    )
    checkout = _checkout_source(settings, workdir)
    pipeline_section = settings.get("pipeline", {})
    run_seed = pipeline_section.get("run_seed")

    def make_deps(campaign_id: str, campaign_run_seed: int | None) -> PipelineDeps:
        # Redundancy verdicts come from embedding similarity here; a gate
        # with no working judge holds scenarios rather than approving blind.
        gate = CoverageTracker(
            store=CampaignCoverageStore(store, campaign_id),
            judge=EmbeddingThresholdJudge(provider),
            clock=clock,
        )
        return PipelineDeps(
            backend=backend,
            budget=budget,
            clock=clock,
            gate=gate,
            policy=policy,
            runner=runner,
            matrix=matrix,
            workspaces=LocalSandboxDriver(checkout_source=checkout, root=workdir),
            fetcher=fetcher,
            corpus=store,
            prices=prices,
            run_seed=campaign_run_seed if campaign_run_seed is not None else run_seed,
        )

    def dispatch_factory(campaign_doc: dict[str, Any]) -> DispatchFn:
        campaign_id = campaign_doc["id"]
        config = CampaignConfig.from_dict(campaign_doc["config"])
        deps = make_deps(campaign_id, config.run_seed)
        pipeline_config = PipelineConfig(shape=config.pipeline_shape, scenario_cap=config.scenario_cap)

        def dispatch(seed: Seed, sink, position: int):
            return run_pipeline(seed, deps, pipeline_config, sink)

        return dispatch

    def preanalyze(seed: Seed) -> dict[str, Any]:
        deps = make_deps("corpus", None)
        pre = run_preanalysis(seed, deps)
        store.put_preanalysis(pre)
        emb = embed_preanalysis(pre, provider)
        store.put_embedding(emb)
        return {
            "seed_id": seed.id,
            "preanalysis": preanalysis_to_doc(pre),
            "embedding": {"dim": len(embedding_to_doc(emb)["vector"]), "provider_tag": emb.provider_tag},
        }

    def poke(poc: str, build: str) -> dict[str, Any]:
        request = ExecutionRequest(poc=poc, build=build)
        return result_to_doc(execute(request, policy, runner, matrix))

    supervisor = CampaignSupervisor(store, dispatch_factory, clock=clock)
    return ServiceContext(
        store=store,
        supervisor=supervisor,
        preanalyze=preanalyze,
        poke=poke,
        token=settings.get("token"),
        clock=clock,
        budget=budget,
    )
