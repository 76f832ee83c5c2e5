from __future__ import annotations

import json
import math
import subprocess

import numpy as np
import pytest

from variantlab.clock import SimClock
from variantlab.corpus import (
    DegenerateEmbeddingError,
    Embedding,
    FetchRetryableError,
    FixtureFetcher,
    GitCommitFetcher,
    HashedGaussianProvider,
    HttpEmbeddingProvider,
    MemoryCorpusStore,
    PreAnalysis,
    Seed,
    SeedStatus,
    SourceGoneError,
    embed_preanalysis,
    fetch_artifacts,
    ingest_tracker_export,
    parse_export,
)
from variantlab.corpus.fetch import ArtifactBundle
from variantlab.corpus.ingest import status_from_labels


def record(seed_id: str, **overrides) -> dict:
    base = {
        "id": seed_id,
        "url": f"https://tracker.example/{seed_id}",
        "title": f"issue {seed_id}",
        "labels": [],
        "created_at": "2025-06-01T12:00:00Z",
        "body": "a V8 bug report",
    }
    base.update(overrides)
    return base


def export_text(records: list[dict]) -> str:
    return "\n".join(json.dumps(r) for r in records)


class TestIngest:
    def test_three_records_one_malformed(self, corpus_store):
        lines = [json.dumps(record("1")), '{"id": "2", "title": ', json.dumps(record("3"))]
        result = ingest_tracker_export("\n".join(lines), corpus_store)
        assert len(result.seeds) == 2
        assert len(result.rejections) == 1
        assert result.rejections[0].line_number == 2
        assert "JSON" in result.rejections[0].reason
        assert {s.id for s in corpus_store.seeds()} == {"1", "3"}

    def test_missing_required_field_rejected(self, corpus_store):
        bad = record("9")
        del bad["title"]
        result = ingest_tracker_export(export_text([record("1"), bad]), corpus_store)
        assert len(result.seeds) == 1
        assert "title" in result.rejections[0].reason

    def test_bad_timestamp_rejected(self, corpus_store):
        result = ingest_tracker_export(export_text([record("1", created_at="yesterday")]), corpus_store)
        assert result.seeds == []
        assert "created_at" in result.rejections[0].reason

    def test_status_mapping_from_labels(self):
        cases = {
            ("Security",): SeedStatus.VALID,
            ("Duplicate",): SeedStatus.DUPLICATE,
            ("intended_behavior",): SeedStatus.INTENDED_BEHAVIOR,
            ("Infeasible", "Security"): SeedStatus.INFEASIBLE,
            ("Obsolete",): SeedStatus.OBSOLETE,
            ("Non-Reproducible",): SeedStatus.NON_REPRODUCIBLE,
        }
        for labels, expected in cases.items():
            assert status_from_labels(list(labels)) == expected, labels

    def test_excluded_statuses_not_in_campaign_set(self, corpus_store):
        records = [
            record("1"),
            record("2", labels=["Duplicate"]),
            record("3", labels=["Obsolete"]),
        ]
        ingest_tracker_export(export_text(records), corpus_store)
        for seed in corpus_store.seeds():
            if seed.id == "1":
                corpus_store.put_preanalysis(PreAnalysis(seed.id, "text", "v1", "run-0"))
        assert corpus_store.campaign_seed_ids() == ["1"]

    def test_reingest_is_idempotent(self, corpus_store):
        text = export_text([record("1"), record("2")])
        first = ingest_tracker_export(text, corpus_store)
        again = ingest_tracker_export(text, corpus_store)
        assert first.inserted == 2
        assert again.inserted == 0 and again.updated == 0
        assert len(corpus_store.seeds()) == 2

    def test_reingest_preserves_fetched_artifacts(self, corpus_store):
        text = export_text([record("1")])
        ingest_tracker_export(text, corpus_store)
        seed = corpus_store.get_seed("1")
        fetcher = FixtureFetcher({seed.source: ArtifactBundle(patches="diff --git a b")})
        fetch_artifacts(seed, fetcher, corpus_store)
        ingest_tracker_export(text, corpus_store)
        assert corpus_store.get_seed("1").artifacts.patches == "diff --git a b"

    def test_empty_export(self, corpus_store):
        result = ingest_tracker_export("", corpus_store)
        assert result.seeds == [] and result.rejections == []

    def test_commit_source_accepted(self, corpus_store):
        rec = record("c1")
        del rec["url"]
        rec["commit"] = "deadbeef"
        result = ingest_tracker_export(export_text([rec]), corpus_store)
        assert result.seeds[0].source == "deadbeef"

    def test_parse_export_returns_all_statuses(self):
        seeds, rejections = parse_export(export_text([record("1", labels=["Duplicate"])]))
        assert rejections == []
        assert seeds[0].status == SeedStatus.DUPLICATE


class TestFetch:
    def test_fixture_fetch_attaches_artifacts(self, corpus_store, sim_clock):
        seed = Seed("1", "https://t/1", "t", "2025-01-01T00:00:00Z")
        corpus_store.upsert_seed(seed)
        fetcher = FixtureFetcher({"https://t/1": ArtifactBundle(patches="a patch", poc="// poc")})
        updated = fetch_artifacts(seed, fetcher, corpus_store, clock=sim_clock)
        assert updated.artifacts.patches == "a patch"
        assert updated.artifacts.poc == "// poc"
        assert updated.artifacts.discussion is None
        assert updated.artifacts.present() == ("patches", "poc")
        assert corpus_store.get_seed("1").artifacts == updated.artifacts

    def test_gone_source_flags_obsolete(self, corpus_store):
        seed = Seed("1", "https://t/404", "t", "2025-01-01T00:00:00Z")
        corpus_store.upsert_seed(seed)
        updated = fetch_artifacts(seed, FixtureFetcher({}, gone=frozenset({"https://t/404"})), corpus_store)
        assert updated.status == SeedStatus.OBSOLETE
        assert corpus_store.get_seed("1").status == SeedStatus.OBSOLETE

    def test_transient_failure_is_retryable(self, corpus_store):
        seed = Seed("1", "https://t/1", "t", "2025-01-01T00:00:00Z")
        corpus_store.upsert_seed(seed)
        fetcher = FixtureFetcher({}, flaky=frozenset({"https://t/1"}))
        with pytest.raises(FetchRetryableError):
            fetch_artifacts(seed, fetcher, corpus_store)
        assert corpus_store.get_seed("1").status == SeedStatus.VALID

    def test_commit_source_yields_diff(self, tmp_path):
        repo = tmp_path / "repo"
        repo.mkdir()
        subprocess.run(["git", "-C", str(repo), "init", "-q"], check=True)
        subprocess.run(["git", "-C", str(repo), "config", "user.email", "t@example.com"], check=True)
        subprocess.run(["git", "-C", str(repo), "config", "user.name", "t"], check=True)
        (repo / "f.cc").write_text("int x = 1;\n")
        subprocess.run(["git", "-C", str(repo), "add", "f.cc"], check=True)
        subprocess.run(["git", "-C", str(repo), "commit", "-q", "-m", "fix overflow"], check=True)
        sha = subprocess.run(
            ["git", "-C", str(repo), "rev-parse", "HEAD"], capture_output=True, text=True, check=True
        ).stdout.strip()

        fetcher = GitCommitFetcher(repo)
        bundle = fetcher.fetch(sha)
        assert "fix overflow" in bundle.patches
        assert "f.cc" in bundle.patches
        with pytest.raises(SourceGoneError):
            fetcher.fetch("0" * 40)


class TestEmbeddings:
    def test_identical_text_identical_vector(self, provider):
        pre = PreAnalysis("1", "integer overflow in parser", "v1", "run-0")
        first = embed_preanalysis(pre, provider)
        second = embed_preanalysis(pre, provider)
        assert first.vector == second.vector
        assert first.provider_tag == provider.provider_tag

    def test_unit_norm_invariant(self, provider):
        for text in ("a", "b", "longer text about a bug", "x" * 1000):
            emb = embed_preanalysis(PreAnalysis("1", text, "v1", "r"), provider)
            norm = math.sqrt(sum(v * v for v in emb.vector))
            assert abs(norm - 1.0) <= 1e-9
            assert emb.dim == 256

    def test_normalization_example(self):
        class TwoDProvider:
            provider_tag = "fixed-2d"

            def embed(self, text):
                return [3.0, 4.0]

        emb = embed_preanalysis(PreAnalysis("1", "t", "v1", "r"), TwoDProvider())
        assert emb.vector == pytest.approx((0.6, 0.8))

    def test_zero_vector_is_degenerate(self):
        class ZeroProvider:
            provider_tag = "zero"

            def embed(self, text):
                return [0.0, 0.0, 0.0]

        with pytest.raises(DegenerateEmbeddingError):
            embed_preanalysis(PreAnalysis("1", "t", "v1", "r"), ZeroProvider())

    def test_store_rejects_non_unit_vector(self, corpus_store):
        corpus_store.upsert_seed(Seed("1", "s", "t", "2025-01-01T00:00:00Z"))
        with pytest.raises(ValueError):
            corpus_store.put_embedding(Embedding("1", (3.0, 4.0), "tag"))

    def test_store_rejects_mixed_dims_and_tags(self, corpus_store):
        corpus_store.upsert_seed(Seed("1", "s", "t", "2025-01-01T00:00:00Z"))
        corpus_store.upsert_seed(Seed("2", "s", "t", "2025-01-01T00:00:00Z"))
        corpus_store.put_embedding(Embedding("1", (1.0, 0.0), "tag"))
        with pytest.raises(ValueError):
            corpus_store.put_embedding(Embedding("2", (1.0, 0.0, 0.0), "tag"))
        with pytest.raises(ValueError):
            corpus_store.put_embedding(Embedding("2", (0.0, 1.0), "other-tag"))

    def test_http_provider_contract(self):
        import httpx

        def handler(request: httpx.Request) -> httpx.Response:
            payload = json.loads(request.content)
            assert payload == {"text": "hello"}
            return httpx.Response(200, json={"vector": [1.0, 2.0, 2.0]})

        client = httpx.Client(transport=httpx.MockTransport(handler))
        provider = HttpEmbeddingProvider("https://embed.example/v1", "remote", client=client)
        emb = embed_preanalysis(PreAnalysis("1", "hello", "v1", "r"), provider)
        assert np.allclose(emb.vector, np.array([1.0, 2.0, 2.0]) / 3.0)


class TestPreAnalysisCache:
    def test_one_preanalysis_per_seed(self, corpus_store):
        corpus_store.upsert_seed(Seed("1", "s", "t", "2025-01-01T00:00:00Z"))
        corpus_store.put_preanalysis(PreAnalysis("1", "first", "v1", "r"))
        corpus_store.put_preanalysis(PreAnalysis("1", "second", "v2", "r"))
        assert corpus_store.get_preanalysis("1").text == "second"

    def test_unknown_seed_rejected(self, corpus_store):
        with pytest.raises(KeyError):
            corpus_store.put_preanalysis(PreAnalysis("nope", "x", "v1", "r"))
