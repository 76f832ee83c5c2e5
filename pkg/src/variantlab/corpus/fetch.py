"""Artifact fetching for seeds.

A fetcher resolves a seed source (tracker URL or commit hash) to the
artifact bundle: discussion, patches, review notes, PoC. Missing parts are
recorded as absent. Transient failures raise FetchRetryableError; a source
that is permanently gone flags the seed obsolete instead of erroring.
"""

from __future__ import annotations

import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol

from variantlab.clock import Clock, SystemClock, isoformat
from variantlab.corpus.models import Seed, SeedArtifacts, SeedStatus
from variantlab.corpus.store import CorpusStore


class FetchRetryableError(Exception):
    """Transient fetch failure; the caller may retry later."""


class SourceGoneError(Exception):
    """The source is permanently gone (tracker 404/410, unknown commit)."""


@dataclass(frozen=True)
class ArtifactBundle:
    discussion: str | None = None
    patches: str | None = None
    review: str | None = None
    poc: str | None = None


class ArtifactFetcher(Protocol):
    def fetch(self, source: str) -> ArtifactBundle: ...


class FixtureFetcher:
    """Resolves sources from an in-memory mapping; used by tests and demos."""

    def __init__(
        self,
        bundles: Mapping[str, ArtifactBundle],
        gone: frozenset[str] = frozenset(),
        flaky: frozenset[str] = frozenset(),
    ):
        self._bundles = dict(bundles)
        self._gone = set(gone)
        self._flaky = set(flaky)

    def fetch(self, source: str) -> ArtifactBundle:
        if source in self._gone:
            raise SourceGoneError(source)
        if source in self._flaky:
            raise FetchRetryableError(source)
        if source not in self._bundles:
            raise SourceGoneError(source)
        return self._bundles[source]


class GitCommitFetcher:
    """Resolves commit-hash sources against a local repository clone."""

    def __init__(self, repo_path: str | Path):
        self.repo_path = Path(repo_path)

    def fetch(self, source: str) -> ArtifactBundle:
        proc = subprocess.run(
            ["git", "-C", str(self.repo_path), "show", "--no-color", source],
            capture_output=True,
            text=True,
        )
        if proc.returncode != 0:
            stderr = proc.stderr.lower()
            if "bad object" in stderr or "unknown revision" in stderr or "bad revision" in stderr:
                raise SourceGoneError(source)
            raise FetchRetryableError(proc.stderr.strip() or f"git show failed for {source}")
        return ArtifactBundle(patches=proc.stdout)


def fetch_artifacts(
    seed: Seed,
    fetcher: ArtifactFetcher,
    store: CorpusStore | None = None,
    clock: Clock | None = None,
) -> Seed:
    """Fetch a seed's artifacts and return the updated seed.

    Permanently-gone sources flag the seed obsolete. Retryable errors
    propagate so a scheduler can retry; the seed record is untouched.
    """
    clock = clock or SystemClock()
    try:
        bundle = fetcher.fetch(seed.source)
    except SourceGoneError:
        updated = seed.with_status(SeedStatus.OBSOLETE)
        if store is not None:
            store.upsert_seed(updated)
        return updated
    artifacts = SeedArtifacts(
        discussion=bundle.discussion,
        patches=bundle.patches,
        review=bundle.review,
        poc=bundle.poc,
        fetched_at=isoformat(clock.now()),
    )
    updated = seed.with_artifacts(artifacts)
    if store is not None:
        store.upsert_seed(updated)
    return updated
