"""Reference-bug corpus: seed records, artifacts, pre-analyses, embeddings."""

from variantlab.corpus.embeddings import (
    DegenerateEmbeddingError,
    EmbeddingProvider,
    HashedGaussianProvider,
    HttpEmbeddingProvider,
    embed_preanalysis,
)
from variantlab.corpus.fetch import (
    ArtifactFetcher,
    FetchRetryableError,
    FixtureFetcher,
    GitCommitFetcher,
    SourceGoneError,
    fetch_artifacts,
)
from variantlab.corpus.ingest import IngestResult, RecordRejection, ingest_tracker_export, parse_export
from variantlab.corpus.models import Embedding, PreAnalysis, Seed, SeedArtifacts, SeedStatus
from variantlab.corpus.store import MemoryCorpusStore

__all__ = [
    "ArtifactFetcher",
    "DegenerateEmbeddingError",
    "Embedding",
    "EmbeddingProvider",
    "FetchRetryableError",
    "FixtureFetcher",
    "GitCommitFetcher",
    "HashedGaussianProvider",
    "HttpEmbeddingProvider",
    "IngestResult",
    "MemoryCorpusStore",
    "PreAnalysis",
    "RecordRejection",
    "Seed",
    "SeedArtifacts",
    "SeedStatus",
    "SourceGoneError",
    "embed_preanalysis",
    "fetch_artifacts",
    "ingest_tracker_export",
    "parse_export",
]
