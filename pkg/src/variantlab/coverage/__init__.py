"""Scenario coverage: campaign-global deduplication of proposed scenarios."""

from variantlab.coverage.judge import (
    CompletionJudge,
    EmbeddingThresholdJudge,
    JudgeUnavailableError,
    JudgeVerdict,
    ScriptedJudge,
    SemanticJudge,
)
from variantlab.coverage.models import CoverageEntry, OverlapDecision, Verdict
from variantlab.coverage.tracker import CoverageTracker, MemoryCoverageStore, export_entries, import_entries
from variantlab.coverage.window import WINDOW_LINES, intervals_overlap, spatial_overlaps

__all__ = [
    "CompletionJudge",
    "CoverageEntry",
    "CoverageTracker",
    "EmbeddingThresholdJudge",
    "JudgeUnavailableError",
    "JudgeVerdict",
    "MemoryCoverageStore",
    "OverlapDecision",
    "ScriptedJudge",
    "SemanticJudge",
    "Verdict",
    "WINDOW_LINES",
    "export_entries",
    "import_entries",
    "intervals_overlap",
    "spatial_overlaps",
]
