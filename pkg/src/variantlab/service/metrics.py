"""Campaign metrics recomputed from the persisted record set.

Nothing here reads engine memory: identical stores yield identical
numbers, before or after a restart.
"""

from __future__ import annotations

from typing import Any

from variantlab.pipeline.models import ScenarioState
from variantlab.service.storage import SqliteStore


def compute_metrics(store: SqliteStore, campaign_id: str) -> dict[str, Any]:
    """Pass rate, per-seed averages, and scenario counts by state.

    The pass rate counts only scenarios the gate actually decided
    (approved or rejected as redundant); held and downstream states do
    not dilute it. Averages are omitted until at least one seed has
    been processed.
    """
    counts = store.scenario_state_counts(campaign_id)
    by_state = {state.value: counts.get(state.value, 0) for state in ScenarioState}
    # Approval is sticky: every scenario past PROPOSED was approved once.
    approved = sum(
        n for state, n in by_state.items() if state not in ("proposed", "rejected_redundant")
    )
    rejected = by_state["rejected_redundant"]
    decided = approved + rejected
    totals = store.campaign_totals(campaign_id)
    processed = totals["seeds_processed"]
    metrics: dict[str, Any] = {
        "campaign_id": campaign_id,
        "scenario_counts": by_state,
        "scenarios_decided": decided,
        "coverage_pass_rate": (approved / decided) if decided else None,
        "seeds_processed": processed,
        "total_cost": totals["cost"],
        "total_wall_time": totals["wall_time"],
        "reports": len(store.reports(campaign_id)),
        "true_positives": totals["true_positives"],
        "false_positives": totals["false_positives"],
        "duplicates": totals["duplicates"],
    }
    if processed > 0:
        metrics["avg_cost_per_seed"] = totals["cost"] / processed
        metrics["avg_time_per_seed"] = totals["wall_time"] / processed
    return metrics
