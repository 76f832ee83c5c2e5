"""Campaign orchestration service: persistence, engine, metrics, HTTP API."""

from variantlab.service.api import ServiceContext, create_app
from variantlab.service.campaign import (
    CAMPAIGN_STATES,
    CampaignConfig,
    CampaignEngine,
    CampaignStateError,
    CampaignSupervisor,
    campaign_view,
    create_campaign,
)
from variantlab.service.config import build_context, load_settings
from variantlab.service.metrics import compute_metrics
from variantlab.service.storage import CampaignCoverageStore, EventRecord, ProcessedSeed, SqliteStore

__all__ = [
    "CAMPAIGN_STATES",
    "CampaignConfig",
    "CampaignCoverageStore",
    "CampaignEngine",
    "CampaignStateError",
    "CampaignSupervisor",
    "EventRecord",
    "ProcessedSeed",
    "ServiceContext",
    "SqliteStore",
    "build_context",
    "campaign_view",
    "compute_metrics",
    "create_app",
    "create_campaign",
    "load_settings",
]
