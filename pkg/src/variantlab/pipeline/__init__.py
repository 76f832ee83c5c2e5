"""Staged agent pipeline: analyzer, investigator, scenario analyzer, validator."""

from variantlab.pipeline.models import (
    AgentRun,
    AnalysisReport,
    BudgetClock,
    Location,
    RunOutcome,
    Scenario,
    ScenarioState,
    Stage,
    StateTransitionError,
    VulnerabilityReport,
)
from variantlab.pipeline.timeouts import WarningEvent, closed_form_warning_count, warning_events, warning_schedule
from variantlab.pipeline.backend import (
    AgentBackend,
    AgentTurn,
    HttpAgentBackend,
    PriceTable,
    ScriptedBackend,
    ToolCall,
    TurnRequest,
    Usage,
)
from variantlab.pipeline.runner import (
    MemorySink,
    NullSink,
    PIPELINE_SHAPES,
    PipelineConfig,
    PipelineSink,
    SeedOutcome,
    run_pipeline,
)
from variantlab.pipeline.stages import PipelineDeps, run_analyzer, run_investigator, run_preanalysis, run_scenario_analyzer, run_validator
from variantlab.pipeline.workspace import LocalSandboxDriver, Workspace, WorkspaceDriver

__all__ = [
    "AgentBackend",
    "AgentRun",
    "AgentTurn",
    "AnalysisReport",
    "BudgetClock",
    "HttpAgentBackend",
    "LocalSandboxDriver",
    "Location",
    "MemorySink",
    "NullSink",
    "PIPELINE_SHAPES",
    "PipelineConfig",
    "PipelineDeps",
    "PipelineSink",
    "PriceTable",
    "RunOutcome",
    "Scenario",
    "ScenarioState",
    "ScriptedBackend",
    "SeedOutcome",
    "Stage",
    "StateTransitionError",
    "ToolCall",
    "TurnRequest",
    "Usage",
    "VulnerabilityReport",
    "WarningEvent",
    "Workspace",
    "WorkspaceDriver",
    "closed_form_warning_count",
    "run_analyzer",
    "run_investigator",
    "run_pipeline",
    "run_preanalysis",
    "run_scenario_analyzer",
    "run_validator",
    "warning_events",
    "warning_schedule",
]
