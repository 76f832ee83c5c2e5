/** Wire shapes served by the campaign service HTTP API. */

export interface CampaignTotals {
  seeds_processed: number;
  cost: number;
  wall_time: number;
  true_positives: number;
  false_positives: number;
  duplicates: number;
}

export interface CampaignConfig {
  target: string;
  pipeline_shape: string;
  scheduling: string;
  run_seed: number | null;
  budget: { cost_cap: number | null; seed_cap: number | null };
  parallelism: number;
  scenario_cap: number;
}

/** Campaign document as persisted; totals appear on API views only. */
export interface CampaignDoc {
  id: string;
  state: string;
  config: CampaignConfig;
  created_at: string;
}

export interface CampaignView extends CampaignDoc {
  totals: CampaignTotals;
}

export interface TranscriptEvent {
  type: string;
  at: number;
  [key: string]: unknown;
}

export interface RunRow {
  id: string;
  seed_id: string;
  stage: string;
  outcome: string;
  cost: number;
  input_tokens: number;
  output_tokens: number;
  wall_time: number;
  retries: number;
  started_at: string;
  last_event: TranscriptEvent | null;
}

export interface Location {
  file: string;
  line_start: number;
  line_end: number;
}

export interface ScenarioDoc {
  id: string;
  seed_id: string;
  locations: Location[];
  hypothesis: string;
  trigger_path: string;
  advisory_notes: string;
  state: string;
  poc: string | null;
}

export interface TriageAction {
  verdict: string;
  note: string;
  token: string;
  at: string;
}

export interface ReportView {
  id: string;
  seed_id: string;
  scenario_id: string;
  title: string;
  root_cause: string;
  mechanism: string;
  poc: string;
  release_output: string;
  debug_output: string;
  suggested_patch: string;
  waived_warnings: string[];
  created_at: string;
  triage: TriageAction | null;
}

export interface Metrics {
  campaign_id: string;
  scenario_counts: Record<string, number>;
  scenarios_decided: number;
  coverage_pass_rate: number | null;
  seeds_processed: number;
  total_cost: number;
  total_wall_time: number;
  reports: number;
  true_positives: number;
  false_positives: number;
  duplicates: number;
  avg_cost_per_seed?: number;
  avg_time_per_seed?: number;
}

export interface BudgetInfo {
  soft_limit: number;
  hard_limit: number;
  warn_fractions: number[];
  post_soft_interval: number;
}

/** GET /campaigns/{id}/board response. */
export interface BoardSnapshot {
  campaign: CampaignView;
  runs: RunRow[];
  scenarios: ScenarioDoc[];
  reports: ReportView[];
  metrics: Metrics;
  budget: BudgetInfo;
  cursor: number;
}

export interface TriageResult {
  report_id: string;
  triage: TriageAction;
  applied: boolean;
}

export interface LifecycleResult {
  id: string;
  state: string;
}

/** One decoded server-sent event with its log sequence. */
export interface EventFrame {
  id: number;
  event: string;
  data: { kind: string; at: string } & Record<string, unknown>;
}
