/** HTML renderers for every dashboard panel.
 *
 * All pure string builders over API-sourced state: they read the board
 * and format what the server sent, never deriving domain numbers. Each
 * returns markup; main.ts owns mounting and event wiring.
 */

import { budgetGauge, escapeHtml, fmtCost, fmtRate, fmtSeconds } from "./format.js";
import type { Board, BoardCampaign } from "./state.js";
import type { CampaignView, Metrics, ReportView, RunRow, ScenarioDoc, BudgetInfo } from "./types.js";

export const TRIAGE_VERDICTS = ["tp", "fp", "duplicate"] as const;

const VERDICT_LABELS: Record<string, string> = {
  tp: "true positive",
  fp: "false positive",
  duplicate: "duplicate",
};

// -- campaign list -----------------------------------------------------

export function renderCampaignCard(view: CampaignView): string {
  const t = view.totals;
  return `
  <a class="card campaign-card" href="#/campaigns/${escapeHtml(view.id)}" data-campaign="${escapeHtml(view.id)}">
    <div class="card-head">
      <span class="card-title">${escapeHtml(view.id)}</span>
      <span class="state state-${escapeHtml(view.state)}">${escapeHtml(view.state)}</span>
    </div>
    <div class="card-sub">${escapeHtml(view.config.target)} · ${escapeHtml(view.config.pipeline_shape)}-stage · ${escapeHtml(view.config.scheduling)}</div>
    <dl class="card-stats">
      <div><dt>seeds</dt><dd>${t.seeds_processed}</dd></div>
      <div><dt>cost</dt><dd>${escapeHtml(fmtCost(t.cost))}</dd></div>
      <div><dt>tp</dt><dd>${t.true_positives}</dd></div>
      <div><dt>fp</dt><dd>${t.false_positives}</dd></div>
      <div><dt>dup</dt><dd>${t.duplicates}</dd></div>
    </dl>
  </a>`;
}

export function renderCampaignList(views: CampaignView[]): string {
  if (views.length === 0) {
    return `<p class="empty">No campaigns yet. Create one through the API or CLI.</p>`;
  }
  return `<div class="card-grid">${views.map(renderCampaignCard).join("")}</div>`;
}

/** Strategy comparison across campaigns, all figures from /campaigns. */
export function renderStrategyComparison(views: CampaignView[]): string {
  if (views.length === 0) return "";
  const rows = views
    .map(
      (v) => `
      <tr>
        <td><a href="#/campaigns/${escapeHtml(v.id)}">${escapeHtml(v.id)}</a></td>
        <td>${escapeHtml(v.config.scheduling)}</td>
        <td>${escapeHtml(v.state)}</td>
        <td class="num">${v.totals.seeds_processed}</td>
        <td class="num">${escapeHtml(fmtCost(v.totals.cost))}</td>
        <td class="num">${escapeHtml(fmtSeconds(v.totals.wall_time))}</td>
        <td class="num">${v.totals.true_positives}</td>
        <td class="num">${v.totals.false_positives}</td>
        <td class="num">${v.totals.duplicates}</td>
      </tr>`,
    )
    .join("");
  return `
  <section class="panel">
    <h2>Campaigns by scheduling strategy</h2>
    <div class="table-wrap"><table>
      <thead><tr>
        <th>campaign</th><th>strategy</th><th>state</th><th>seeds</th>
        <th>cost</th><th>agent time</th><th>tp</th><th>fp</th><th>dup</th>
      </tr></thead>
      <tbody>${rows}</tbody>
    </table></div>
  </section>`;
}

// -- campaign header ----------------------------------------------------

export function renderCampaignHeader(
  campaign: BoardCampaign,
  connection: "live" | "stale" | "stopped",
): string {
  const t = campaign.totals;
  const totals = t
    ? `<dl class="card-stats">
        <div><dt>seeds</dt><dd>${t.seeds_processed}</dd></div>
        <div><dt>cost</dt><dd>${escapeHtml(fmtCost(t.cost))}</dd></div>
        <div><dt>agent time</dt><dd>${escapeHtml(fmtSeconds(t.wall_time))}</dd></div>
        <div><dt>tp / fp / dup</dt><dd>${t.true_positives} / ${t.false_positives} / ${t.duplicates}</dd></div>
      </dl>`
    : "";
  const canPause = campaign.state === "running";
  const canResume = campaign.state === "paused" || campaign.state === "created";
  return `
  <header class="campaign-head">
    <div class="card-head">
      <h1>${escapeHtml(campaign.id)}</h1>
      <span class="state state-${escapeHtml(campaign.state)}">${escapeHtml(campaign.state)}</span>
      <span class="conn conn-${connection}" title="event stream">${connection === "live" ? "● live" : connection === "stale" ? "○ stale — reconnecting" : "○ disconnected"}</span>
      <span class="spacer"></span>
      <button data-action="pause" ${canPause ? "" : "disabled"}>pause</button>
      <button data-action="resume" ${canResume ? "" : "disabled"}>${campaign.state === "created" ? "start" : "resume"}</button>
    </div>
    <div class="card-sub">
      target ${escapeHtml(campaign.config.target)} · ${escapeHtml(campaign.config.pipeline_shape)}-stage pipeline ·
      ${escapeHtml(campaign.config.scheduling)} scheduling · created ${escapeHtml(campaign.created_at)}
    </div>
    ${totals}
  </header>`;
}

// -- live run board ------------------------------------------------------

function renderBudgetCell(run: RunRow, budget: BudgetInfo | null): string {
  if (budget === null) return `<td>${escapeHtml(fmtSeconds(run.wall_time))}</td>`;
  const gauge = budgetGauge(run.wall_time, budget);
  const marks = gauge.marks
    .map(
      (m) =>
        `<i class="mark ${m.lit ? "lit" : ""}" style="left:${(m.position * 100).toFixed(2)}%" title="${(m.fraction * 100).toFixed(0)}% of soft limit"></i>`,
    )
    .join("");
  return `
    <td class="budget-cell">
      <div class="gauge level-${gauge.level}" title="${escapeHtml(fmtSeconds(run.wall_time))} of ${escapeHtml(fmtSeconds(budget.soft_limit))} soft / ${escapeHtml(fmtSeconds(budget.hard_limit))} hard">
        <i class="fill" style="width:${(gauge.fill * 100).toFixed(2)}%"></i>
        ${marks}
        <i class="soft-line" style="left:${(gauge.softPosition * 100).toFixed(2)}%"></i>
      </div>
      <span class="gauge-label">${escapeHtml(fmtSeconds(run.wall_time))}</span>
    </td>`;
}

function renderLastEvent(run: RunRow): string {
  if (run.last_event === null) return `<td class="muted">–</td>`;
  const { type, at, ...rest } = run.last_event;
  const detail = Object.entries(rest)
    .map(([k, v]) => `${k}=${typeof v === "string" ? v : JSON.stringify(v)}`)
    .join(" ");
  return `<td><code>${escapeHtml(type)}</code> <span class="muted">${escapeHtml(detail)}</span></td>`;
}

export function renderRunBoard(runs: RunRow[], budget: BudgetInfo | null): string {
  if (runs.length === 0) {
    return `<section class="panel"><h2>Runs</h2><p class="empty">No agent runs yet.</p></section>`;
  }
  const rows = runs
    .map(
      (run) => `
      <tr>
        <td><code>${escapeHtml(run.id)}</code></td>
        <td>${escapeHtml(run.seed_id)}</td>
        <td><span class="stage">${escapeHtml(run.stage)}</span></td>
        <td><span class="outcome outcome-${escapeHtml(run.outcome)}">${escapeHtml(run.outcome)}</span></td>
        ${renderBudgetCell(run, budget)}
        <td class="num">${escapeHtml(fmtCost(run.cost))}</td>
        <td class="num">${run.input_tokens}↓ ${run.output_tokens}↑</td>
        <td class="num">${run.retries}</td>
        ${renderLastEvent(run)}
      </tr>`,
    )
    .join("");
  return `
  <section class="panel">
    <h2>Runs</h2>
    <div class="table-wrap"><table>
      <thead><tr>
        <th>run</th><th>seed</th><th>stage</th><th>outcome</th>
        <th>elapsed vs budget</th><th>cost</th><th>tokens</th><th>retries</th><th>last event</th>
      </tr></thead>
      <tbody>${rows}</tbody>
    </table></div>
  </section>`;
}

// -- scenario table -------------------------------------------------------

const DECIDED_STATES = new Set(["proposed"]);

function coverageDecision(state: string): string {
  // The gate's verdict is encoded in the scenario state: everything past
  // "proposed" was approved once; "rejected_redundant" is the refusal.
  if (state === "proposed") return "pending";
  if (state === "rejected_redundant") return "rejected (overlaps coverage)";
  return "approved";
}

export function renderScenarioTable(scenarios: ScenarioDoc[]): string {
  if (scenarios.length === 0) {
    return `<section class="panel"><h2>Scenarios</h2><p class="empty">No scenarios proposed yet.</p></section>`;
  }
  const rows = scenarios
    .map((s) => {
      const locations = s.locations
        .map((l) => `${l.file}:${l.line_start}–${l.line_end}`)
        .join(", ");
      return `
      <tr>
        <td><code>${escapeHtml(s.id)}</code></td>
        <td>${escapeHtml(s.seed_id)}</td>
        <td class="wrap">${escapeHtml(s.hypothesis)}</td>
        <td class="wrap"><code>${escapeHtml(locations)}</code></td>
        <td><span class="decision decision-${DECIDED_STATES.has(s.state) ? "pending" : s.state === "rejected_redundant" ? "rejected" : "approved"}">${escapeHtml(coverageDecision(s.state))}</span></td>
        <td><span class="state state-${escapeHtml(s.state)}">${escapeHtml(s.state)}</span></td>
      </tr>`;
    })
    .join("");
  return `
  <section class="panel">
    <h2>Scenarios</h2>
    <div class="table-wrap"><table>
      <thead><tr>
        <th>scenario</th><th>seed</th><th>hypothesis</th><th>locations</th>
        <th>coverage decision</th><th>state</th>
      </tr></thead>
      <tbody>${rows}</tbody>
    </table></div>
  </section>`;
}

// -- report triage queue ---------------------------------------------------

export function renderTriageQueue(reports: ReportView[], tokens: Map<string, string>): string {
  if (reports.length === 0) {
    return `<section class="panel"><h2>Reports</h2><p class="empty">No reports filed yet.</p></section>`;
  }
  const items = reports
    .map((report) => {
      const token = tokens.get(report.id) ?? "";
      const verdict = report.triage
        ? `<span class="verdict verdict-${escapeHtml(report.triage.verdict)}">${escapeHtml(VERDICT_LABELS[report.triage.verdict] ?? report.triage.verdict)}</span>
           <span class="muted">${escapeHtml(report.triage.note)}</span>`
        : `<span class="verdict verdict-none">untriaged</span>`;
      const buttons = TRIAGE_VERDICTS.map(
        (v) =>
          `<button data-action="triage" data-report="${escapeHtml(report.id)}" data-verdict="${v}" data-token="${escapeHtml(token)}">${escapeHtml(VERDICT_LABELS[v] ?? v)}</button>`,
      ).join("");
      return `
      <article class="card report-card" data-report-card="${escapeHtml(report.id)}">
        <div class="card-head">
          <span class="card-title">${escapeHtml(report.title)}</span>
          ${verdict}
        </div>
        <div class="card-sub"><code>${escapeHtml(report.id)}</code> · seed ${escapeHtml(report.seed_id)} · scenario ${escapeHtml(report.scenario_id)} · filed ${escapeHtml(report.created_at)}</div>
        <p class="wrap">${escapeHtml(report.root_cause)}</p>
        <details><summary>mechanism &amp; outputs</summary>
          <p class="wrap">${escapeHtml(report.mechanism)}</p>
          <pre>${escapeHtml(report.debug_output)}</pre>
        </details>
        <div class="triage-actions">${buttons}</div>
        <p class="triage-note muted" data-triage-note="${escapeHtml(report.id)}"></p>
      </article>`;
    })
    .join("");
  return `<section class="panel"><h2>Reports</h2>${items}</section>`;
}

// -- metrics panel ----------------------------------------------------------

export function renderMetricsPanel(metrics: Metrics | null): string {
  if (metrics === null) {
    return `<section class="panel"><h2>Metrics</h2><p class="empty">Loading…</p></section>`;
  }
  const counts = Object.entries(metrics.scenario_counts)
    .map(([state, n]) => `<div><dt>${escapeHtml(state)}</dt><dd>${n}</dd></div>`)
    .join("");
  const averages =
    metrics.avg_cost_per_seed !== undefined && metrics.avg_time_per_seed !== undefined
      ? `<div><dt>cost / seed</dt><dd>${escapeHtml(fmtCost(metrics.avg_cost_per_seed))}</dd></div>
         <div><dt>time / seed</dt><dd>${escapeHtml(fmtSeconds(metrics.avg_time_per_seed))}</dd></div>`
      : "";
  return `
  <section class="panel">
    <h2>Metrics</h2>
    <dl class="card-stats metrics-grid">
      <div><dt>coverage pass rate</dt><dd>${escapeHtml(fmtRate(metrics.coverage_pass_rate))}</dd></div>
      <div><dt>scenarios decided</dt><dd>${metrics.scenarios_decided}</dd></div>
      <div><dt>seeds processed</dt><dd>${metrics.seeds_processed}</dd></div>
      <div><dt>total cost</dt><dd>${escapeHtml(fmtCost(metrics.total_cost))}</dd></div>
      <div><dt>agent time</dt><dd>${escapeHtml(fmtSeconds(metrics.total_wall_time))}</dd></div>
      <div><dt>reports</dt><dd>${metrics.reports}</dd></div>
      ${averages}
      <div><dt>tp / fp / dup</dt><dd>${metrics.true_positives} / ${metrics.false_positives} / ${metrics.duplicates}</dd></div>
    </dl>
    <h3>Scenario states</h3>
    <dl class="card-stats">${counts}</dl>
  </section>`;
}

// -- page ---------------------------------------------------------------------

export function renderBoardPage(board: Board, connection: "live" | "stale" | "stopped", tokens: Map<string, string>): string {
  if (board.campaign === null) {
    return `<p class="empty">Loading campaign…</p>`;
  }
  return `
    ${renderCampaignHeader(board.campaign, connection)}
    ${renderRunBoard(board.runs, board.budget)}
    ${renderScenarioTable(board.scenarios)}
    ${renderTriageQueue(board.reports, tokens)}
    ${renderMetricsPanel(board.metrics)}
  `;
}
