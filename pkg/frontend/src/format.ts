/** Display formatting helpers. Pure presentation: every number shown
 * comes in from an API response; nothing here derives domain values. */

import type { BudgetInfo } from "./types.js";

export function escapeHtml(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

export function fmtSeconds(seconds: number): string {
  if (!Number.isFinite(seconds)) return "–";
  if (seconds < 60) return `${seconds.toFixed(1)}s`;
  const minutes = Math.floor(seconds / 60);
  const rest = Math.round(seconds % 60);
  if (minutes < 60) return `${minutes}m ${String(rest).padStart(2, "0")}s`;
  const hours = Math.floor(minutes / 60);
  return `${hours}h ${String(minutes % 60).padStart(2, "0")}m`;
}

export function fmtCost(cost: number): string {
  if (!Number.isFinite(cost)) return "–";
  return `$${cost.toFixed(4)}`;
}

export function fmtRate(rate: number | null): string {
  if (rate === null || !Number.isFinite(rate)) return "–";
  return `${(rate * 100).toFixed(1)}%`;
}

export interface BudgetMark {
  /** Position along the bar, as a fraction of the hard limit. */
  position: number;
  /** Warn fraction of the soft limit this mark represents. */
  fraction: number;
  /** Whether elapsed time has passed this mark. */
  lit: boolean;
}

export interface BudgetGauge {
  /** Elapsed over hard limit, clamped to [0, 1]. */
  fill: number;
  /** Where the soft limit sits along the bar. */
  softPosition: number;
  marks: BudgetMark[];
  overSoft: boolean;
  overHard: boolean;
  /** CSS-friendly severity: ok | warn | soft | hard. */
  level: "ok" | "warn" | "soft" | "hard";
}

/** Lay out a run's elapsed time against the server's budget policy.
 *
 * The thresholds all come from the budget object the API serves; this
 * only positions them on a unit-length bar.
 */
export function budgetGauge(elapsed: number, budget: BudgetInfo): BudgetGauge {
  const hard = budget.hard_limit > 0 ? budget.hard_limit : 1;
  const fill = Math.min(Math.max(elapsed / hard, 0), 1);
  const marks = budget.warn_fractions.map((fraction) => ({
    position: (fraction * budget.soft_limit) / hard,
    fraction,
    lit: elapsed >= fraction * budget.soft_limit,
  }));
  const overSoft = elapsed >= budget.soft_limit;
  const overHard = elapsed >= budget.hard_limit;
  const level = overHard ? "hard" : overSoft ? "soft" : marks.some((m) => m.lit) ? "warn" : "ok";
  return { fill, softPosition: budget.soft_limit / hard, marks, overSoft, overHard, level };
}
