/** Pure board state: snapshot loading plus an event-log reducer.
 *
 * The reducer consumes the campaign event stream and maintains the same
 * collections the snapshot endpoint serves, in the same order (the
 * server lists runs, scenarios and reports sorted by id; ids are ASCII,
 * so plain string comparison reproduces that order here). A board built
 * from events alone is therefore directly comparable to a snapshot.
 *
 * Panels the server computes — campaign totals, metrics, budget — are
 * never derived here: they enter the board only via boardFromSnapshot
 * or mergeFetched, straight from API responses.
 */

import type {
  BoardSnapshot,
  BudgetInfo,
  CampaignDoc,
  CampaignTotals,
  CampaignView,
  EventFrame,
  Metrics,
  ReportView,
  RunRow,
  ScenarioDoc,
  TriageAction,
} from "./types.js";

/** Campaign as the board knows it; totals arrive only from the API. */
export type BoardCampaign = CampaignDoc & { totals: CampaignTotals | null };

export interface Board {
  campaign: BoardCampaign | null;
  runs: RunRow[];
  scenarios: ScenarioDoc[];
  reports: ReportView[];
  metrics: Metrics | null;
  budget: BudgetInfo | null;
  /** Sequence number of the last applied event. */
  cursor: number;
}

export function emptyBoard(): Board {
  return {
    campaign: null,
    runs: [],
    scenarios: [],
    reports: [],
    metrics: null,
    budget: null,
    cursor: 0,
  };
}

export function boardFromSnapshot(snap: BoardSnapshot): Board {
  return {
    campaign: snap.campaign,
    runs: snap.runs.slice(),
    scenarios: snap.scenarios.slice(),
    reports: snap.reports.slice(),
    metrics: snap.metrics,
    budget: snap.budget,
    cursor: snap.cursor,
  };
}

/** Replace the endpoint-sourced panels with freshly fetched responses. */
export function mergeFetched(
  board: Board,
  fetched: { campaign?: CampaignView; metrics?: Metrics; budget?: BudgetInfo },
): Board {
  return {
    ...board,
    campaign: fetched.campaign ?? board.campaign,
    metrics: fetched.metrics ?? board.metrics,
    budget: fetched.budget ?? board.budget,
  };
}

/** Insert or replace an item in an id-sorted array; returns a new array. */
function upsertById<T extends { id: string }>(items: T[], item: T): T[] {
  const next = items.slice();
  for (let i = 0; i < next.length; i++) {
    const existing = next[i];
    if (existing === undefined) continue;
    if (existing.id === item.id) {
      next[i] = item;
      return next;
    }
    if (item.id < existing.id) {
      next.splice(i, 0, item);
      return next;
    }
  }
  next.push(item);
  return next;
}

/** Drop the event-envelope keys, leaving the original payload. */
function payloadOf(data: EventFrame["data"]): Record<string, unknown> {
  const { kind: _kind, at: _at, ...rest } = data;
  return rest;
}

function runFromUpdate(payload: Record<string, unknown>): RunRow {
  const { run_id, ...rest } = payload;
  return { id: run_id, ...rest } as unknown as RunRow;
}

/** Apply one stream event; returns the same board for already-seen ids.
 *
 * Every event advances the cursor. Kinds that carry no board content
 * (seed dispatch markers, error notices) advance it and nothing else,
 * so a resume from this cursor never replays them.
 */
export function applyEvent(board: Board, frame: EventFrame): Board {
  if (frame.id <= board.cursor) return board;
  const next: Board = { ...board, cursor: frame.id };
  const payload = payloadOf(frame.data);
  switch (frame.data.kind) {
    case "campaign_state": {
      const supplied = payload["campaign"] as CampaignDoc | undefined;
      if (supplied !== undefined) {
        next.campaign = { ...supplied, totals: board.campaign?.totals ?? null };
      } else if (next.campaign !== null) {
        next.campaign = { ...next.campaign, state: payload["state"] as string };
      }
      break;
    }
    case "run_update":
      next.runs = upsertById(board.runs, runFromUpdate(payload));
      break;
    case "scenario_update":
      next.scenarios = upsertById(board.scenarios, payload as unknown as ScenarioDoc);
      break;
    case "report_update": {
      const id = payload["id"] as string;
      const existing = board.reports.find((r) => r.id === id);
      const view = { ...payload, triage: existing?.triage ?? null } as unknown as ReportView;
      next.reports = upsertById(board.reports, view);
      break;
    }
    case "triage": {
      const reportId = payload["report_id"] as string;
      const action = payload["triage"] as TriageAction;
      next.reports = board.reports.map((r) =>
        r.id === reportId ? { ...r, triage: action } : r,
      );
      break;
    }
    default:
      break;
  }
  return next;
}

export function applyEvents(board: Board, frames: Iterable<EventFrame>): Board {
  let current = board;
  for (const frame of frames) current = applyEvent(current, frame);
  return current;
}
