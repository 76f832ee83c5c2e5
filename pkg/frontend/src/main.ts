/** Dashboard entry point: routing, stream wiring, and user actions.
 *
 * Views are stateless across reloads — everything shown is refetched or
 * replayed from the API on navigation. Each view holds at most one open
 * event-stream subscription, torn down on route change.
 */

import { ApiClient, ApiError } from "./api.js";
import { escapeHtml } from "./format.js";
import { subscribe, type StreamStatus } from "./sse.js";
import {
  applyEvent,
  boardFromSnapshot,
  emptyBoard,
  mergeFetched,
  type Board,
} from "./state.js";
import type { EventFrame } from "./types.js";
import { renderBoardPage, renderCampaignList, renderStrategyComparison } from "./view.js";

function mountPoint(): HTMLElement {
  const el = document.getElementById("app");
  if (el === null) throw new Error("missing #app mount point");
  return el;
}

const app = mountPoint();

const authToken = new URLSearchParams(window.location.search).get("token");
const api = new ApiClient("", authToken);

type Cleanup = () => void;
let teardown: Cleanup = () => {};

// Event kinds after which the server-computed panels (campaign totals,
// metrics) may have moved; the view refetches them rather than deriving
// anything locally.
const PANEL_KINDS = new Set(["seed_processed", "triage", "campaign_state", "report_update"]);

function showCampaignList(mount: HTMLElement): Cleanup {
  let alive = true;
  const load = async (): Promise<void> => {
    try {
      const views = await api.campaigns();
      if (!alive) return;
      mount.innerHTML = `
        <header class="campaign-head"><div class="card-head"><h1>Campaigns</h1></div></header>
        ${renderCampaignList(views)}
        ${renderStrategyComparison(views)}`;
    } catch (err) {
      if (alive) mount.innerHTML = `<p class="error">${escapeHtml(describeError(err))}</p>`;
    }
  };
  void load();
  const timer = setInterval(() => void load(), 5000);
  return () => {
    alive = false;
    clearInterval(timer);
  };
}

function showBoard(mount: HTMLElement, campaignId: string): Cleanup {
  let alive = true;
  let board: Board = emptyBoard();
  let connection: StreamStatus = "stale";
  let flash = "";
  /** Per-report client tokens; a token is replaced only after its
   * request settles, so repeated clicks replay the same mutation. */
  const tokens = new Map<string, string>();
  const notes = new Map<string, string>();
  let panelsInFlight = false;

  const render = (): void => {
    if (!alive) return;
    for (const report of board.reports) {
      if (!tokens.has(report.id)) tokens.set(report.id, crypto.randomUUID());
    }
    const banner = flash ? `<p class="error">${escapeHtml(flash)}</p>` : "";
    mount.innerHTML = banner + renderBoardPage(board, connection, tokens);
    for (const [id, text] of notes) {
      const el = mount.querySelector(`[data-triage-note="${CSS.escape(id)}"]`);
      if (el) el.textContent = text;
    }
  };

  const refreshPanels = async (): Promise<void> => {
    if (panelsInFlight) return;
    panelsInFlight = true;
    try {
      const [campaign, metrics] = await Promise.all([
        api.campaign(campaignId),
        api.metrics(campaignId),
      ]);
      if (!alive) return;
      board = mergeFetched(board, { campaign, metrics });
      render();
    } catch {
      // transient fetch failure; the next panel-affecting event retries
    } finally {
      panelsInFlight = false;
    }
  };

  const onFrame = (frame: EventFrame): void => {
    const previous = board;
    board = applyEvent(board, frame);
    if (board !== previous) render();
    if (PANEL_KINDS.has(frame.data.kind)) void refreshPanels();
  };

  let stream: { stop: () => void } | null = null;
  void (async () => {
    try {
      const snapshot = await api.board(campaignId);
      if (!alive) return;
      board = boardFromSnapshot(snapshot);
      render();
      stream = subscribe(api, campaignId, board.cursor, onFrame, {
        onStatus: (status) => {
          if (!alive || status === connection) return;
          connection = status;
          render();
        },
      });
    } catch (err) {
      if (alive) mount.innerHTML = `<p class="error">${escapeHtml(describeError(err))}</p>`;
    }
  })();

  const lifecycle = async (action: "pause" | "resume"): Promise<void> => {
    try {
      const result = action === "pause" ? await api.pause(campaignId) : await api.resume(campaignId);
      if (!alive) return;
      flash = "";
      if (board.campaign !== null) {
        board = { ...board, campaign: { ...board.campaign, state: result.state } };
      }
      render();
      void refreshPanels();
    } catch (err) {
      if (!alive) return;
      flash = describeError(err);
      render();
    }
  };

  const triage = async (reportId: string, verdict: string, clientToken: string): Promise<void> => {
    // Optimistic verdict; the response (and the stream) reconcile it.
    board = {
      ...board,
      reports: board.reports.map((r) =>
        r.id === reportId ? { ...r, triage: { verdict, note: "", token: clientToken, at: "" } } : r,
      ),
    };
    notes.set(reportId, "saving…");
    render();
    try {
      const result = await api.triage(campaignId, reportId, { verdict, note: "", token: clientToken });
      if (!alive) return;
      board = {
        ...board,
        reports: board.reports.map((r) =>
          r.id === reportId ? { ...r, triage: result.triage } : r,
        ),
      };
      if (tokens.get(reportId) === clientToken) tokens.set(reportId, crypto.randomUUID());
      if (!result.applied && result.triage.verdict !== verdict) {
        notes.set(reportId, `server kept the earlier verdict: ${result.triage.verdict}`);
      } else {
        notes.delete(reportId);
      }
      render();
      void refreshPanels();
    } catch (err) {
      if (!alive) return;
      notes.set(reportId, `triage failed: ${describeError(err)}`);
      void refreshPanels();
      render();
    }
  };

  const onClick = (ev: Event): void => {
    const target = ev.target instanceof Element ? ev.target.closest("button[data-action]") : null;
    if (!(target instanceof HTMLButtonElement) || target.disabled) return;
    const action = target.dataset["action"];
    if (action === "pause" || action === "resume") {
      void lifecycle(action);
    } else if (action === "triage") {
      const reportId = target.dataset["report"] ?? "";
      const verdict = target.dataset["verdict"] ?? "";
      const clientToken = target.dataset["token"] ?? "";
      if (reportId && verdict && clientToken) void triage(reportId, verdict, clientToken);
    }
  };
  mount.addEventListener("click", onClick);

  return () => {
    alive = false;
    stream?.stop();
    mount.removeEventListener("click", onClick);
  };
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) return err.detail;
  return err instanceof Error ? err.message : String(err);
}

function route(): void {
  teardown();
  const match = /^#\/campaigns\/(.+)$/.exec(window.location.hash);
  const first = match?.[1];
  teardown = first !== undefined
    ? showBoard(app, decodeURIComponent(first))
    : showCampaignList(app);
}

window.addEventListener("hashchange", route);
route();
