/** Typed client for the campaign service; the only data source the UI has. */

import type {
  BoardSnapshot,
  CampaignView,
  LifecycleResult,
  Metrics,
  TriageResult,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
    readonly method: string,
    readonly path: string,
  ) {
    super(`${method} ${path} failed (${status}): ${detail}`);
  }
}

export interface TriageRequest {
  verdict: string;
  note: string;
  token: string;
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    readonly token: string | null = null,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  headers(extra: Record<string, string> = {}): Record<string, string> {
    const base: Record<string, string> = { ...extra };
    if (this.token) base["authorization"] = `Bearer ${this.token}`;
    return base;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: this.headers() };
    if (body !== undefined) {
      init.headers = this.headers({ "content-type": "application/json" });
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const payload = (await response.json()) as { detail?: string };
        if (payload.detail) detail = payload.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail, method, path);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ ok: boolean }> {
    return this.request("GET", "/health");
  }

  campaigns(): Promise<CampaignView[]> {
    return this.request("GET", "/campaigns");
  }

  campaign(id: string): Promise<CampaignView> {
    return this.request("GET", `/campaigns/${id}`);
  }

  board(id: string): Promise<BoardSnapshot> {
    return this.request("GET", `/campaigns/${id}/board`);
  }

  metrics(id: string): Promise<Metrics> {
    return this.request("GET", `/campaigns/${id}/metrics`);
  }

  start(id: string): Promise<LifecycleResult> {
    return this.request("POST", `/campaigns/${id}/start`);
  }

  pause(id: string): Promise<LifecycleResult> {
    return this.request("POST", `/campaigns/${id}/pause`);
  }

  resume(id: string): Promise<LifecycleResult> {
    return this.request("POST", `/campaigns/${id}/resume`);
  }

  triage(campaignId: string, reportId: string, body: TriageRequest): Promise<TriageResult> {
    return this.request("POST", `/campaigns/${campaignId}/reports/${reportId}/triage`, body);
  }

  /** URL of the event stream for a campaign; the stream layer fetches it. */
  eventsUrl(id: string, opts: { after?: number; follow?: boolean; maxSeconds?: number } = {}): string {
    const params = new URLSearchParams();
    if (opts.after !== undefined) params.set("after", String(opts.after));
    if (opts.follow) params.set("follow", "true");
    if (opts.maxSeconds !== undefined) params.set("max_seconds", String(opts.maxSeconds));
    const query = params.toString();
    return `${this.baseUrl}/campaigns/${id}/events${query ? `?${query}` : ""}`;
  }
}
