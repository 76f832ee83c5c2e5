/** Server-sent-events parsing and a reconnecting stream reader.
 *
 * The parser is a pure incremental machine fed text chunks of any
 * framing: frames may arrive split at arbitrary byte boundaries and are
 * only emitted once their terminating blank line is complete. The
 * reader drives it over fetch streaming and resumes from the last seen
 * event id after any disconnect, so a consumer sees every frame exactly
 * once no matter how often the connection drops.
 */

import type { ApiClient } from "./api.js";
import type { EventFrame } from "./types.js";

export interface RawFrame {
  /** Numeric `id:` field of the frame, or the last seen id. */
  id: number | null;
  /** `event:` field; "message" when absent, per the SSE default. */
  event: string;
  /** Concatenated `data:` lines, newline-joined. */
  data: string;
}

export class SseParser {
  private buffer = "";
  private dataLines: string[] = [];
  private eventType = "";
  private frameId: number | null = null;
  /** Last id seen on any frame; carried into id-less frames. */
  lastId: number | null = null;
  /** Server-suggested reconnect delay from a `retry:` line, if any. */
  retryMs: number | null = null;

  /** Feed one chunk; returns every frame completed by it. */
  push(chunk: string): RawFrame[] {
    this.buffer += chunk;
    const frames: RawFrame[] = [];
    for (;;) {
      const split = this.nextLine();
      if (split === null) break;
      const frame = this.consumeLine(split);
      if (frame !== null) frames.push(frame);
    }
    return frames;
  }

  /** Pull one complete line off the buffer, handling \n, \r\n and \r. */
  private nextLine(): string | null {
    for (let i = 0; i < this.buffer.length; i++) {
      const ch = this.buffer[i];
      if (ch === "\n") {
        const line = this.buffer.slice(0, i);
        this.buffer = this.buffer.slice(i + 1);
        return line;
      }
      if (ch === "\r") {
        // A \r at the very end might be half of \r\n; wait for more input.
        if (i === this.buffer.length - 1) return null;
        const line = this.buffer.slice(0, i);
        this.buffer = this.buffer.slice(this.buffer[i + 1] === "\n" ? i + 2 : i + 1);
        return line;
      }
    }
    return null;
  }

  private consumeLine(line: string): RawFrame | null {
    if (line === "") return this.dispatch();
    if (line.startsWith(":")) return null; // comment / keepalive
    const colon = line.indexOf(":");
    const field = colon === -1 ? line : line.slice(0, colon);
    let value = colon === -1 ? "" : line.slice(colon + 1);
    if (value.startsWith(" ")) value = value.slice(1);
    switch (field) {
      case "data":
        this.dataLines.push(value);
        break;
      case "event":
        this.eventType = value;
        break;
      case "id": {
        if (!value.includes("\0")) {
          const parsed = Number.parseInt(value, 10);
          this.frameId = Number.isNaN(parsed) ? null : parsed;
        }
        break;
      }
      case "retry": {
        const ms = Number.parseInt(value, 10);
        if (!Number.isNaN(ms) && ms >= 0) this.retryMs = ms;
        break;
      }
      default:
        break; // unknown fields are ignored per the protocol
    }
    return null;
  }

  private dispatch(): RawFrame | null {
    if (this.frameId !== null) this.lastId = this.frameId;
    const hadData = this.dataLines.length > 0;
    const frame: RawFrame = {
      id: this.lastId,
      event: this.eventType || "message",
      data: this.dataLines.join("\n"),
    };
    this.dataLines = [];
    this.eventType = "";
    this.frameId = null;
    // Frames without data update the id but render nothing.
    return hadData ? frame : null;
  }
}

export function decodeFrame(raw: RawFrame): EventFrame {
  return {
    id: raw.id ?? 0,
    event: raw.event,
    data: JSON.parse(raw.data) as EventFrame["data"],
  };
}

export interface StreamOptions {
  follow?: boolean;
  maxSeconds?: number;
  signal?: AbortSignal;
  fetchImpl?: typeof fetch;
}

export interface StreamResult {
  /** Highest event id seen (the cursor to resume from). */
  cursor: number;
  /** Server retry hint, if the stream sent one. */
  retryMs: number | null;
}

/** Read one events connection to its end, emitting decoded frames.
 *
 * Resumption semantics: `after` is sent as the Last-Event-ID header —
 * the standard SSE reconnect — and the server replays strictly after
 * it. Frames at or below `after` are dropped client-side too, so a
 * badly-behaved proxy cannot cause duplicates.
 */
export async function streamEvents(
  api: ApiClient,
  campaignId: string,
  after: number,
  onFrame: (frame: EventFrame) => void,
  opts: StreamOptions = {},
): Promise<StreamResult> {
  const fetchImpl = opts.fetchImpl ?? fetch;
  const streamRequest: { follow?: boolean; maxSeconds?: number } = {};
  if (opts.follow !== undefined) streamRequest.follow = opts.follow;
  if (opts.maxSeconds !== undefined) streamRequest.maxSeconds = opts.maxSeconds;
  const url = api.eventsUrl(campaignId, streamRequest);
  const init: RequestInit = {
    headers: api.headers({ "last-event-id": String(after) }),
  };
  if (opts.signal) init.signal = opts.signal;
  const response = await fetchImpl(url, init);
  if (!response.ok || response.body === null) {
    throw new Error(`event stream failed (${response.status})`);
  }
  const parser = new SseParser();
  const decoder = new TextDecoder();
  const reader = response.body.getReader();
  let cursor = after;
  try {
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      for (const raw of parser.push(decoder.decode(value, { stream: true }))) {
        const frame = decodeFrame(raw);
        if (frame.id <= cursor) continue;
        cursor = frame.id;
        onFrame(frame);
      }
    }
  } finally {
    reader.releaseLock();
  }
  return { cursor, retryMs: parser.retryMs };
}

export type StreamStatus = "live" | "stale" | "stopped";

export interface SubscriptionOptions {
  onStatus?: (status: StreamStatus) => void;
  fetchImpl?: typeof fetch;
  /** Reconnect delay when the server gave no retry hint. */
  fallbackRetryMs?: number;
  /** Length of each long-poll segment in follow mode. */
  segmentSeconds?: number;
}

/** Keep a campaign's event stream flowing until stop() is called.
 *
 * Runs follow-mode connections back to back; any failure flips the
 * status to "stale" and retries from the cursor, so a reconnect never
 * loses or repeats a frame.
 */
export function subscribe(
  api: ApiClient,
  campaignId: string,
  from: number,
  onFrame: (frame: EventFrame) => void,
  opts: SubscriptionOptions = {},
): { stop: () => void; done: Promise<void> } {
  const controller = new AbortController();
  const status = opts.onStatus ?? (() => {});
  const fallback = opts.fallbackRetryMs ?? 2000;
  const segment = opts.segmentSeconds ?? 25;
  let cursor = from;

  const done = (async () => {
    while (!controller.signal.aborted) {
      try {
        status("live");
        const streamOpts: StreamOptions = {
          follow: true,
          maxSeconds: segment,
          signal: controller.signal,
        };
        if (opts.fetchImpl) streamOpts.fetchImpl = opts.fetchImpl;
        const result = await streamEvents(api, campaignId, cursor, onFrame, streamOpts);
        cursor = result.cursor;
      } catch {
        if (controller.signal.aborted) break;
        status("stale");
        await delay(fallback, controller.signal);
      }
    }
    status("stopped");
  })();

  return { stop: () => controller.abort(), done };
}

function delay(ms: number, signal: AbortSignal): Promise<void> {
  return new Promise((resolve) => {
    const timer = setTimeout(resolve, ms);
    signal.addEventListener("abort", () => {
      clearTimeout(timer);
      resolve();
    });
  });
}
