// Server-sent-events client over fetch streams.
//
// Hand-rolled instead of EventSource so the auth token can travel in a
// header, the resume point (?after=) is explicit, and the same code runs
// in the browser and under node for tests.

import type { ApiEvent, Snapshot } from "./types.js";

export interface SseMessage {
  id: string | null;
  event: string;
  data: string;
}

/** Incremental SSE parser; feed text chunks, get complete messages back. */
export function createSseParser(): (chunk: string) => SseMessage[] {
  let buffer = "";
  return (chunk: string): SseMessage[] => {
    buffer += chunk;
    const messages: SseMessage[] = [];
    let cut: number;
    while ((cut = buffer.indexOf("\n\n")) >= 0) {
      const block = buffer.slice(0, cut);
      buffer = buffer.slice(cut + 2);
      if (block.startsWith(":") || block.trim() === "") continue; // heartbeat
      const msg: SseMessage = { id: null, event: "message", data: "" };
      const dataLines: string[] = [];
      for (const line of block.split("\n")) {
        const sep = line.indexOf(":");
        if (sep < 0) continue;
        const field = line.slice(0, sep);
        const value = line.slice(sep + 1).replace(/^ /, "");
        if (field === "id") msg.id = value;
        else if (field === "event") msg.event = value;
        else if (field === "data") dataLines.push(value);
      }
      msg.data = dataLines.join("\n");
      messages.push(msg);
    }
    return messages;
  };
}

export type ConnectionStatus = "connecting" | "live" | "reconnecting" | "closed";

export interface StreamCallbacks {
  onSnapshot(snapshot: Snapshot): void;
  onEvent(event: ApiEvent): void;
  onStatus(status: ConnectionStatus): void;
}

const BACKOFF_INITIAL_MS = 500;
const BACKOFF_MAX_MS = 5000;

/**
 * Live event subscription for one session. Tracks the last delivered
 * sequence number and resumes from it on every (re)connect, so the feed
 * stays gap-free and duplicate-free across drops.
 */
export class EventStreamClient {
  lastSeq = 0;

  private stopped = false;
  private controller: AbortController | null = null;
  private sleeper: (() => void) | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly sessionId: string,
    private readonly token: string,
    private readonly callbacks: StreamCallbacks,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  start(): Promise<void> {
    this.stopped = false;
    return this.loop();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
    this.sleeper?.();
  }

  /** Drop the connection; the loop resumes from lastSeq. */
  forceReconnect(): void {
    this.controller?.abort();
  }

  private async loop(): Promise<void> {
    let backoff = BACKOFF_INITIAL_MS;
    let first = true;
    while (!this.stopped) {
      this.callbacks.onStatus(first ? "connecting" : "reconnecting");
      try {
        this.controller = new AbortController();
        const url =
          `${this.baseUrl}/events?session=${encodeURIComponent(this.sessionId)}` +
          `&after=${this.lastSeq}`;
        const resp = await this.fetchImpl(url, {
          headers: { Authorization: `Bearer ${this.token}` },
          signal: this.controller.signal,
        });
        if (!resp.ok || !resp.body) {
          throw new Error(`event stream failed: HTTP ${resp.status}`);
        }
        this.callbacks.onStatus("live");
        backoff = BACKOFF_INITIAL_MS;
        first = false;
        await this.consume(resp.body);
      } catch {
        // aborted or transport error; fall through to retry
      }
      if (this.stopped) break;
      await this.sleep(backoff);
      backoff = Math.min(backoff * 2, BACKOFF_MAX_MS);
    }
    this.callbacks.onStatus("closed");
  }

  private async consume(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    const parse = createSseParser();
    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (done) return;
        for (const msg of parse(decoder.decode(value, { stream: true }))) {
          this.dispatch(msg);
        }
      }
    } finally {
      reader.releaseLock();
    }
  }

  private dispatch(msg: SseMessage): void {
    const payload = JSON.parse(msg.data);
    if (payload.kind === "snapshot") {
      this.callbacks.onSnapshot(payload as Snapshot);
      return;
    }
    const event = payload as ApiEvent;
    this.callbacks.onEvent(event);
    if (event.seq > this.lastSeq) this.lastSeq = event.seq;
  }

  private sleep(ms: number): Promise<void> {
    return new Promise((resolve) => {
      const timer = setTimeout(() => {
        this.sleeper = null;
        resolve();
      }, ms);
      this.sleeper = () => {
        clearTimeout(timer);
        this.sleeper = null;
        resolve();
      };
    });
  }
}
