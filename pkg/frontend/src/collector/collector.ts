/**
 * In-page trace collector.
 *
 * Captures clicks, text-editing occurrences (never the text itself),
 * debounced scroll positions, and focus changes; buffers them in
 * localStorage with strictly increasing sequence numbers; and flushes
 * the buffer as an idempotent ClientBatch to the ingest service at
 * activity transitions, on page unload, and optionally on an interval.
 *
 * Delivery discipline: a flush moves the buffer into a pending batch
 * (persisted before sending). Success or an explicit duplicate ack clears
 * the pending batch; failures keep it, and the next flush retries it with
 * the same batch_id, so the server counts it exactly once. Nothing is
 * lost across navigation: buffer, pending batch, and counters are
 * restored from storage on the next attach.
 */

import type { Ack, ClientBatchDoc, BatchEvent, EventKind } from "../shared/wire";

export interface CollectorConfig {
  /** Base URL of the ingest service, e.g. http://host:8765 */
  endpoint: string;
  sessionId: string;
  actorId: string;
  collectorId?: string;
  /** Server's current time sampled when the page was rendered; the clock
   * offset sent with every batch is Date.now() - serverNowMs. */
  serverNowMs?: number;
  /** CSS selectors whose clicks end an activity; a flush("transition")
   * fires right after recording such a click. */
  transitionSelectors?: string[];
  /** Periodic flush; omit or 0 to disable. */
  flushIntervalMs?: number;
  scrollDebounceMs?: number;
  /** Injection points for tests. */
  windowRef?: Window;
  storage?: Pick<Storage, "getItem" | "setItem" | "removeItem">;
  fetchFn?: typeof fetch;
  now?: () => number;
}

export type FlushReason = "transition" | "unload" | "interval" | "manual";

export class AttachFailedError extends Error {}

interface PersistedState {
  seq: number;
  batchCounter: number;
  buffer: BatchEvent[];
  pending: ClientBatchDoc | null;
}

const EMPTY_STATE: PersistedState = { seq: 0, batchCounter: 0, buffer: [], pending: null };

function objectIdOf(target: EventTarget | null): string {
  if (target instanceof Element) {
    const explicit = target.getAttribute("data-object-id");
    if (explicit) return explicit;
    if (target.id) return target.id;
    return target.tagName.toLowerCase();
  }
  return "page";
}

export class Collector {
  private readonly config: Required<Pick<CollectorConfig, "endpoint" | "sessionId" | "actorId">> &
    CollectorConfig;
  private readonly win: Window;
  private readonly storage: Pick<Storage, "getItem" | "setItem" | "removeItem">;
  private readonly fetchFn: typeof fetch;
  private readonly now: () => number;
  private readonly offsetMs: number;

  private state: PersistedState;
  private attached = false;
  private sendInFlight: Promise<Ack | null> | null = null;
  private scrollTimer: ReturnType<typeof setTimeout> | null = null;
  private intervalTimer: ReturnType<typeof setInterval> | null = null;
  private listeners: Array<[string, EventListener]> = [];

  constructor(config: CollectorConfig) {
    if (!config.endpoint || !config.sessionId || !config.actorId) {
      throw new AttachFailedError("endpoint, sessionId, and actorId are required");
    }
    this.config = config;
    const win = config.windowRef ?? (typeof window !== "undefined" ? window : undefined);
    if (!win || !win.document) {
      throw new AttachFailedError("no document to observe");
    }
    this.win = win;
    this.storage = config.storage ?? win.localStorage;
    this.fetchFn = config.fetchFn ?? win.fetch.bind(win);
    this.now = config.now ?? (() => Date.now());
    this.offsetMs =
      config.serverNowMs !== undefined ? this.now() - config.serverNowMs : 0;
    this.state = this.restore();
  }

  // --- persistence -------------------------------------------------------

  private get storageKey(): string {
    return `forumtrace:${this.config.sessionId}`;
  }

  private restore(): PersistedState {
    try {
      const raw = this.storage.getItem(this.storageKey);
      if (!raw) return { ...EMPTY_STATE, buffer: [] };
      const parsed = JSON.parse(raw) as PersistedState;
      return {
        seq: parsed.seq ?? 0,
        batchCounter: parsed.batchCounter ?? 0,
        buffer: parsed.buffer ?? [],
        pending: parsed.pending ?? null,
      };
    } catch {
      return { ...EMPTY_STATE, buffer: [] };
    }
  }

  private persist(): void {
    this.storage.setItem(this.storageKey, JSON.stringify(this.state));
  }

  // --- event capture -----------------------------------------------------

  /** Append one event to the durable buffer. */
  record(kind: EventKind, objectId: string, attributes: Record<string, string> = {}): void {
    const seq = this.state.seq;
    this.state.seq += 1;
    this.state.buffer.push({
      event_id: `${this.config.sessionId}-c${seq}`,
      seq,
      timestamp_ms: this.now(),
      object_id: objectId,
      kind,
      attributes,
    });
    this.persist();
  }

  scrollRatio(): number {
    const doc = this.win.document.documentElement;
    const total = doc.scrollHeight;
    const seen = (this.win.scrollY ?? 0) + this.win.innerHeight;
    if (!total || total <= 0) return 0;
    return Math.min(1, Math.max(0, seen / total));
  }

  attach(): this {
    if (this.attached) return this; // idempotent
    const doc = this.win.document;
    const add = (target: Window | Document, type: string, handler: EventListener) => {
      target.addEventListener(type, handler);
      this.listeners.push([type, handler]);
    };

    add(doc, "click", (event) => {
      const objectId = objectIdOf(event.target);
      this.record("click", objectId);
      const selectors = this.config.transitionSelectors ?? [];
      if (
        event.target instanceof Element &&
        selectors.some((selector) => (event.target as Element).matches(selector))
      ) {
        void this.flush("transition");
      }
    });
    add(doc, "input", (event) => {
      // occurrence only: typed content is deliberately never captured
      this.record("edit_text", objectIdOf(event.target));
    });
    add(doc, "focusin", (event) => this.record("focus", objectIdOf(event.target)));
    add(doc, "focusout", (event) => this.record("blur", objectIdOf(event.target)));
    add(this.win, "scroll", () => {
      if (this.scrollTimer !== null) return;
      this.scrollTimer = setTimeout(() => {
        this.scrollTimer = null;
        this.record("scroll", "page", {
          scroll_ratio: this.scrollRatio().toFixed(4),
        });
      }, this.config.scrollDebounceMs ?? 250);
    });
    add(this.win, "pagehide", () => this.flushOnUnload());
    add(this.win, "beforeunload", () => this.flushOnUnload());

    const interval = this.config.flushIntervalMs ?? 0;
    if (interval > 0) {
      this.intervalTimer = setInterval(() => void this.flush("interval"), interval);
    }
    this.attached = true;
    return this;
  }

  detach(): void {
    if (!this.attached) return;
    for (const [type, handler] of this.listeners) {
      this.win.document.removeEventListener(type, handler);
      this.win.removeEventListener(type, handler);
    }
    this.listeners = [];
    if (this.intervalTimer !== null) clearInterval(this.intervalTimer);
    if (this.scrollTimer !== null) clearTimeout(this.scrollTimer);
    this.intervalTimer = null;
    this.scrollTimer = null;
    this.attached = false;
  }

  // --- flushing ----------------------------------------------------------

  bufferedCount(): number {
    return this.state.buffer.length + (this.state.pending?.events.length ?? 0);
  }

  /** Take the buffer as the next pending batch (or keep retrying the
   * current one; a batch id is never reused for different content). */
  private stagePending(): ClientBatchDoc | null {
    if (this.state.pending) return this.state.pending;
    if (this.state.buffer.length === 0) return null;
    const batch: ClientBatchDoc = {
      batch_id: `${this.config.sessionId}-wb${this.state.batchCounter}`,
      session_id: this.config.sessionId,
      actor_id: this.config.actorId,
      client_clock_offset_ms: this.offsetMs,
      collector_id: this.config.collectorId ?? "web",
      events: this.state.buffer,
    };
    this.state.batchCounter += 1;
    this.state.buffer = [];
    this.state.pending = batch;
    this.persist();
    return batch;
  }

  /**
   * Send buffered events to the service. Returns the ack, or null when
   * there was nothing to send. Overlapping triggers share one in-flight
   * send instead of double-consuming the buffer.
   */
  flush(_reason: FlushReason = "manual"): Promise<Ack | null> {
    if (this.sendInFlight) return this.sendInFlight;
    const batch = this.stagePending();
    if (!batch) return Promise.resolve(null);
    this.sendInFlight = this.send(batch).finally(() => {
      this.sendInFlight = null;
    });
    return this.sendInFlight;
  }

  private async send(batch: ClientBatchDoc): Promise<Ack | null> {
    try {
      const response = await this.fetchFn(`${this.config.endpoint}/api/v1/events/batch`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(batch),
      });
      if (!response.ok) {
        return null; // server trouble: keep pending for retry
      }
      const ack = (await response.json()) as Ack;
      if (ack.status === "accepted" || ack.status === "duplicate") {
        this.state.pending = null;
        this.persist();
      }
      return ack;
    } catch {
      return null; // network failure: pending batch survives in storage
    }
  }

  /** Fire-and-forget delivery for page unload; the pending batch stays in
   * storage so the next page load can retry it safely. */
  private flushOnUnload(): void {
    const batch = this.stagePending();
    if (!batch) return;
    const url = `${this.config.endpoint}/api/v1/events/batch`;
    const body = JSON.stringify(batch);
    const nav = this.win.navigator as Navigator & {
      sendBeacon?: (url: string, data: string) => boolean;
    };
    if (typeof nav.sendBeacon === "function") {
      nav.sendBeacon(url, body);
      return;
    }
    void this.fetchFn(url, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body,
      keepalive: true,
    })
      .then((response) => (response.ok ? response.json() : null))
      .then((ack: Ack | null) => {
        if (ack && (ack.status === "accepted" || ack.status === "duplicate")) {
          this.state.pending = null;
          this.persist();
        }
      })
      .catch(() => undefined);
  }
}

/** Install a collector on the current page. Re-attaching an already
 * attached collector is a no-op. */
export function attach(config: CollectorConfig): Collector {
  return new Collector(config).attach();
}
