/** Wire documents exchanged with the ingest service. Timestamps are epoch ms. */

export type EventKind =
  | "click"
  | "edit_text"
  | "scroll"
  | "display"
  | "submit"
  | "mouseover"
  | "focus"
  | "blur"
  | "session_end";

export interface BatchEvent {
  event_id: string;
  seq: number;
  timestamp_ms: number;
  object_id: string;
  kind: EventKind;
  activity_hint?: string;
  attributes: Record<string, string>;
}

export interface ClientBatchDoc {
  batch_id: string;
  session_id: string;
  actor_id: string;
  client_clock_offset_ms?: number;
  collector_id?: string;
  events: BatchEvent[];
}

export interface Ack {
  status: "accepted" | "duplicate" | "rejected";
  accepted_count: number;
  message: string | null;
}

export interface ReadingDoc {
  actor_id: string;
  message_id: string;
  started_at_ms: number;
  duration_ms: number;
  censored: boolean;
  completeness: "green" | "orange" | "blue";
  max_scroll_ratio: number;
}

export interface SphereDoc {
  reading: ReadingDoc;
  diameter: number;
  offset: number;
}

export interface SphereTimelineDoc {
  message_id: string | null;
  window: { from_ms: number; to_ms: number };
  scale_k: number;
  scale_t: number;
  spheres: SphereDoc[];
}

export interface ParticipationDoc {
  actor_id: string;
  reads: number;
  posts: number;
  window: { from_ms: number; to_ms: number };
}

export interface EventDoc extends Omit<BatchEvent, "activity_hint"> {
  session_id: string;
  actor_id: string;
  side: "client" | "server";
  collector_id: string;
  activity_hint: string | null;
}

export interface StateDoc {
  activity: string;
  started_at_ms: number;
  ended_at_ms: number;
  censored: boolean;
  events: EventDoc[];
  attributes: Record<string, string>;
  annotations: unknown[];
}

export interface TransitionDoc {
  from_activity: string;
  to_activity: string;
  occurred_at_ms: number;
  trigger_events: EventDoc[];
  annotations: unknown[];
}

export interface TraceDoc {
  trace_id: string;
  session_id: string;
  actor_id: string;
  sequence: Array<StateDoc | TransitionDoc>;
  quarantine: Array<{ reason: string; event: EventDoc }>;
}

export function isStateDoc(element: StateDoc | TransitionDoc): element is StateDoc {
  return "activity" in element;
}
