// Console state: a pure reducer over snapshots and stream events.
//
// The pending-registration queue is a projection of server records (status
// === "pending_registration"), never a client-side invention, so an Unknown
// event always either shows in the queue or has a completed registration.

import type { ApiEvent, RecordInfo, SessionInfo, Snapshot } from "./types.js";
import type { ConnectionStatus } from "./sse.js";

export interface FeedRow {
  seq: number;
  kind: string;
  atS: number;
  tagId: string | null;
  label: string;
  detail: string;
}

export interface ConsoleState {
  session: SessionInfo | null;
  connection: ConnectionStatus | "idle";
  readerStatus: string;
  records: RecordInfo[];
  feed: FeedRow[]; // oldest first, one row per stream event
  corruptFrames: number;
  lastSeq: number;
  seqGaps: number[]; // sequence numbers that arrived with a hole before them
  lastError: string;
}

export function initialState(): ConsoleState {
  return {
    session: null,
    connection: "idle",
    readerStatus: "",
    records: [],
    feed: [],
    corruptFrames: 0,
    lastSeq: 0,
    seqGaps: [],
    lastError: "",
  };
}

export function pendingRegistrations(state: ConsoleState): RecordInfo[] {
  return state.records
    .filter((r) => r.status === "pending_registration")
    .sort((a, b) => a.first_seen_s - b.first_seen_s);
}

export function applyConnection(
  state: ConsoleState,
  connection: ConnectionStatus,
): ConsoleState {
  return { ...state, connection };
}

export function applySnapshot(state: ConsoleState, snapshot: Snapshot): ConsoleState {
  // Server records are authoritative; the feed survives reconnects because
  // the tail resumes from lastSeq.
  return {
    ...state,
    session: snapshot.session,
    records: [...snapshot.records],
    corruptFrames: snapshot.corrupt_frames,
  };
}

function upsertRecord(records: RecordInfo[], record: RecordInfo): RecordInfo[] {
  const out = records.filter((r) => r.tag_id !== record.tag_id);
  out.push(record);
  return out;
}

function feedRow(event: ApiEvent): FeedRow {
  let label = "";
  let detail = "";
  switch (event.kind) {
    case "resolved":
      label = event.student?.name ?? "(student)";
      detail = event.student
        ? [event.student.course, event.student.stream, event.student.trimester]
            .filter(Boolean)
            .join(" / ")
        : "";
      break;
    case "unknown":
      label = "Unknown tag";
      detail = "awaiting registration";
      break;
    case "corrupt":
      label = "Corrupt read";
      detail = "frame rejected by checksum";
      break;
    case "registered":
      label = `Registered: ${event.student?.name ?? ""}`;
      detail = event.tag_id ?? "";
      break;
    case "session_open":
      label = "Session opened";
      break;
    case "session_closed":
      label = "Session closed";
      break;
    case "reader_status":
      label = `Reader ${event.status ?? ""}`;
      detail = event.detail ?? "";
      break;
  }
  return {
    seq: event.seq,
    kind: event.kind,
    atS: event.at_s,
    tagId: event.tag_id ?? null,
    label,
    detail,
  };
}

export function applyEvent(state: ConsoleState, event: ApiEvent): ConsoleState {
  if (event.seq <= state.lastSeq) return state; // duplicate after reconnect
  const seqGaps =
    state.lastSeq > 0 && event.seq > state.lastSeq + 1
      ? [...state.seqGaps, event.seq]
      : state.seqGaps;

  const next: ConsoleState = {
    ...state,
    lastSeq: event.seq,
    seqGaps,
    feed: [...state.feed, feedRow(event)],
  };
  switch (event.kind) {
    case "resolved":
    case "unknown":
    case "registered":
      if (event.record) next.records = upsertRecord(next.records, event.record);
      break;
    case "corrupt":
      next.corruptFrames = event.corrupt_count ?? next.corruptFrames + 1;
      break;
    case "session_open":
    case "session_closed":
      next.session = event.session_info ?? next.session;
      break;
    case "reader_status":
      next.readerStatus = [event.status, event.detail].filter(Boolean).join(": ");
      next.feed = state.feed; // banner only, not a feed row
      break;
  }
  return next;
}
