// Shapes of the gateway's JSON payloads. The console never derives
// attendance facts itself; everything rendered comes from these.

export interface SessionInfo {
  id: string;
  course: string;
  stream: string;
  trimester: string;
  opened_s: number;
  closed_s: number | null;
  state: "open" | "closed";
}

export interface StudentInfo {
  id: string;
  name: string;
  course: string;
  stream: string;
  trimester: string;
  tag_id: string;
  photo_ref: string | null;
  registered_s: number;
  active: boolean;
}

export interface RecordInfo {
  session_ref: string;
  tag_id: string;
  student_ref: string | null;
  student_name: string | null;
  first_seen_s: number;
  last_seen_s: number;
  status: "present" | "pending_registration";
}

export type EventKind =
  | "resolved"
  | "unknown"
  | "corrupt"
  | "registered"
  | "session_open"
  | "session_closed"
  | "reader_status";

export interface ApiEvent {
  v: number;
  seq: number;
  session: string;
  kind: EventKind;
  at_s: number;
  tag_id?: string;
  student?: StudentInfo | null;
  record?: RecordInfo | null;
  session_info?: SessionInfo;
  corrupt_count?: number;
  status?: string;
  detail?: string;
}

export interface Snapshot {
  v: number;
  kind: "snapshot";
  session: SessionInfo;
  records: RecordInfo[];
  corrupt_frames: number;
  last_seq: number;
}

export interface RegistrationFields {
  name: string;
  course: string;
  stream: string;
  trimester: string;
  tag_id: string;
  photo_ref?: string | null;
}
