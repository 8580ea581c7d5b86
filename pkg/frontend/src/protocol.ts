// Wire protocol: every websocket message is {v: 1, kind, body}.
// Mirrors docs/protocol.md; validate() guards everything we send so a
// UI bug cannot put an off-spec frame on the wire.

export const PROTOCOL_VERSION = 1;

export type ReviewState = "unreviewed" | "read" | "endorsed" | "edited";
export type FeedbackLabel = "helpful" | "unhelpful" | "too_much_help" | "incorrect";

export const FEEDBACK_LABELS: FeedbackLabel[] = [
  "helpful",
  "unhelpful",
  "too_much_help",
  "incorrect",
];

export interface ChatMessage {
  message_id: string;
  channel: "ai_tutor" | "ta_chat";
  author_kind: "student" | "ai" | "ta";
  author_id: string | null;
  body: string;
  created_at: number;
  student_labels: Record<string, FeedbackLabel>;
  review: ReviewState;
  revisions: string[];
  system_notice: boolean;
  labelable: boolean;
}

export interface WireOp {
  problem_id: string;
  blank_id: string;
  kind: "insert" | "delete";
  position: number;
  text?: string;
  length?: number;
  client_seq: number;
  base_version: number;
  client_id?: string;
}

export interface RoomMember {
  participant_id: string;
  role: "student" | "ta";
  display_name: string;
}

export interface DocSnapshot {
  server_version: number;
  texts: Record<string, string>;
}

export interface RoomStateBody {
  room_id: string;
  group_number: number;
  worksheet_id: string;
  selected_problem: string;
  members: RoomMember[];
  docs: Record<string, DocSnapshot>;
  ai_chat: ChatMessage[];
  ta_chat: ChatMessage[];
  grader_history: GraderResult[];
  unreviewed_count: number;
}

export interface GraderOutcome {
  test_id: string;
  status: "pass" | "fail" | "error" | "timeout";
  detail: string;
}

export interface GraderResult {
  result_id: string;
  problem_id: string;
  outcomes: GraderOutcome[];
  overall_pass: boolean;
  ran_at: number;
}

export interface RoomSummary {
  room_id: string;
  group_number: number;
  unreviewed_count: number;
  selected_problem: string;
  member_count: number;
  last_activity: number;
  last_grader_pass: boolean | null;
}

export interface Frame {
  v: number;
  kind: string;
  body: Record<string, unknown>;
}

const CLIENT_KINDS = new Set([
  "edit",
  "snapshot",
  "select_problem",
  "ask_tutor",
  "label",
  "check_answer",
  "ta_chat",
  "review",
  "list_rooms",
  "watch",
  "unwatch",
  "room_detail",
]);

export function frame(kind: string, body: Record<string, unknown> = {}): Frame {
  return { v: PROTOCOL_VERSION, kind, body };
}

/** Throws if a frame we are about to send is off-spec. */
export function validateOutgoing(f: Frame): Frame {
  if (f.v !== PROTOCOL_VERSION) throw new Error(`bad protocol version ${f.v}`);
  if (!CLIENT_KINDS.has(f.kind)) throw new Error(`unknown client frame kind ${f.kind}`);
  if (typeof f.body !== "object" || f.body === null) throw new Error("body must be an object");
  if (f.kind === "edit") {
    const b = f.body as unknown as WireOp;
    if (b.kind !== "insert" && b.kind !== "delete") throw new Error("edit kind");
    if (!Number.isInteger(b.position) || b.position < 0) throw new Error("edit position");
    if (b.kind === "insert" && !(typeof b.text === "string" && b.text.length > 0))
      throw new Error("insert needs text");
    if (b.kind === "delete" && !(Number.isInteger(b.length) && (b.length as number) >= 1))
      throw new Error("delete needs length");
    if (!Number.isInteger(b.client_seq) || b.client_seq < 1) throw new Error("client_seq");
    if (!Number.isInteger(b.base_version) || b.base_version < 0) throw new Error("base_version");
    if (!b.problem_id || !b.blank_id) throw new Error("edit ids");
  }
  if (f.kind === "label") {
    const label = (f.body as { label?: string }).label;
    if (!FEEDBACK_LABELS.includes(label as FeedbackLabel)) throw new Error(`bad label ${label}`);
  }
  if (f.kind === "review") {
    const action = (f.body as { action?: string }).action;
    if (!["read", "endorse", "edit"].includes(action ?? "")) throw new Error("bad action");
  }
  return f;
}

export function parseFrame(raw: string): Frame {
  const data = JSON.parse(raw) as Frame;
  if (typeof data !== "object" || data === null || typeof data.kind !== "string") {
    throw new Error("malformed frame");
  }
  return data;
}

export function encodeFrame(f: Frame): string {
  return JSON.stringify(validateOutgoing(f));
}
