// Room state store: a reducer over server frames.
//
// The UI holds no authoritative state; everything here is rebuilt from
// a welcome/room_detail snapshot plus subsequent broadcasts, so closing
// and reopening a view reproduces identical content.

import type {
  ChatMessage,
  Frame,
  GraderResult,
  RoomMember,
  RoomStateBody,
  RoomSummary,
} from "./protocol.js";

export class RoomStore {
  roomId = "";
  groupNumber = 0;
  worksheetId = "";
  selectedProblem = "";
  members: RoomMember[] = [];
  aiChat: ChatMessage[] = [];
  taChat: ChatMessage[] = [];
  graderHistory: GraderResult[] = [];
  unreviewedCount = 0;
  docs: Record<string, { server_version: number; texts: Record<string, string> }> = {};

  private listeners = new Set<() => void>();

  subscribe(fn: () => void): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  loadSnapshot(body: RoomStateBody): void {
    this.roomId = body.room_id;
    this.groupNumber = body.group_number;
    this.worksheetId = body.worksheet_id;
    this.selectedProblem = body.selected_problem;
    this.members = [...body.members];
    this.aiChat = [...body.ai_chat];
    this.taChat = [...body.ta_chat];
    this.graderHistory = [...body.grader_history];
    this.unreviewedCount = body.unreviewed_count;
    this.docs = structuredClone(body.docs);
    this.emit();
  }

  latestGraderResult(problemId: string): GraderResult | null {
    for (let i = this.graderHistory.length - 1; i >= 0; i--) {
      if (this.graderHistory[i].problem_id === problemId) return this.graderHistory[i];
    }
    return null;
  }

  findMessage(messageId: string): ChatMessage | null {
    return (
      this.aiChat.find((m) => m.message_id === messageId) ??
      this.taChat.find((m) => m.message_id === messageId) ??
      null
    );
  }

  /** Reduce one broadcast frame. Edits are handled by the OT client,
   * but the doc snapshot version is tracked here for resync. */
  applyFrame(f: Frame): void {
    const body = f.body as Record<string, never>;
    switch (f.kind) {
      case "chat_message": {
        const msg = body["message"] as ChatMessage;
        if (msg.channel === "ta_chat") this.taChat.push(msg);
        else {
          this.aiChat.push(msg);
          if (msg.author_kind === "ai" && msg.review === "unreviewed") this.unreviewedCount++;
        }
        break;
      }
      case "message_updated": {
        const updated = body["message"] as ChatMessage;
        const list = updated.channel === "ta_chat" ? this.taChat : this.aiChat;
        const idx = list.findIndex((m) => m.message_id === updated.message_id);
        if (idx >= 0) {
          const wasUnreviewed = list[idx].review === "unreviewed";
          list[idx] = updated;
          if (wasUnreviewed && updated.review !== "unreviewed") this.unreviewedCount--;
        }
        break;
      }
      case "grader_result":
        this.graderHistory.push(body["result"] as GraderResult);
        break;
      case "problem_selected":
        this.selectedProblem = body["problem_id"] as string;
        break;
      case "edit_applied": {
        const op = body["op"] as { problem_id: string };
        const doc = this.docs[op.problem_id];
        if (doc) doc.server_version = body["server_version"] as number;
        break;
      }
      case "member_joined":
        break; // roster refresh arrives with the next snapshot
      case "member_left": {
        const pid = body["participant_id"] as string;
        this.members = this.members.filter((m) => m.participant_id !== pid);
        break;
      }
      default:
        return; // not a room frame; nothing to do
    }
    this.emit();
  }
}

export class RoomListStore {
  rooms: RoomSummary[] = [];
  private listeners = new Set<() => void>();

  subscribe(fn: () => void): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }

  update(rooms: RoomSummary[]): void {
    this.rooms = rooms;
    for (const fn of this.listeners) fn();
  }

  /** The server already orders the list; verify it here so a protocol
   * regression is caught by the client test suite too. */
  isWellOrdered(): boolean {
    const key = (r: RoomSummary): [number, number, string] => [
      r.unreviewed_count > 0 ? 0 : 1,
      -r.last_activity,
      r.room_id,
    ];
    for (let i = 1; i < this.rooms.length; i++) {
      const a = key(this.rooms[i - 1]);
      const b = key(this.rooms[i]);
      if (a[0] > b[0] || (a[0] === b[0] && (a[1] > b[1] || (a[1] === b[1] && a[2] > b[2])))) {
        return false;
      }
    }
    return true;
  }
}
