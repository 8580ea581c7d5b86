// DOM wiring for the two surfaces: the student room view and the TA
// monitoring console. All room data flows one way: server frames ->
// stores -> render; user actions only ever send frames.

import { Connection, type ConnectionStatus } from "./connection.js";
import { OTClient, applyOp, type Op } from "./ot.js";
import {
  frame,
  type Frame,
  type RoomStateBody,
  type RoomSummary,
  type WireOp,
} from "./protocol.js";
import { RoomListStore, RoomStore } from "./state.js";
import {
  chatMessageHtml,
  escapeHtml,
  graderResultHtml,
  renderMarkdown,
  roomRowHtml,
} from "./views.js";

export interface JoinInfo {
  token: string;
  participant_id: string;
  role: "student" | "ta";
  room_id: string | null;
}

export async function joinService(email: string, groupNumber: number): Promise<JoinInfo> {
  const resp = await fetch("/api/join", {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ email, group_number: groupNumber }),
  });
  const data = await resp.json();
  if (!resp.ok) throw new Error(data.message ?? data.error ?? "join failed");
  return data as JoinInfo;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  html = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (html) node.innerHTML = html;
  return node;
}

function wireOpFromBroadcast(body: Record<string, unknown>): Op {
  const raw = body["op"] as WireOp;
  return {
    clientId: raw.client_id ?? "",
    clientSeq: raw.client_seq,
    problemId: raw.problem_id,
    blankId: raw.blank_id,
    kind: raw.kind,
    position: raw.position,
    text: raw.text ?? "",
    length: raw.length ?? 0,
    baseVersion: raw.base_version,
  };
}

function opToWire(op: Op): Record<string, unknown> {
  const body: Record<string, unknown> = {
    problem_id: op.problemId,
    blank_id: op.blankId,
    kind: op.kind,
    position: op.position,
    client_seq: op.clientSeq,
    base_version: op.baseVersion,
  };
  if (op.kind === "insert") body["text"] = op.text;
  else body["length"] = op.length;
  return body;
}

/** Shift a caret position across an applied op. */
export function adjustCaret(caret: number, op: Op): number {
  if (op.kind === "insert") {
    return op.position <= caret ? caret + op.text.length : caret;
  }
  if (op.position + op.length <= caret) return caret - op.length;
  if (op.position < caret) return op.position;
  return caret;
}

class StatusBanner {
  private node: HTMLElement;
  private errorNode: HTMLElement;
  private errorTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(root: HTMLElement) {
    this.node = el("div", { class: "status-banner hidden" });
    this.errorNode = el("div", { class: "error-toast hidden" });
    root.appendChild(this.node);
    root.appendChild(this.errorNode);
  }

  update(status: ConnectionStatus): void {
    if (status === "open") {
      this.node.classList.add("hidden");
    } else {
      this.node.classList.remove("hidden");
      this.node.textContent =
        status === "connecting" ? "Reconnecting…" : "Connection lost — retrying…";
    }
  }

  showError(message: string): void {
    this.errorNode.textContent = message;
    this.errorNode.classList.remove("hidden");
    if (this.errorTimer) clearTimeout(this.errorTimer);
    this.errorTimer = setTimeout(() => this.errorNode.classList.add("hidden"), 5000);
  }
}

// ----------------------------------------------------------------------
// Student view

export class StudentApp {
  private store = new RoomStore();
  private conn: Connection;
  private clients = new Map<string, OTClient>();
  private root: HTMLElement;
  private banner: StatusBanner;
  private me: string;

  constructor(root: HTMLElement, join: JoinInfo) {
    this.root = root;
    this.me = join.participant_id;
    this.banner = new StatusBanner(document.body);
    this.conn = new Connection(join.token);
    this.conn.onStatus = (s) => this.banner.update(s);
    this.conn.onFrame = (f) => this.onFrame(f);
    this.store.subscribe(() => this.renderChats());
    this.conn.start();
    root.innerHTML = '<p class="muted">Joining room…</p>';
  }

  private onFrame(f: Frame): void {
    if (f.kind === "welcome") {
      const room = (f.body as { room?: RoomStateBody }).room;
      if (room) {
        this.store.loadSnapshot(room);
        this.resyncDocs(room);
        this.renderLayout();
      }
      return;
    }
    if (f.kind === "error") {
      const body = f.body as { code?: string; message?: string };
      this.banner.showError(body.message ?? body.code ?? "request rejected");
      return;
    }
    if (f.kind === "edit_applied") {
      this.onEdit(f.body as Record<string, unknown>);
    }
    this.store.applyFrame(f);
    if (f.kind === "grader_result") this.renderGrader();
    if (f.kind === "problem_selected") this.renderEditor();
  }

  private resyncDocs(room: RoomStateBody): void {
    this.clients.clear();
    for (const [pid, doc] of Object.entries(room.docs)) {
      this.clients.set(pid, new OTClient(this.me, pid, doc.server_version, doc.texts));
    }
  }

  private onEdit(body: Record<string, unknown>): void {
    const op = wireOpFromBroadcast(body);
    const client = this.clients.get(op.problemId);
    if (!client) return;
    try {
      client.receive({ serverVersion: body["server_version"] as number, op });
    } catch {
      // Out of sync (e.g. missed frames): hard resync via snapshot.
      this.conn.send(frame("snapshot", { problem_id: op.problemId }));
      return;
    }
    this.pump(client);
    if (op.problemId === this.store.selectedProblem && op.clientId !== this.me) {
      this.refreshBlank(op);
    }
  }

  private pump(client: OTClient): void {
    const op = client.takeOp();
    if (op) this.conn.send(frame("edit", opToWire(op)));
  }

  private refreshBlank(op: Op): void {
    const area = this.root.querySelector<HTMLTextAreaElement>(
      `textarea[data-blank="${CSS.escape(op.blankId)}"]`,
    );
    const client = this.clients.get(op.problemId);
    if (!area || !client) return;
    const focused = document.activeElement === area;
    const caret = focused ? area.selectionStart : 0;
    area.value = client.texts[op.blankId];
    if (focused) {
      const adjusted = adjustCaret(caret, op);
      area.setSelectionRange(adjusted, adjusted);
    }
  }

  // -- rendering -------------------------------------------------------

  private renderLayout(): void {
    this.root.innerHTML = `
      <div class="layout-student">
        <section class="panel work-panel">
          <div class="problem-bar">
            <label>Problem <select id="problem-select"></select></label>
            <button id="check-answer">Check Answer</button>
          </div>
          <div id="prompt" class="prompt"></div>
          <div id="editor" class="editor"></div>
          <div id="grader" class="grader"></div>
        </section>
        <section class="panel chat-panel">
          <h2>AI Tutor</h2>
          <div id="ai-chat" class="chat-list"></div>
          <form id="ai-form" class="composer">
            <input id="ai-input" placeholder="Ask the AI tutor…" autocomplete="off">
            <button>Send</button>
          </form>
          <h2>TA Chat</h2>
          <div id="ta-chat" class="chat-list"></div>
          <form id="ta-form" class="composer">
            <input id="ta-input" placeholder="Message your TA…" autocomplete="off">
            <button>Send</button>
          </form>
        </section>
      </div>`;

    const select = this.root.querySelector<HTMLSelectElement>("#problem-select")!;
    for (const pid of Object.keys(this.store.docs)) {
      select.appendChild(el("option", { value: pid }, escapeHtml(pid)));
    }
    select.value = this.store.selectedProblem;
    select.addEventListener("change", () => {
      this.conn.send(frame("select_problem", { problem_id: select.value }));
    });
    this.root.querySelector("#check-answer")!.addEventListener("click", () => {
      this.conn.send(frame("check_answer", {}));
    });
    this.bindComposer("#ai-form", "#ai-input", (text) =>
      this.conn.send(frame("ask_tutor", { text })),
    );
    this.bindComposer("#ta-form", "#ta-input", (text) =>
      this.conn.send(frame("ta_chat", { text })),
    );
    this.root.querySelector("#ai-chat")!.addEventListener("click", (ev) => {
      const btn = (ev.target as HTMLElement).closest<HTMLElement>(".label-btn");
      if (btn) {
        this.conn.send(
          frame("label", {
            message_id: btn.dataset["message"],
            label: btn.dataset["label"],
          }),
        );
      }
    });
    this.renderEditor();
    this.renderChats();
    this.renderGrader();
  }

  private bindComposer(formSel: string, inputSel: string, send: (text: string) => void): void {
    const form = this.root.querySelector<HTMLFormElement>(formSel)!;
    const input = this.root.querySelector<HTMLInputElement>(inputSel)!;
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const text = input.value.trim();
      if (text) {
        send(text);
        input.value = "";
      }
    });
  }

  private renderEditor(): void {
    const host = this.root.querySelector<HTMLElement>("#editor");
    if (!host) return;
    const pid = this.store.selectedProblem;
    const client = this.clients.get(pid);
    const select = this.root.querySelector<HTMLSelectElement>("#problem-select");
    if (select && select.value !== pid) select.value = pid;
    host.innerHTML = "";
    if (!client) return;
    for (const [blankId, text] of Object.entries(client.texts)) {
      const wrap = el("div", { class: "blank" });
      wrap.appendChild(el("label", {}, `blank <code>${escapeHtml(blankId)}</code>`));
      const area = el("textarea", { "data-blank": blankId, rows: "2" });
      area.value = text;
      area.addEventListener("input", () => {
        client.localChange(blankId, area.value);
        this.pump(client);
      });
      wrap.appendChild(area);
      host.appendChild(wrap);
    }
    this.renderPrompt();
  }

  private renderPrompt(): void {
    const host = this.root.querySelector<HTMLElement>("#prompt");
    if (host) {
      // The prompt text is not in the welcome snapshot; show the
      // problem id as a heading and fetch the worksheet lazily.
      host.innerHTML = `<h2>${escapeHtml(this.store.selectedProblem)}</h2>` +
        `<div id="prompt-md" class="muted">…</div>`;
      void this.fillPrompt();
    }
  }

  private async fillPrompt(): Promise<void> {
    const target = this.root.querySelector<HTMLElement>("#prompt-md");
    if (!target) return;
    try {
      const resp = await fetch(
        `/api/worksheets/${encodeURIComponent(this.store.worksheetId)}`,
      );
      const text = await resp.text();
      const section = extractPrompt(text, this.store.selectedProblem);
      target.innerHTML = renderMarkdown(section);
    } catch {
      target.textContent = "";
    }
  }

  private renderChats(): void {
    const ai = this.root.querySelector<HTMLElement>("#ai-chat");
    const ta = this.root.querySelector<HTMLElement>("#ta-chat");
    const opts = { viewerId: this.me, withLabelButtons: true, withReviewControls: false };
    if (ai) {
      ai.innerHTML = this.store.aiChat
        .map((m) => chatMessageHtml(m, this.store.members, opts))
        .join("");
      ai.scrollTop = ai.scrollHeight;
    }
    if (ta) {
      ta.innerHTML = this.store.taChat
        .map((m) =>
          chatMessageHtml(m, this.store.members, { ...opts, withLabelButtons: false }),
        )
        .join("");
      ta.scrollTop = ta.scrollHeight;
    }
  }

  private renderGrader(): void {
    const host = this.root.querySelector<HTMLElement>("#grader");
    if (host) {
      host.innerHTML = graderResultHtml(
        this.store.latestGraderResult(this.store.selectedProblem),
      );
    }
  }
}

/** Pull one problem's prompt out of a canonical worksheet file. */
export function extractPrompt(worksheet: string, problemId: string): string {
  const lines = worksheet.split("\n");
  const out: string[] = [];
  let inProblem = false;
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i];
    if (line.startsWith("## ")) {
      if (inProblem) break;
      // match either the heading slug or the explicit id line below it
      const heading = line.slice(3).trim();
      const next = lines[i + 1] ?? "";
      inProblem = heading === problemId || next.trim() === `id: ${problemId}`;
      if (inProblem && next.trim().startsWith("id: ")) i++;
      continue;
    }
    if (inProblem) {
      if (line.startsWith("```")) break;
      out.push(line);
    }
  }
  return out.join("\n").trim();
}

// ----------------------------------------------------------------------
// TA view

interface DocFollower {
  version: number;
  texts: Record<string, string>;
}

export class TAApp {
  private conn: Connection;
  private list = new RoomListStore();
  private detail = new RoomStore();
  private docs = new Map<string, DocFollower>();
  private watched: string | null = null;
  private root: HTMLElement;
  private banner: StatusBanner;
  private editing: string | null = null;

  constructor(root: HTMLElement, join: JoinInfo) {
    this.root = root;
    this.banner = new StatusBanner(document.body);
    this.conn = new Connection(join.token);
    this.conn.onStatus = (s) => {
      this.banner.update(s);
      if (s === "open") this.refreshRooms();
    };
    this.conn.onFrame = (f) => this.onFrame(f);
    this.list.subscribe(() => this.renderRoomList());
    this.detail.subscribe(() => this.renderDetail());
    this.conn.start();
    this.renderLayout();
    setInterval(() => this.refreshRooms(), 4000);
  }

  private refreshRooms(): void {
    this.conn.send(frame("list_rooms"));
  }

  private onFrame(f: Frame): void {
    const body = f.body as Record<string, unknown>;
    switch (f.kind) {
      case "error":
        this.banner.showError(
          (body["message"] as string) ?? (body["code"] as string) ?? "request rejected",
        );
        return;
      case "room_list":
        this.list.update(body["rooms"] as RoomSummary[]);
        return;
      case "room_detail": {
        const room = f.body as unknown as RoomStateBody;
        if (room.room_id !== this.watched) return;
        this.docs.clear();
        for (const [pid, doc] of Object.entries(room.docs)) {
          this.docs.set(pid, { version: doc.server_version, texts: { ...doc.texts } });
        }
        this.detail.loadSnapshot(room);
        return;
      }
      case "edit_applied": {
        if (body["room_id"] !== this.watched) return;
        const op = wireOpFromBroadcast(body);
        const doc = this.docs.get(op.problemId);
        if (!doc) return;
        const version = body["server_version"] as number;
        if (version !== doc.version + 1) {
          this.conn.send(frame("room_detail", { room_id: this.watched }));
          return;
        }
        // Broadcast ops are post-transformation server ops: a watcher
        // just folds them over the snapshot in order.
        doc.texts[op.blankId] = applyOp(doc.texts[op.blankId], op);
        doc.version = version;
        this.detail.applyFrame(f);
        this.renderDoc();
        return;
      }
      default:
        if (body["room_id"] === this.watched) this.detail.applyFrame(f);
    }
  }

  private watch(roomId: string): void {
    if (this.watched === roomId) return;
    if (this.watched) this.conn.send(frame("unwatch", { room_id: this.watched }));
    this.watched = roomId;
    this.editing = null;
    this.conn.send(frame("watch", { room_id: roomId }));
  }

  // -- rendering -------------------------------------------------------

  private renderLayout(): void {
    this.root.innerHTML = `
      <div class="layout-ta">
        <section class="panel rooms-panel">
          <h2>Rooms</h2>
          <ul id="room-list" class="room-list"><li class="muted">loading…</li></ul>
        </section>
        <section class="panel detail-panel">
          <div id="detail-empty" class="muted">Select a room to monitor it live.</div>
          <div id="detail" class="hidden">
            <h2 id="detail-title"></h2>
            <div id="detail-doc" class="editor readonly"></div>
            <h3>AI Tutor channel</h3>
            <div id="detail-ai" class="chat-list tall"></div>
            <h3>TA channel</h3>
            <div id="detail-ta" class="chat-list"></div>
            <form id="detail-form" class="composer">
              <input id="detail-input" placeholder="Message this group…" autocomplete="off">
              <button>Send</button>
            </form>
          </div>
        </section>
      </div>`;
    this.root.querySelector("#room-list")!.addEventListener("click", (ev) => {
      const row = (ev.target as HTMLElement).closest<HTMLElement>(".room-row");
      if (row?.dataset["room"]) this.watch(row.dataset["room"]);
    });
    const form = this.root.querySelector<HTMLFormElement>("#detail-form")!;
    const input = this.root.querySelector<HTMLInputElement>("#detail-input")!;
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const text = input.value.trim();
      if (text && this.watched) {
        this.conn.send(frame("ta_chat", { room_id: this.watched, text }));
        input.value = "";
      }
    });
    this.root.querySelector("#detail-ai")!.addEventListener("click", (ev) => {
      const btn = (ev.target as HTMLElement).closest<HTMLElement>(".review-btn");
      if (!btn || btn.hasAttribute("disabled")) return;
      const messageId = btn.dataset["message"]!;
      const action = btn.dataset["action"]!;
      if (action === "edit") {
        this.editing = messageId;
        this.renderDetail();
      } else {
        this.sendReview(messageId, action);
      }
    });
  }

  private sendReview(messageId: string, action: string, newBody?: string): void {
    if (!this.watched) return;
    const body: Record<string, unknown> = {
      room_id: this.watched,
      message_id: messageId,
      action,
    };
    if (newBody !== undefined) body["new_body"] = newBody;
    this.conn.send(frame("review", body));
    this.editing = null;
  }

  private renderRoomList(): void {
    const host = this.root.querySelector<HTMLElement>("#room-list");
    if (!host) return;
    if (this.list.rooms.length === 0) {
      host.innerHTML = '<li class="muted">No active rooms yet.</li>';
      return;
    }
    host.innerHTML = this.list.rooms.map(roomRowHtml).join("");
    if (this.watched) {
      host
        .querySelector(`[data-room="${CSS.escape(this.watched)}"]`)
        ?.classList.add("selected");
    }
  }

  private renderDetail(): void {
    const detail = this.root.querySelector<HTMLElement>("#detail");
    const empty = this.root.querySelector<HTMLElement>("#detail-empty");
    if (!detail || !empty) return;
    if (!this.watched || !this.detail.roomId) return;
    detail.classList.remove("hidden");
    empty.classList.add("hidden");
    this.root.querySelector("#detail-title")!.textContent =
      `Group ${this.detail.groupNumber} — ${this.detail.selectedProblem}`;
    this.renderDoc();

    const opts = { viewerId: "", withLabelButtons: false, withReviewControls: true };
    const ai = this.root.querySelector<HTMLElement>("#detail-ai")!;
    ai.innerHTML = this.detail.aiChat
      .map((m) => {
        const base = chatMessageHtml(m, this.detail.members, opts);
        if (this.editing === m.message_id) {
          return (
            base +
            `<div class="edit-box" data-editing="${escapeHtml(m.message_id)}">` +
            `<textarea id="edit-area" rows="3">${escapeHtml(m.body)}</textarea>` +
            `<button id="edit-save">Save edit</button>` +
            `<button id="edit-cancel">Cancel</button></div>`
          );
        }
        return base;
      })
      .join("");
    ai.scrollTop = ai.scrollHeight;
    ai.querySelector("#edit-save")?.addEventListener("click", () => {
      const area = ai.querySelector<HTMLTextAreaElement>("#edit-area")!;
      this.sendReview(this.editing!, "edit", area.value);
    });
    ai.querySelector("#edit-cancel")?.addEventListener("click", () => {
      this.editing = null;
      this.renderDetail();
    });

    const ta = this.root.querySelector<HTMLElement>("#detail-ta")!;
    ta.innerHTML = this.detail.taChat
      .map((m) =>
        chatMessageHtml(m, this.detail.members, { ...opts, withReviewControls: false }),
      )
      .join("");
  }

  private renderDoc(): void {
    const host = this.root.querySelector<HTMLElement>("#detail-doc");
    if (!host) return;
    const doc = this.docs.get(this.detail.selectedProblem);
    if (!doc) {
      host.innerHTML = "";
      return;
    }
    host.innerHTML = Object.entries(doc.texts)
      .map(
        ([blank, text]) =>
          `<div class="blank"><label>blank <code>${escapeHtml(blank)}</code></label>` +
          `<textarea readonly rows="2" data-blank="${escapeHtml(blank)}">${escapeHtml(
            text,
          )}</textarea></div>`,
      )
      .join("");
  }
}
