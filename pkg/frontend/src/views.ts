// Pure HTML builders shared by both views. Keeping these as functions
// of plain data makes badge and label rendering testable without a DOM.

import type { ChatMessage, GraderResult, RoomSummary } from "./protocol.js";
import { FEEDBACK_LABELS } from "./protocol.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export const LABEL_TEXT: Record<string, string> = {
  helpful: "helpful",
  unhelpful: "unhelpful",
  too_much_help: "too much help",
  incorrect: "incorrect",
};

/** Minimal markdown: paragraphs, inline code, bold, fenced code blocks. */
export function renderMarkdown(md: string): string {
  const out: string[] = [];
  const lines = md.split("\n");
  let i = 0;
  while (i < lines.length) {
    const line = lines[i];
    if (line.startsWith("```")) {
      const block: string[] = [];
      i++;
      while (i < lines.length && !lines[i].startsWith("```")) block.push(lines[i++]);
      i++;
      out.push(`<pre><code>${escapeHtml(block.join("\n"))}</code></pre>`);
      continue;
    }
    if (line.trim() === "") {
      i++;
      continue;
    }
    const para: string[] = [];
    while (i < lines.length && lines[i].trim() !== "" && !lines[i].startsWith("```")) {
      para.push(lines[i++]);
    }
    let html = escapeHtml(para.join(" "));
    html = html.replace(/`([^`]+)`/g, "<code>$1</code>");
    html = html.replace(/\*\*([^*]+)\*\*/g, "<strong>$1</strong>");
    out.push(`<p>${html}</p>`);
  }
  return out.join("\n");
}

export interface ChatRenderOptions {
  /** participant id of the viewer (labels show their own selection) */
  viewerId: string;
  /** render the four feedback-label buttons on AI messages */
  withLabelButtons: boolean;
  /** render read/endorse/edit controls (TA view) */
  withReviewControls: boolean;
}

export function authorName(msg: ChatMessage, members: { participant_id: string; display_name: string }[]): string {
  if (msg.author_kind === "ai") return "AI Tutor";
  const member = members.find((m) => m.participant_id === msg.author_id);
  const name = member?.display_name ?? msg.author_id ?? "?";
  return msg.author_kind === "ta" ? `${name} (TA)` : name;
}

export function badgesHtml(msg: ChatMessage): string {
  const badges: string[] = [];
  if (msg.review === "endorsed") {
    badges.push('<span class="badge badge-endorsed" title="endorsed by a TA">&#10003; TA endorsed</span>');
  }
  if (msg.review === "edited") {
    badges.push('<span class="badge badge-edited" title="edited by a TA">edited by TA</span>');
  }
  if (msg.system_notice) {
    badges.push('<span class="badge badge-notice">system</span>');
  }
  return badges.join(" ");
}

export function labelButtonsHtml(msg: ChatMessage, viewerId: string): string {
  if (msg.author_kind !== "ai" || msg.system_notice || !msg.labelable) return "";
  const mine = msg.student_labels[viewerId];
  const counts: Record<string, number> = {};
  for (const label of Object.values(msg.student_labels)) {
    counts[label] = (counts[label] ?? 0) + 1;
  }
  const buttons = FEEDBACK_LABELS.map((label) => {
    const active = mine === label ? " active" : "";
    const count = counts[label] ? ` (${counts[label]})` : "";
    return (
      `<button class="label-btn${active}" data-label="${label}" ` +
      `data-message="${escapeHtml(msg.message_id)}">${LABEL_TEXT[label]}${count}</button>`
    );
  });
  return `<div class="label-row">${buttons.join("")}</div>`;
}

export function reviewControlsHtml(msg: ChatMessage): string {
  if (msg.author_kind !== "ai" || msg.system_notice) return "";
  const can = {
    read: msg.review === "unreviewed",
    endorse: msg.review === "unreviewed" || msg.review === "read",
    edit: msg.review !== "edited",
  };
  const mid = escapeHtml(msg.message_id);
  const btn = (action: string, enabled: boolean) =>
    `<button class="review-btn" data-action="${action}" data-message="${mid}"` +
    (enabled ? "" : " disabled") +
    `>${action}</button>`;
  return (
    `<div class="review-row" data-state="${msg.review}">` +
    btn("read", can.read) +
    btn("endorse", can.endorse) +
    btn("edit", can.edit) +
    `</div>`
  );
}

export function chatMessageHtml(
  msg: ChatMessage,
  members: { participant_id: string; display_name: string }[],
  opts: ChatRenderOptions,
): string {
  const classes = ["chat-msg", `from-${msg.author_kind}`];
  if (msg.system_notice) classes.push("notice");
  const labels = opts.withLabelButtons ? labelButtonsHtml(msg, opts.viewerId) : "";
  const review = opts.withReviewControls ? reviewControlsHtml(msg) : "";
  return (
    `<div class="${classes.join(" ")}" data-message="${escapeHtml(msg.message_id)}">` +
    `<div class="chat-head"><span class="author">${escapeHtml(
      authorName(msg, members),
    )}</span> ${badgesHtml(msg)}</div>` +
    `<div class="chat-body">${escapeHtml(msg.body)}</div>` +
    labels +
    review +
    `</div>`
  );
}

export function graderResultHtml(result: GraderResult | null): string {
  if (!result) return '<p class="muted">No checks run yet.</p>';
  const rows = result.outcomes.map((o) => {
    const detail = o.detail
      ? `<pre class="grader-detail">${escapeHtml(o.detail)}</pre>`
      : "";
    return (
      `<div class="grader-row status-${o.status}">` +
      `<span class="test-id">${escapeHtml(o.test_id)}</span>` +
      `<span class="status">${o.status}</span>${detail}</div>`
    );
  });
  const overall = result.overall_pass
    ? '<span class="overall pass">all tests passed</span>'
    : '<span class="overall fail">tests failing</span>';
  return `<div class="grader-result">${overall}${rows.join("")}</div>`;
}

export function roomRowHtml(room: RoomSummary): string {
  const unread =
    room.unreviewed_count > 0
      ? `<span class="badge badge-unread">${room.unreviewed_count}</span>`
      : "";
  const grader =
    room.last_grader_pass === null ? "" : room.last_grader_pass ? " &#10003;" : " &#10007;";
  return (
    `<li class="room-row" data-room="${escapeHtml(room.room_id)}">` +
    `<span class="room-name">Group ${room.group_number}</span>` +
    `<span class="room-meta">${room.member_count} members · ${escapeHtml(
      room.selected_problem,
    )}${grader}</span>` +
    unread +
    `</li>`
  );
}
