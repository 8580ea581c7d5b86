import { describe, expect, it } from "vitest";

import { frame, type ChatMessage, type RoomStateBody } from "../src/protocol.js";
import { RoomListStore, RoomStore } from "../src/state.js";

function snapshot(): RoomStateBody {
  return {
    room_id: "room-001",
    group_number: 1,
    worksheet_id: "ws-demo",
    selected_problem: "sum-twice",
    members: [
      { participant_id: "u-1", role: "student", display_name: "Ada" },
      { participant_id: "u-2", role: "student", display_name: "Ben" },
    ],
    docs: {
      "sum-twice": { server_version: 2, texts: { value: "3", again: "" } },
    },
    ai_chat: [],
    ta_chat: [],
    grader_history: [],
    unreviewed_count: 0,
  };
}

function aiMessage(id: string, over: Partial<ChatMessage> = {}): ChatMessage {
  return {
    message_id: id,
    channel: "ai_tutor",
    author_kind: "ai",
    author_id: null,
    body: "try tracing the loop",
    created_at: 1000,
    student_labels: {},
    review: "unreviewed",
    revisions: [],
    system_notice: false,
    labelable: true,
    ...over,
  };
}

describe("RoomStore", () => {
  it("loads a snapshot and notifies subscribers", () => {
    const store = new RoomStore();
    let called = 0;
    store.subscribe(() => called++);
    store.loadSnapshot(snapshot());
    expect(store.roomId).toBe("room-001");
    expect(store.worksheetId).toBe("ws-demo");
    expect(store.docs["sum-twice"].server_version).toBe(2);
    expect(called).toBe(1);
  });

  it("reduces chat messages and tracks the unreviewed count", () => {
    const store = new RoomStore();
    store.loadSnapshot(snapshot());
    store.applyFrame(frame("chat_message", { room_id: "room-001", message: aiMessage("m1") }));
    expect(store.aiChat).toHaveLength(1);
    expect(store.unreviewedCount).toBe(1);
    store.applyFrame(
      frame("chat_message", {
        room_id: "room-001",
        message: aiMessage("m2", { channel: "ta_chat", author_kind: "ta", author_id: "u-9" }),
      }),
    );
    expect(store.taChat).toHaveLength(1);
    expect(store.unreviewedCount).toBe(1);
  });

  it("a TA endorse updates the message in place (badge state)", () => {
    const store = new RoomStore();
    store.loadSnapshot(snapshot());
    store.applyFrame(frame("chat_message", { message: aiMessage("m1") }));
    store.applyFrame(
      frame("message_updated", { message: aiMessage("m1", { review: "endorsed" }) }),
    );
    expect(store.aiChat[0].review).toBe("endorsed");
    expect(store.unreviewedCount).toBe(0);
  });

  it("a TA edit replaces the body students see and keeps revisions", () => {
    const store = new RoomStore(); // this store is a student's view
    store.loadSnapshot(snapshot());
    store.applyFrame(frame("chat_message", { message: aiMessage("m1") }));
    store.applyFrame(
      frame("message_updated", {
        message: aiMessage("m1", {
          review: "edited",
          body: "corrected hint",
          revisions: ["try tracing the loop"],
        }),
        edited_by_ta: true,
      }),
    );
    const msg = store.findMessage("m1")!;
    expect(msg.body).toBe("corrected hint");
    expect(msg.review).toBe("edited");
    expect(msg.revisions).toEqual(["try tracing the loop"]);
  });

  it("stores student labels from message_updated", () => {
    const store = new RoomStore();
    store.loadSnapshot(snapshot());
    store.applyFrame(frame("chat_message", { message: aiMessage("m1") }));
    store.applyFrame(
      frame("message_updated", {
        message: aiMessage("m1", { student_labels: { "u-1": "helpful" } }),
      }),
    );
    expect(store.aiChat[0].student_labels["u-1"]).toBe("helpful");
  });

  it("tracks grader results per problem", () => {
    const store = new RoomStore();
    store.loadSnapshot(snapshot());
    store.applyFrame(
      frame("grader_result", {
        result: {
          result_id: "g1",
          problem_id: "sum-twice",
          outcomes: [{ test_id: "t1", status: "pass", detail: "" }],
          overall_pass: true,
          ran_at: 5,
        },
      }),
    );
    expect(store.latestGraderResult("sum-twice")?.overall_pass).toBe(true);
    expect(store.latestGraderResult("greeting")).toBeNull();
  });

  it("problem_selected switches the selection", () => {
    const store = new RoomStore();
    store.loadSnapshot(snapshot());
    store.applyFrame(frame("problem_selected", { problem_id: "greeting" }));
    expect(store.selectedProblem).toBe("greeting");
  });

  it("reloading the same snapshot reproduces identical state", () => {
    const a = new RoomStore();
    const b = new RoomStore();
    a.loadSnapshot(snapshot());
    a.applyFrame(frame("chat_message", { message: aiMessage("m1") }));
    // b joins later and receives the post-change snapshot instead
    const later = snapshot();
    later.ai_chat = [aiMessage("m1")];
    later.unreviewed_count = 1;
    b.loadSnapshot(later);
    expect(b.aiChat).toEqual(a.aiChat);
    expect(b.unreviewedCount).toBe(a.unreviewedCount);
  });
});

describe("RoomListStore", () => {
  const summary = (room_id: string, unread: number, activity: number) => ({
    room_id,
    group_number: 1,
    unreviewed_count: unread,
    selected_problem: "p",
    member_count: 3,
    last_activity: activity,
    last_grader_pass: null,
  });

  it("accepts a well-ordered list", () => {
    const store = new RoomListStore();
    store.update([
      summary("room-002", 2, 50),
      summary("room-003", 1, 50),
      summary("room-001", 0, 900),
    ]);
    expect(store.isWellOrdered()).toBe(true);
  });

  it("flags a list that buries unread rooms", () => {
    const store = new RoomListStore();
    store.update([summary("room-001", 0, 900), summary("room-002", 2, 50)]);
    expect(store.isWellOrdered()).toBe(false);
  });
});
