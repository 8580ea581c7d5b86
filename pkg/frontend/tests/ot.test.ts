import { describe, expect, it } from "vitest";

import {
  applyOp,
  diffOps,
  isNoop,
  OTClient,
  transform,
  type Broadcast,
  type Op,
} from "../src/ot.js";

function ins(pos: number, text: string, client = "a", blank = "b1"): Op {
  return {
    clientId: client,
    clientSeq: 1,
    problemId: "p1",
    blankId: blank,
    kind: "insert",
    position: pos,
    text,
    length: 0,
    baseVersion: 0,
  };
}

function del(pos: number, length: number, client = "a", blank = "b1"): Op {
  return { ...ins(pos, "", client, blank), kind: "delete", length };
}

describe("transform", () => {
  it("shifts an insert past an earlier insert (server-order oracle)", () => {
    const a = ins(1, "X", "a");
    const b = ins(2, "Y", "b");
    const tb = transform(b, a);
    expect(applyOp(applyOp("abc", a), tb)).toBe("aXbYc");
  });

  it("breaks same-position ties by client id in both orders", () => {
    const lo = ins(1, "L", "a");
    const hi = ins(1, "H", "z");
    expect(applyOp(applyOp("xy", lo), transform(hi, lo))).toBe("xLHy");
    expect(applyOp(applyOp("xy", hi), transform(lo, hi))).toBe("xLHy");
  });

  it("ignores ops on other blanks", () => {
    const a = ins(1, "X", "a", "b1");
    const b = del(0, 2, "b", "b2");
    expect(transform(b, a)).toBe(b);
  });

  it("turns a fully-covered delete into a no-op", () => {
    const t = transform(del(0, 2, "b"), del(0, 2, "a"));
    expect(isNoop(t)).toBe(true);
  });

  it("converges for every concurrent pair (randomized both orders)", () => {
    // deterministic LCG so failures reproduce
    let seed = 12345;
    const rand = () => (seed = (seed * 1103515245 + 12345) % 2 ** 31) / 2 ** 31;
    for (let round = 0; round < 500; round++) {
      const text = "abcdef".slice(0, 1 + Math.floor(rand() * 6));
      const mk = (client: string): Op => {
        if (rand() < 0.5 || text.length === 0) {
          return ins(Math.floor(rand() * (text.length + 1)), "XY".slice(0, 1 + Math.floor(rand() * 2)), client);
        }
        const pos = Math.floor(rand() * text.length);
        return del(pos, 1 + Math.floor(rand() * (text.length - pos)), client);
      };
      const a = mk("a");
      const b = mk("b");
      const one = applyOp(applyOp(text, a), transform(b, a));
      const two = applyOp(applyOp(text, b), transform(a, b));
      expect(one).toBe(two);
    }
  });
});

describe("diffOps", () => {
  it("detects a plain insertion", () => {
    expect(diffOps("hello", "hello world")).toEqual([
      { kind: "insert", position: 5, text: " world" },
    ]);
  });

  it("detects a deletion", () => {
    expect(diffOps("hello world", "held")).toEqual([
      { kind: "delete", position: 3, length: 7 },
    ]);
  });

  it("replaces the differing middle", () => {
    expect(diffOps("aXXb", "aYb")).toEqual([
      { kind: "delete", position: 1, length: 2 },
      { kind: "insert", position: 1, text: "Y" },
    ]);
  });

  it("returns nothing for equal text", () => {
    expect(diffOps("same", "same")).toEqual([]);
  });

  it("round-trips arbitrary edits", () => {
    const cases: Array<[string, string]> = [
      ["", "abc"],
      ["abc", ""],
      ["abcdef", "abXYef"],
      ["aaa", "aaaa"],
      ["aaaa", "aaa"],
    ];
    for (const [oldText, newText] of cases) {
      let t = oldText;
      for (const d of diffOps(oldText, newText)) {
        t = applyOp(t, { ...ins(d.position, "text" in d ? d.text : ""), kind: d.kind, length: "length" in d ? d.length : 0 });
      }
      expect(t).toBe(newText);
    }
  });
});

/** In-test stand-in for the server's integrate loop: same transform
 * rules, same server-version bookkeeping. */
class MirrorServer {
  version = 0;
  applied: Op[] = [];
  texts: Record<string, string>;
  seen: Record<string, number> = {};

  constructor(texts: Record<string, string>) {
    this.texts = { ...texts };
  }

  integrate(op: Op): Broadcast | null {
    if (op.clientSeq <= (this.seen[op.clientId] ?? 0)) return null;
    let t = op;
    for (const c of this.applied.slice(op.baseVersion)) t = transform(t, c);
    this.texts[t.blankId] = applyOp(this.texts[t.blankId], t);
    this.version++;
    this.applied.push(t);
    this.seen[op.clientId] = op.clientSeq;
    return { serverVersion: this.version, op: t };
  }
}

describe("OTClient against a mirror server", () => {
  it("propagates a keystroke from one client to another", () => {
    const initial = { b1: "print " };
    const server = new MirrorServer(initial);
    const alice = new OTClient("alice", "p1", 0, initial);
    const bob = new OTClient("bob", "p1", 0, initial);

    alice.localChange("b1", "print 42");
    const op = alice.takeOp()!;
    const broadcast = server.integrate(op)!;
    alice.receive(broadcast);
    bob.receive(broadcast);

    expect(bob.texts["b1"]).toBe("print 42");
    expect(alice.texts).toEqual(server.texts);
  });

  it("converges under concurrent random edits with lagged delivery", () => {
    let seed = 777;
    const rand = () => (seed = (seed * 1103515245 + 12345) % 2 ** 31) / 2 ** 31;
    const initial = { b1: "seed", b2: "" };
    const server = new MirrorServer(initial);
    const clients = ["a", "b", "c"].map((id) => new OTClient(id, "p1", 0, initial));
    const inboxes = new Map(clients.map((c) => [c.clientId, [] as Broadcast[]]));
    const budgets = new Map(clients.map((c) => [c.clientId, 120]));

    const pump = (c: OTClient) => {
      const op = c.takeOp();
      if (op) {
        const b = server.integrate(op);
        if (b) for (const q of inboxes.values()) q.push(b);
      }
    };
    const busy = () =>
      [...budgets.values()].some((n) => n > 0) ||
      [...inboxes.values()].some((q) => q.length > 0) ||
      clients.some((c) => c.pendingCount > 0);

    while (busy()) {
      for (const c of clients) {
        const left = budgets.get(c.clientId)!;
        if (left > 0 && c.pendingCount < 2) {
          budgets.set(c.clientId, left - 1);
          const blank = rand() < 0.5 ? "b1" : "b2";
          const text = c.texts[blank];
          if (text.length > 0 && rand() < 0.4) {
            const pos = Math.floor(rand() * text.length);
            c.localDelete(blank, pos, 1 + Math.floor(rand() * Math.min(3, text.length - pos)));
          } else {
            c.localInsert(blank, Math.floor(rand() * (text.length + 1)), "xyz"[Math.floor(rand() * 3)]);
          }
        }
        pump(c);
        const q = inboxes.get(c.clientId)!;
        while (q.length > 0 && rand() < 0.6) {
          c.receive(q.shift()!);
          pump(c);
        }
      }
    }
    for (const c of clients) {
      expect(c.texts).toEqual(server.texts);
    }
  });

  it("resync drops local state and adopts the snapshot", () => {
    const client = new OTClient("a", "p1", 0, { b1: "old" });
    client.localChange("b1", "old stuff");
    client.resync(9, { b1: "fresh" });
    expect(client.texts["b1"]).toBe("fresh");
    expect(client.pendingCount).toBe(0);
    expect(client.syncedVersion).toBe(9);
  });
});
