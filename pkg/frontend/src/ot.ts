// Client-side operational transformation.
//
// Mirrors the server's transform rules exactly: insert ties at the same
// position break by lexicographic client id; an insert strictly inside
// a concurrently deleted span is dropped (length-0 no-op); a delete
// widens over text concurrently inserted strictly inside its span;
// overlapping deletes truncate to the surviving span.
//
// The client keeps at most one op on the wire (stop-and-wait): local
// edits apply to the view immediately and queue, and both the in-flight
// op and the queue are rebased against every foreign broadcast, so the
// op sent next always matches the server version it names.

export interface Op {
  clientId: string;
  clientSeq: number;
  problemId: string;
  blankId: string;
  kind: "insert" | "delete";
  position: number;
  text: string;
  length: number;
  baseVersion: number;
}

export function isNoop(op: Op): boolean {
  return (op.kind === "insert" && op.text === "") || (op.kind === "delete" && op.length === 0);
}

export function transform(op: Op, against: Op): Op {
  if (op.blankId !== against.blankId || isNoop(against)) return op;

  if (op.kind === "insert") {
    const p = op.position;
    if (against.kind === "insert") {
      const q = against.position;
      if (q < p || (q === p && against.clientId < op.clientId)) {
        return { ...op, position: p + against.text.length };
      }
      return op;
    }
    const q = against.position;
    const n = against.length;
    if (p <= q) return op;
    if (p >= q + n) return { ...op, position: p - n };
    return { ...op, kind: "insert", position: q, text: "", length: 0 };
  }

  const p = op.position;
  const n = op.length;
  if (against.kind === "insert") {
    const q = against.position;
    const t = against.text.length;
    if (q <= p) return { ...op, position: p + t };
    if (q >= p + n) return op;
    return { ...op, length: n + t };
  }

  const q = against.position;
  const m = against.length;
  if (q + m <= p) return { ...op, position: p - m };
  if (q >= p + n) return op;
  const overlap = Math.min(p + n, q + m) - Math.max(p, q);
  const remaining = n - overlap;
  const newPos = p < q ? p : q;
  if (remaining === 0) return { ...op, kind: "insert", position: newPos, text: "", length: 0 };
  return { ...op, position: newPos, length: remaining };
}

export function applyOp(text: string, op: Op): string {
  if (op.kind === "insert") {
    if (op.position < 0 || op.position > text.length) {
      throw new Error(`insert at ${op.position} outside text of length ${text.length}`);
    }
    return text.slice(0, op.position) + op.text + text.slice(op.position);
  }
  if (op.position < 0 || op.position + op.length > text.length) {
    throw new Error(`delete outside text of length ${text.length}`);
  }
  return text.slice(0, op.position) + text.slice(op.position + op.length);
}

/**
 * Turn a textarea change into ops: common prefix/suffix are untouched,
 * the differing middle becomes delete+insert. Ordinary typing produces
 * exactly one op.
 */
export function diffOps(oldText: string, newText: string): Array<
  { kind: "insert"; position: number; text: string } | { kind: "delete"; position: number; length: number }
> {
  if (oldText === newText) return [];
  let prefix = 0;
  const maxPrefix = Math.min(oldText.length, newText.length);
  while (prefix < maxPrefix && oldText[prefix] === newText[prefix]) prefix++;
  let suffix = 0;
  while (
    suffix < Math.min(oldText.length, newText.length) - prefix &&
    oldText[oldText.length - 1 - suffix] === newText[newText.length - 1 - suffix]
  ) {
    suffix++;
  }
  const removed = oldText.length - prefix - suffix;
  const inserted = newText.slice(prefix, newText.length - suffix);
  const ops: ReturnType<typeof diffOps> = [];
  if (removed > 0) ops.push({ kind: "delete", position: prefix, length: removed });
  if (inserted.length > 0) ops.push({ kind: "insert", position: prefix, text: inserted });
  return ops;
}

export interface Broadcast {
  serverVersion: number;
  op: Op;
}

export class OTClient {
  readonly clientId: string;
  readonly problemId: string;
  syncedVersion: number;
  texts: Record<string, string>;
  private nextSeq = 1;
  private inFlight: Op | null = null;
  private queue: Op[] = [];

  constructor(
    clientId: string,
    problemId: string,
    serverVersion: number,
    texts: Record<string, string>,
  ) {
    this.clientId = clientId;
    this.problemId = problemId;
    this.syncedVersion = serverVersion;
    this.texts = { ...texts };
  }

  get pendingCount(): number {
    return this.queue.length + (this.inFlight ? 1 : 0);
  }

  private makeOp(blankId: string, kind: "insert" | "delete", position: number, text: string, length: number): void {
    const op: Op = {
      clientId: this.clientId,
      clientSeq: 0,
      problemId: this.problemId,
      blankId,
      kind,
      position,
      text,
      length,
      baseVersion: 0,
    };
    this.texts[blankId] = applyOp(this.texts[blankId], op);
    this.queue.push(op);
  }

  localInsert(blankId: string, position: number, text: string): void {
    if (!text) throw new Error("insert text must be non-empty");
    this.makeOp(blankId, "insert", position, text, 0);
  }

  localDelete(blankId: string, position: number, length: number): void {
    if (length < 1) throw new Error("delete length must be >= 1");
    this.makeOp(blankId, "delete", position, "", length);
  }

  /** Apply a textarea change for one blank. */
  localChange(blankId: string, newText: string): void {
    for (const d of diffOps(this.texts[blankId], newText)) {
      if (d.kind === "delete") this.localDelete(blankId, d.position, d.length);
      else this.localInsert(blankId, d.position, d.text);
    }
  }

  /** Next op to put on the wire, or null while one is in flight. */
  takeOp(): Op | null {
    if (this.inFlight) return null;
    while (this.queue.length) {
      const op = this.queue.shift()!;
      if (isNoop(op)) continue;
      const stamped = { ...op, clientSeq: this.nextSeq++, baseVersion: this.syncedVersion };
      this.inFlight = stamped;
      return stamped;
    }
    return null;
  }

  receive(b: Broadcast): void {
    if (b.serverVersion !== this.syncedVersion + 1) {
      throw new Error(`broadcast ${b.serverVersion} out of order (synced ${this.syncedVersion})`);
    }
    if (b.op.clientId === this.clientId) {
      if (!this.inFlight || this.inFlight.clientSeq !== b.op.clientSeq) {
        throw new Error(`unexpected ack for seq ${b.op.clientSeq}`);
      }
      this.inFlight = null;
    } else {
      let t = b.op;
      if (this.inFlight) {
        const rebased = transform(this.inFlight, t);
        t = transform(t, this.inFlight);
        this.inFlight = { ...rebased, baseVersion: this.syncedVersion + 1 };
      }
      for (let i = 0; i < this.queue.length; i++) {
        const q = this.queue[i];
        this.queue[i] = transform(q, t);
        t = transform(t, q);
      }
      this.texts[t.blankId] = applyOp(this.texts[t.blankId], t);
    }
    this.syncedVersion = b.serverVersion;
  }

  /** Hard resync from a server snapshot; drops unacknowledged work. */
  resync(serverVersion: number, texts: Record<string, string>): void {
    this.syncedVersion = serverVersion;
    this.texts = { ...texts };
    this.inFlight = null;
    this.queue = [];
  }
}
