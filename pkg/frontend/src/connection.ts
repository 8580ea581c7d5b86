// WebSocket wrapper: JSON frames in/out, automatic reconnect with
// backoff. Every reconnect yields a fresh welcome frame, which the app
// treats as a full resync (the UI holds no authoritative state).

import { encodeFrame, parseFrame, type Frame } from "./protocol.js";

export type ConnectionStatus = "connecting" | "open" | "closed";

export class Connection {
  private ws: WebSocket | null = null;
  private url: string;
  private attempts = 0;
  private stopped = false;

  onFrame: (f: Frame) => void = () => {};
  onStatus: (s: ConnectionStatus) => void = () => {};

  constructor(token: string) {
    const scheme = location.protocol === "https:" ? "wss" : "ws";
    this.url = `${scheme}://${location.host}/ws?token=${encodeURIComponent(token)}`;
  }

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    this.ws?.close();
  }

  private connect(): void {
    this.onStatus("connecting");
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.addEventListener("open", () => {
      this.attempts = 0;
      this.onStatus("open");
    });
    ws.addEventListener("message", (ev) => {
      this.onFrame(parseFrame(String(ev.data)));
    });
    ws.addEventListener("close", () => {
      this.onStatus("closed");
      if (!this.stopped) {
        const delay = Math.min(8000, 400 * 2 ** this.attempts++);
        setTimeout(() => this.connect(), delay);
      }
    });
  }

  send(f: Frame): boolean {
    if (!this.ws || this.ws.readyState !== WebSocket.OPEN) return false;
    this.ws.send(encodeFrame(f));
    return true;
  }
}
