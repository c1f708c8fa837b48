// Websocket client with reconnect and a small offline command queue.
//
// Send is strictly one frame per call; while disconnected up to
// QUEUE_LIMIT frames are held and flushed in order on reconnect, anything
// beyond that is refused so a dead link can never burst stale commands.

import { parseServerFrame, type ServerFrame } from "./protocol.js";
import type { ConnectionStatus } from "./model.js";

export const QUEUE_LIMIT = 10;
const BASE_BACKOFF_MS = 500;
const MAX_BACKOFF_MS = 8000;

/** The subset of the browser WebSocket API the client relies on. */
export interface SocketLike {
  readyState: number;
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketCtor = new (url: string) => SocketLike;

const OPEN = 1; // WebSocket.OPEN, spelled out so tests need no DOM global

export interface GatewayClientHooks {
  onFrame: (frame: ServerFrame) => void;
  onStatus?: (status: ConnectionStatus) => void;
}

export class GatewayClient {
  sentCount = 0;
  refusedCount = 0;

  private ws: SocketLike | null = null;
  private queue: string[] = [];
  private attempts = 0;
  private closed = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private url: string,
    private hooks: GatewayClientHooks,
    private makeSocket: SocketCtor = (globalThis as { WebSocket: SocketCtor })
      .WebSocket,
  ) {}

  connect(): void {
    if (this.closed) return;
    this.setStatus("connecting");
    const ws = new this.makeSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.attempts = 0;
      this.setStatus("connected");
      this.flushQueue();
    };
    ws.onmessage = (ev) => {
      if (typeof ev.data !== "string") return;
      const frame = parseServerFrame(ev.data);
      if (frame !== null) this.hooks.onFrame(frame);
    };
    ws.onclose = () => {
      this.ws = null;
      this.setStatus("closed");
      this.scheduleReconnect();
    };
    ws.onerror = () => {
      // close always follows; reconnect is handled there
    };
  }

  /**
   * Send one frame.  Returns true when it went out or was queued; false
   * when the offline queue is full and the frame was refused.
   */
  send(text: string): boolean {
    if (this.ws !== null && this.ws.readyState === OPEN) {
      this.ws.send(text);
      this.sentCount += 1;
      return true;
    }
    if (this.queue.length >= QUEUE_LIMIT) {
      this.refusedCount += 1;
      return false;
    }
    this.queue.push(text);
    return true;
  }

  queuedCount(): number {
    return this.queue.length;
  }

  /** Stop for good: no reconnect after an intentional close. */
  close(): void {
    this.closed = true;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.ws?.close();
    this.ws = null;
  }

  /** Exponential backoff delay for the next reconnect attempt. */
  backoffMs(): number {
    return Math.min(BASE_BACKOFF_MS * 2 ** this.attempts, MAX_BACKOFF_MS);
  }

  private flushQueue(): void {
    const pending = this.queue;
    this.queue = [];
    for (const text of pending) {
      if (this.ws === null || this.ws.readyState !== OPEN) {
        // Link died mid-flush; keep the rest for the next round.
        this.queue.push(text);
        continue;
      }
      this.ws.send(text);
      this.sentCount += 1;
    }
  }

  private scheduleReconnect(): void {
    if (this.closed || this.reconnectTimer !== null) return;
    const delay = this.backoffMs();
    this.attempts += 1;
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      this.connect();
    }, delay);
  }

  private setStatus(status: ConnectionStatus): void {
    this.hooks.onStatus?.(status);
  }
}
