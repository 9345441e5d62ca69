import { parseServerMessage, ServerMsg } from "./protocol.js";

/**
 * WebSocket link to the gateway with a flat 2 s reconnect. Decoded messages
 * go to the callback; everything unparseable is dropped here so downstream
 * code only ever sees well-formed traffic.
 */
export class GatewayClient {
  private ws: WebSocket | null = null;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private shutdown = false;

  constructor(
    private url: string,
    private onMessage: (msg: ServerMsg) => void,
    private onLink: (up: boolean) => void,
  ) {}

  get connected(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }

  connect(): void {
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      console.log(`gateway link up (${this.url})`);
      this.onLink(true);
    };
    this.ws.onmessage = (ev) => {
      const msg = parseServerMessage(String(ev.data));
      if (msg) {
        this.onMessage(msg);
      }
    };
    this.ws.onclose = () => {
      this.onLink(false);
      this.ws = null;
      if (!this.shutdown) {
        this.retryTimer = setTimeout(() => this.connect(), 2000);
      }
    };
    this.ws.onerror = () => {
      // onclose follows; nothing to do here
    };
  }

  send(line: string): void {
    if (this.connected) {
      this.ws!.send(line);
    }
  }

  close(): void {
    this.shutdown = true;
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
    }
    this.ws?.close();
  }
}
