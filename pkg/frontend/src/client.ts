/**
 * Thin WebSocket wrapper: NDJSON in, schema-checked messages out.
 */

import { ClientMessage, encodeClientMessage, parseServerLine, ServerMessage } from "./protocol.js";

export class SessionClient {
  private ws: WebSocket;
  private commandCounter = 0;

  constructor(
    url: string,
    private onMessage: (msg: ServerMessage) => void,
    private onClose: () => void,
  ) {
    this.ws = new WebSocket(url);
    this.ws.onmessage = (ev: MessageEvent) => {
      for (const line of String(ev.data).split("\n")) {
        if (!line.trim()) continue;
        this.onMessage(parseServerLine(line));
      }
    };
    this.ws.onclose = () => this.onClose();
    this.ws.onerror = () => this.onClose();
  }

  send(msg: ClientMessage) {
    if (this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(encodeClientMessage(msg));
    }
  }

  /** Pipeline several messages in one WebSocket frame (one step boundary). */
  sendBatch(msgs: ClientMessage[]) {
    if (this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(msgs.map(encodeClientMessage).join(""));
    }
  }

  nextCommandId(): string {
    this.commandCounter += 1;
    return `ui-${this.commandCounter}`;
  }

  close() {
    this.ws.close();
  }
}

export function sessionUrl(): string {
  const url = new URL("/session", window.location.href);
  url.protocol = url.protocol.replace("http", "ws");
  return url.href;
}
