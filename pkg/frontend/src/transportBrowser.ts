/**
 * WebSocket transport for the browser shell.
 *
 * Browsers cannot open raw TCP sockets, so the page speaks binary
 * WebSocket to a local relay that pipes bytes to the service's TCP
 * port unchanged, e.g.:
 *
 *   websocat --binary ws-l:127.0.0.1:7790 tcp:127.0.0.1:<service-port>
 */

import type { Transport } from "./transport.js";

export class WebSocketTransport implements Transport {
  private dataHandler: ((chunk: Uint8Array) => void) | null = null;
  private closeHandler: (() => void) | null = null;

  private constructor(private readonly socket: WebSocket) {
    socket.binaryType = "arraybuffer";
    socket.onmessage = (event: MessageEvent) => {
      if (event.data instanceof ArrayBuffer) {
        this.dataHandler?.(new Uint8Array(event.data));
      }
    };
    socket.onclose = () => {
      this.closeHandler?.();
    };
  }

  static connect(url: string): Promise<WebSocketTransport> {
    return new Promise((resolve, reject) => {
      const socket = new WebSocket(url);
      socket.onopen = () => resolve(new WebSocketTransport(socket));
      socket.onerror = () => reject(new Error(`websocket connect to ${url} failed`));
    });
  }

  send(bytes: Uint8Array): void {
    this.socket.send(bytes);
  }

  close(): void {
    this.socket.close();
  }

  onData(handler: (chunk: Uint8Array) => void): void {
    this.dataHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }
}
