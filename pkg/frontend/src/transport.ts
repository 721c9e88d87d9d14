/**
 * Byte-stream transports.  The session layer only needs an ordered,
 * reliable chunk stream; framing lives in the protocol module.
 */

export interface Transport {
  send(bytes: Uint8Array): void;
  close(): void;
  onData(handler: (chunk: Uint8Array) => void): void;
  onClose(handler: () => void): void;
}

/**
 * In-process transport for tests: two endpoints wired back to back.
 * Delivery is synchronous, so a test can assert right after send().
 */
export class LoopbackTransport implements Transport {
  private peer: LoopbackTransport | null = null;
  private dataHandler: ((chunk: Uint8Array) => void) | null = null;
  private closeHandler: (() => void) | null = null;
  private closed = false;

  static pair(): [LoopbackTransport, LoopbackTransport] {
    const a = new LoopbackTransport();
    const b = new LoopbackTransport();
    a.peer = b;
    b.peer = a;
    return [a, b];
  }

  send(bytes: Uint8Array): void {
    if (this.closed) {
      throw new Error("transport is closed");
    }
    const handler = this.peer?.dataHandler;
    if (handler) {
      // Copy so later mutation of the source buffer cannot corrupt the peer.
      handler(bytes.slice());
    }
  }

  close(): void {
    if (this.closed) {
      return;
    }
    this.closed = true;
    this.closeHandler?.();
    this.peer?.notifyPeerClosed();
  }

  private notifyPeerClosed(): void {
    if (!this.closed) {
      this.closed = true;
      this.closeHandler?.();
    }
  }

  onData(handler: (chunk: Uint8Array) => void): void {
    this.dataHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }
}
