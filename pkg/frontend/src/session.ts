/**
 * Console session state machine.
 *
 * Speaks the framed wire protocol over any Transport and mirrors the
 * service's view of the rollout: phase, mode, counters, and the pending
 * intervention request.  The handshake is strict: the console sends
 * `hello` and the first inbound message must be `resync` (an `error`
 * frame instead means the connection was rejected).
 *
 * Submission discipline: at most one action is sent per intervention
 * request.  After a submit the controls stay locked until the service
 * sends the next `request_intervention` or `mode_update`.
 */

import {
  checkServiceMessage,
  encodeFrame,
  FrameParser,
  hello,
  humanAction,
} from "./protocol.js";
import type {
  Counters,
  ErrorMessage,
  Mode,
  ModeUpdateMessage,
  Phase,
  RequestInterventionMessage,
  ResyncMessage,
  Scene,
  Thresholds,
} from "./protocol.js";
import type { Transport } from "./transport.js";

export type ConnectionPhase = "connecting" | Phase | "disconnected";

export interface SubmitResult {
  accepted: boolean;
  reason?: string;
}

export interface SessionView {
  connection: ConnectionPhase;
  session: string | null;
  mode: Mode;
  episode: number;
  t: number;
  state: number[] | null;
  scene: Scene | null;
  counters: Counters;
  thresholds: Thresholds | null;
  aLow: number[];
  aHigh: number[];
  pending: RequestInterventionMessage | null;
  /** Timestamp (ms) when the pending request arrived; drives the latency timer. */
  requestReceivedAt: number | null;
  /** True once an action was sent for the current request. */
  awaitingAck: boolean;
  /** Recently observed states, oldest first. */
  trail: number[][];
  lastError: { code: string; message: string } | null;
  episodeEnded: boolean;
}

export interface SessionOptions {
  token: string;
  consoleName?: string;
  now?: () => number;
}

const TRAIL_LIMIT = 400;

export class ConsoleSession {
  readonly view: SessionView;

  private readonly parser = new FrameParser();
  private readonly now: () => number;
  private readonly token: string;
  private readonly consoleName: string;
  private sawResync = false;
  private changeHandlers: (() => void)[] = [];
  private attentionHandlers: (() => void)[] = [];

  constructor(
    private readonly transport: Transport,
    options: SessionOptions,
  ) {
    this.token = options.token;
    this.consoleName = options.consoleName ?? "console";
    this.now = options.now ?? Date.now;
    this.view = {
      connection: "connecting",
      session: null,
      mode: "autonomous",
      episode: 0,
      t: 0,
      state: null,
      scene: null,
      counters: { switches: 0, supervisor_actions: 0 },
      thresholds: null,
      aLow: [],
      aHigh: [],
      pending: null,
      requestReceivedAt: null,
      awaitingAck: false,
      trail: [],
      lastError: null,
      episodeEnded: false,
    };
    transport.onData((chunk) => this.receive(chunk));
    transport.onClose(() => {
      this.view.connection = "disconnected";
      this.emitChange();
    });
  }

  /** Register a listener fired after every state change. */
  onChange(handler: () => void): void {
    this.changeHandlers.push(handler);
  }

  /** Register a listener fired when a new intervention request arrives. */
  onAttention(handler: () => void): void {
    this.attentionHandlers.push(handler);
  }

  /** Send the hello handshake.  The reply must be a resync. */
  start(): void {
    this.transport.send(encodeFrame(hello(this.token, this.consoleName)));
  }

  /** Whether the operator may submit an action right now. */
  canSubmit(): boolean {
    return this.view.pending !== null && !this.view.awaitingAck;
  }

  /** Milliseconds the current request has been waiting, or null. */
  requestLatencyMs(): number | null {
    if (this.view.requestReceivedAt === null) {
      return null;
    }
    return this.now() - this.view.requestReceivedAt;
  }

  /**
   * Submit an action for the pending request.  The action is clipped to
   * the advertised bounds and tagged with the request's step index; a
   * second submission for the same request is refused locally and
   * nothing reaches the wire.
   */
  submitAction(action: readonly number[]): SubmitResult {
    const pending = this.view.pending;
    if (pending === null) {
      return { accepted: false, reason: "no outstanding request" };
    }
    if (this.view.awaitingAck) {
      return { accepted: false, reason: "already submitted for this request" };
    }
    if (this.view.aLow.length > 0 && action.length !== this.view.aLow.length) {
      return {
        accepted: false,
        reason: `expected ${this.view.aLow.length} action dims, got ${action.length}`,
      };
    }
    const clipped = action.map((a, i) => {
      const lo = this.view.aLow[i] ?? -Infinity;
      const hi = this.view.aHigh[i] ?? Infinity;
      return Math.min(hi, Math.max(lo, a));
    });
    const session = this.view.session ?? pending.session;
    this.transport.send(encodeFrame(humanAction(session, pending.t, clipped)));
    this.view.awaitingAck = true;
    this.emitChange();
    return { accepted: true };
  }

  close(): void {
    this.transport.close();
  }

  private receive(chunk: Uint8Array): void {
    for (const raw of this.parser.feed(chunk)) {
      this.handle(checkServiceMessage(raw));
    }
  }

  private handle(message: ReturnType<typeof checkServiceMessage>): void {
    if (!this.sawResync && message.type !== "resync" && message.type !== "error") {
      throw new Error(`expected resync first, got ${message.type}`);
    }
    switch (message.type) {
      case "resync":
        this.handleResync(message);
        break;
      case "request_intervention":
        this.handleRequest(message);
        break;
      case "mode_update":
        this.handleModeUpdate(message);
        break;
      case "error":
        this.handleError(message);
        break;
    }
    this.emitChange();
  }

  private handleResync(message: ResyncMessage): void {
    this.sawResync = true;
    this.view.connection = message.phase;
    this.view.session = message.session;
    this.view.mode = message.mode;
    this.view.episode = message.episode;
    this.view.t = message.t;
    this.view.state = message.state;
    this.view.scene = message.scene;
    this.view.counters = { ...message.counters };
    this.view.thresholds = message.thresholds;
    this.view.aLow = [...message.a_low];
    this.view.aHigh = [...message.a_high];
    this.view.pending = message.pending;
    this.view.awaitingAck = false;
    this.view.episodeEnded = false;
    this.view.trail = [];
    if (message.state !== null) {
      this.pushTrail(message.state);
    }
    if (message.pending !== null) {
      this.view.requestReceivedAt = this.now();
      this.emitAttention();
    } else {
      this.view.requestReceivedAt = null;
    }
  }

  private handleRequest(message: RequestInterventionMessage): void {
    this.view.connection = "awaiting_human";
    this.view.session = message.session;
    this.view.episode = message.episode;
    this.view.t = message.t;
    this.view.state = message.state;
    this.view.scene = message.scene;
    if (message.thresholds !== null) {
      this.view.thresholds = message.thresholds;
    }
    this.view.pending = message;
    this.view.awaitingAck = false;
    this.view.requestReceivedAt = this.now();
    this.view.episodeEnded = false;
    this.pushTrail(message.state);
    this.emitAttention();
  }

  private handleModeUpdate(message: ModeUpdateMessage): void {
    this.view.connection = "autonomous_streaming";
    this.view.session = message.session;
    this.view.mode = message.mode;
    this.view.episode = message.episode;
    this.view.t = message.t;
    this.view.counters = { ...message.counters };
    this.view.pending = null;
    this.view.awaitingAck = false;
    this.view.requestReceivedAt = null;
    this.view.episodeEnded = message.episode_end;
    if (message.episode_end) {
      this.view.trail = [];
    }
  }

  private handleError(message: ErrorMessage): void {
    this.view.lastError = { code: message.code, message: message.message };
    if (!this.sawResync) {
      // Handshake rejection: the service drops the connection after this.
      this.view.connection = "disconnected";
      return;
    }
    if (message.code === "no_pending" || message.code === "timeout") {
      this.view.pending = null;
      this.view.awaitingAck = false;
      this.view.requestReceivedAt = null;
    } else if (message.code === "stale_t" || message.code === "bad_action") {
      // The submission was refused; unlock so the operator can retry
      // once the service re-sends the current request.
      this.view.awaitingAck = false;
    }
  }

  private pushTrail(state: number[]): void {
    this.view.trail.push([...state]);
    if (this.view.trail.length > TRAIL_LIMIT) {
      this.view.trail.splice(0, this.view.trail.length - TRAIL_LIMIT);
    }
  }

  private emitChange(): void {
    for (const handler of this.changeHandlers) {
      handler();
    }
  }

  private emitAttention(): void {
    for (const handler of this.attentionHandlers) {
      handler();
    }
  }
}
