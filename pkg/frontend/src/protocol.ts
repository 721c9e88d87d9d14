/**
 * Wire protocol shared with the intervention service.
 *
 * Framing: each message is a UTF-8 JSON object prefixed with a 4-byte
 * big-endian byte length.  Every message carries `type` and `protocol`
 * fields.  Outbound frames are serialized with sorted keys and compact
 * separators so they are byte-identical to the service's own encoder
 * (integral floats are the one divergence: the service writes `1.0`
 * where JSON.stringify writes `1`; both parse to the same value).
 */

export const PROTOCOL_VERSION = 1;
export const MAX_FRAME_BYTES = 1 << 20;

export type Mode = "autonomous" | "supervisor";
export type Phase = "idle" | "awaiting_human" | "autonomous_streaming";

export interface Counters {
  switches: number;
  supervisor_actions: number;
}

export interface Thresholds {
  tau_sup: number;
  tau_auto: number;
}

/** Static scene description; `view` is [[xmin, xmax], [ymin, ymax]]. */
export interface Scene {
  kind: string;
  view: [[number, number], [number, number]];
  [extra: string]: unknown;
}

export interface HelloMessage {
  type: "hello";
  protocol: number;
  token: string;
  console: string;
}

export interface HumanActionMessage {
  type: "human_action";
  protocol: number;
  session: string;
  t: number;
  action: number[];
}

export interface RequestInterventionMessage {
  type: "request_intervention";
  protocol: number;
  session: string;
  episode: number;
  t: number;
  state: number[];
  scene: Scene;
  robot_action: number[] | null;
  thresholds: Thresholds | null;
}

export interface ModeUpdateMessage {
  type: "mode_update";
  protocol: number;
  session: string;
  mode: Mode;
  episode: number;
  t: number;
  counters: Counters;
  executed: number[] | null;
  episode_end: boolean;
}

export interface ResyncMessage {
  type: "resync";
  protocol: number;
  session: string;
  phase: Phase;
  mode: Mode;
  episode: number;
  t: number;
  state: number[] | null;
  scene: Scene | null;
  counters: Counters;
  thresholds: Thresholds | null;
  a_low: number[];
  a_high: number[];
  pending: RequestInterventionMessage | null;
}

export type ErrorCode =
  | "bad_token"
  | "version_mismatch"
  | "busy"
  | "stale_t"
  | "no_pending"
  | "bad_action"
  | "timeout";

export interface ErrorMessage {
  type: "error";
  protocol: number;
  code: ErrorCode;
  message: string;
}

/** Everything the service may send to a console. */
export type ServiceMessage =
  | ResyncMessage
  | RequestInterventionMessage
  | ModeUpdateMessage
  | ErrorMessage;

const SERVICE_TYPES = new Set([
  "resync",
  "request_intervention",
  "mode_update",
  "error",
]);

export function hello(token: string, consoleName = "console"): HelloMessage {
  return {
    type: "hello",
    protocol: PROTOCOL_VERSION,
    token,
    console: consoleName,
  };
}

export function humanAction(
  session: string,
  t: number,
  action: readonly number[],
): HumanActionMessage {
  return {
    type: "human_action",
    protocol: PROTOCOL_VERSION,
    session,
    t,
    action: [...action],
  };
}

/** JSON.stringify with recursively sorted object keys, compact separators. */
export function stableStringify(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(stableStringify).join(",") + "]";
  }
  const record = value as Record<string, unknown>;
  const keys = Object.keys(record).sort();
  const parts = keys.map(
    (k) => JSON.stringify(k) + ":" + stableStringify(record[k]),
  );
  return "{" + parts.join(",") + "}";
}

export function encodeFrame(message: object): Uint8Array {
  const payload = new TextEncoder().encode(stableStringify(message));
  if (payload.byteLength > MAX_FRAME_BYTES) {
    throw new Error(`frame of ${payload.byteLength} bytes exceeds limit`);
  }
  const frame = new Uint8Array(4 + payload.byteLength);
  new DataView(frame.buffer).setUint32(0, payload.byteLength, false);
  frame.set(payload, 4);
  return frame;
}

/**
 * Incremental decoder for length-prefixed frames.  Feed raw socket chunks
 * in any fragmentation; complete messages come back in arrival order.
 */
export class FrameParser {
  private buffer = new Uint8Array(0);

  feed(chunk: Uint8Array): Record<string, unknown>[] {
    const merged = new Uint8Array(this.buffer.byteLength + chunk.byteLength);
    merged.set(this.buffer, 0);
    merged.set(chunk, this.buffer.byteLength);
    this.buffer = merged;

    const messages: Record<string, unknown>[] = [];
    for (;;) {
      if (this.buffer.byteLength < 4) {
        break;
      }
      const view = new DataView(
        this.buffer.buffer,
        this.buffer.byteOffset,
        this.buffer.byteLength,
      );
      const length = view.getUint32(0, false);
      if (length > MAX_FRAME_BYTES) {
        throw new Error(`frame of ${length} bytes exceeds limit`);
      }
      if (this.buffer.byteLength < 4 + length) {
        break;
      }
      const payload = this.buffer.subarray(4, 4 + length);
      this.buffer = this.buffer.slice(4 + length);
      const decoded = JSON.parse(new TextDecoder().decode(payload));
      if (decoded === null || typeof decoded !== "object" || Array.isArray(decoded)) {
        throw new Error("frame payload is not a JSON object");
      }
      messages.push(decoded as Record<string, unknown>);
    }
    return messages;
  }
}

/** Validate a decoded frame as a service-to-console message. */
export function checkServiceMessage(
  raw: Record<string, unknown>,
): ServiceMessage {
  const type = raw["type"];
  if (typeof type !== "string" || !SERVICE_TYPES.has(type)) {
    throw new Error(`unexpected message type ${JSON.stringify(type)}`);
  }
  if (raw["protocol"] !== PROTOCOL_VERSION) {
    throw new Error(`protocol mismatch: got ${raw["protocol"]}, speak ${PROTOCOL_VERSION}`);
  }
  return raw as unknown as ServiceMessage;
}
