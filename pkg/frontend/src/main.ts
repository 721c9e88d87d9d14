/**
 * Browser entry point: wires transport, session, renderer, and the
 * pointer/drag controls together.  Connection parameters come from the
 * form (or ?ws=...&token=... query params).
 */

import { ConsoleSession } from "./session.js";
import { drawFrame, sceneTransformFor } from "./render.js";
import { dragToAction } from "./scene.js";
import type { DragResult } from "./scene.js";
import { WebSocketTransport } from "./transportBrowser.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const canvas = el<HTMLCanvasElement>("scene");
const ctx = canvas.getContext("2d")!;
const statusLine = el<HTMLElement>("status");
const counterSwitches = el<HTMLElement>("counter-switches");
const counterActions = el<HTMLElement>("counter-actions");
const modeBadge = el<HTMLElement>("mode-badge");
const latencyLine = el<HTMLElement>("latency");
const magnitudeBar = el<HTMLElement>("magnitude-fill");
const showRobotToggle = el<HTMLInputElement>("show-robot");
const wsInput = el<HTMLInputElement>("ws-url");
const tokenInput = el<HTMLInputElement>("token");
const connectButton = el<HTMLButtonElement>("connect");

const params = new URLSearchParams(window.location.search);
wsInput.value = params.get("ws") ?? "ws://127.0.0.1:7790";
tokenInput.value = params.get("token") ?? "local";

let session: ConsoleSession | null = null;
let preview: DragResult | null = null;
let dragStart: [number, number] | null = null;
let attentionAt: number | null = null;
let audio: AudioContext | null = null;

function ping(): void {
  // Short audible cue when the robot requests help.
  try {
    audio = audio ?? new AudioContext();
    const osc = audio.createOscillator();
    const gain = audio.createGain();
    osc.frequency.value = 880;
    gain.gain.setValueAtTime(0.12, audio.currentTime);
    gain.gain.exponentialRampToValueAtTime(1e-4, audio.currentTime + 0.25);
    osc.connect(gain).connect(audio.destination);
    osc.start();
    osc.stop(audio.currentTime + 0.25);
  } catch {
    // Audio is best-effort; some browsers refuse before user gesture.
  }
}

function redraw(): void {
  if (session === null) {
    return;
  }
  const view = session.view;
  drawFrame(ctx, view, {
    showRobotAction: showRobotToggle.checked,
    preview,
    nowMs: performance.now(),
    attentionAt,
  });

  counterSwitches.textContent = String(view.counters.switches);
  counterActions.textContent = String(view.counters.supervisor_actions);
  modeBadge.textContent = view.mode.toUpperCase();
  modeBadge.className = view.mode === "supervisor" ? "badge supervisor" : "badge autonomous";

  const latency = session.requestLatencyMs();
  latencyLine.textContent = latency === null ? "-" : `${(latency / 1000).toFixed(1)}s`;

  const saturation = preview === null ? 0 : Math.min(preview.saturation, 1.5);
  magnitudeBar.style.width = `${Math.min(saturation / 1.5, 1) * 100}%`;
  magnitudeBar.className = preview !== null && preview.clipped ? "fill clipped" : "fill";

  const err = view.lastError;
  statusLine.textContent =
    err !== null
      ? `${view.connection} [${err.code}: ${err.message}]`
      : view.connection + (session.canSubmit() ? " - drag to command" : "");
}

function animate(): void {
  redraw();
  requestAnimationFrame(animate);
}

async function connect(): Promise<void> {
  session?.close();
  preview = null;
  dragStart = null;
  const transport = await WebSocketTransport.connect(wsInput.value);
  session = new ConsoleSession(transport, { token: tokenInput.value });
  session.onChange(redraw);
  session.onAttention(() => {
    attentionAt = performance.now();
    ping();
  });
  session.start();
}

connectButton.addEventListener("click", () => {
  connect().catch((err) => {
    statusLine.textContent = `connect failed: ${err.message ?? err}`;
  });
});

canvas.addEventListener("pointerdown", (event) => {
  if (session === null || !session.canSubmit()) {
    return;
  }
  canvas.setPointerCapture(event.pointerId);
  dragStart = [event.offsetX, event.offsetY];
});

canvas.addEventListener("pointermove", (event) => {
  if (session === null || dragStart === null) {
    return;
  }
  const view = session.view;
  const tf = sceneTransformFor(view, canvas.width, canvas.height);
  if (tf === null) {
    return;
  }
  preview = dragToAction(
    dragStart,
    [event.offsetX, event.offsetY],
    tf,
    view.aLow,
    view.aHigh,
  );
});

canvas.addEventListener("pointerup", (event) => {
  if (session === null || dragStart === null) {
    dragStart = null;
    return;
  }
  const view = session.view;
  const tf = sceneTransformFor(view, canvas.width, canvas.height);
  if (tf !== null) {
    const result = dragToAction(
      dragStart,
      [event.offsetX, event.offsetY],
      tf,
      view.aLow,
      view.aHigh,
    );
    const outcome = session.submitAction(result.action);
    if (!outcome.accepted) {
      statusLine.textContent = `not sent: ${outcome.reason}`;
    }
  }
  dragStart = null;
  preview = null;
});

animate();
