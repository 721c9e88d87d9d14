/**
 * Canvas renderer for the console.  Pure drawing: reads the session
 * view plus UI state and paints one frame; no session mutation.
 */

import type { SessionView } from "./session.js";
import { SceneTransform } from "./scene.js";
import type { DragResult } from "./scene.js";

export interface RenderOptions {
  /** Show the robot's proposed action next to the agent (default off). */
  showRobotAction: boolean;
  /** Live drag preview, if the operator is mid-drag. */
  preview: DragResult | null;
  nowMs: number;
  /** Set at the moment a request arrives; drives the attention flash. */
  attentionAt: number | null;
}

const COLORS = {
  background: "#11151c",
  grid: "#1d2430",
  corridor: "rgba(86, 156, 214, 0.18)",
  corridorEdge: "rgba(86, 156, 214, 0.45)",
  startBox: "rgba(180, 180, 180, 0.35)",
  goal: "#3fb950",
  trail: "rgba(240, 246, 252, 0.35)",
  agentAuto: "#58a6ff",
  agentSup: "#f0883e",
  robotAction: "#8b949e",
  previewOk: "#3fb950",
  previewClipped: "#f85149",
  text: "#e6edf3",
  flash: "rgba(248, 81, 73, 0.25)",
};

const FLASH_MS = 900;

export function sceneTransformFor(
  view: SessionView,
  width: number,
  height: number,
): SceneTransform | null {
  if (view.scene === null) {
    return null;
  }
  return new SceneTransform(view.scene.view, { width, height, margin: 24 });
}

export function drawFrame(
  ctx: CanvasRenderingContext2D,
  view: SessionView,
  options: RenderOptions,
): void {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, width, height);

  const transform = sceneTransformFor(view, width, height);
  if (transform === null) {
    ctx.fillStyle = COLORS.text;
    ctx.font = "14px system-ui, sans-serif";
    ctx.fillText("waiting for scene...", 24, 32);
    return;
  }

  const scene = view.scene!;
  if (scene.kind === "pointgoal2d") {
    drawPointGoal(ctx, scene, transform);
  } else if (scene.kind === "linetrack1d") {
    drawLineTrack(ctx, scene, transform);
  }

  drawTrail(ctx, view, transform);
  drawAgent(ctx, view, transform, options);

  if (options.attentionAt !== null) {
    const age = options.nowMs - options.attentionAt;
    if (age >= 0 && age < FLASH_MS) {
      ctx.fillStyle = COLORS.flash;
      ctx.globalAlpha = 1 - age / FLASH_MS;
      ctx.fillRect(0, 0, width, height);
      ctx.globalAlpha = 1;
    }
  }
}

function drawPointGoal(
  ctx: CanvasRenderingContext2D,
  scene: Record<string, unknown>,
  tf: SceneTransform,
): void {
  const view = scene["view"] as [[number, number], [number, number]];
  const [[, ], [ymin, ymax]] = view;
  const corridor = scene["corridor_x"] as [number, number];
  const startBox = scene["start_box"] as [[number, number], [number, number]];
  const goal = scene["goal"] as [number, number];
  const goalRadius = scene["goal_radius"] as number;

  // Corridor band: the stiff-gain region the supervisor centers through.
  const [cx0, cy0] = tf.toPixel([corridor[0], ymax]);
  const [cx1, cy1] = tf.toPixel([corridor[1], ymin]);
  ctx.fillStyle = COLORS.corridor;
  ctx.fillRect(cx0, cy0, cx1 - cx0, cy1 - cy0);
  ctx.strokeStyle = COLORS.corridorEdge;
  ctx.strokeRect(cx0, cy0, cx1 - cx0, cy1 - cy0);

  const [sx0, sy0] = tf.toPixel([startBox[0][0], startBox[1][1]]);
  const [sx1, sy1] = tf.toPixel([startBox[0][1], startBox[1][0]]);
  ctx.strokeStyle = COLORS.startBox;
  ctx.setLineDash([4, 4]);
  ctx.strokeRect(sx0, sy0, sx1 - sx0, sy1 - sy0);
  ctx.setLineDash([]);

  const [gx, gy] = tf.toPixel(goal);
  ctx.beginPath();
  ctx.arc(gx, gy, tf.lengthToPixels(goalRadius), 0, 2 * Math.PI);
  ctx.fillStyle = COLORS.goal;
  ctx.globalAlpha = 0.6;
  ctx.fill();
  ctx.globalAlpha = 1;
  ctx.strokeStyle = COLORS.goal;
  ctx.stroke();
}

function drawLineTrack(
  ctx: CanvasRenderingContext2D,
  scene: Record<string, unknown>,
  tf: SceneTransform,
): void {
  const xRef = scene["x_ref"] as number;
  const tol = scene["tol"] as number;

  const [axL, axY] = tf.toPixel([-1.5, 0]);
  const [axR] = tf.toPixel([1.5, 0]);
  ctx.strokeStyle = COLORS.grid;
  ctx.beginPath();
  ctx.moveTo(axL, axY);
  ctx.lineTo(axR, axY);
  ctx.stroke();

  const [tolL, bandTop] = tf.toPixel([xRef - tol, 0.08]);
  const [tolR, bandBot] = tf.toPixel([xRef + tol, -0.08]);
  ctx.fillStyle = COLORS.corridor;
  ctx.fillRect(tolL, bandTop, tolR - tolL, bandBot - bandTop);

  const [rx, ry] = tf.toPixel([xRef, 0]);
  ctx.strokeStyle = COLORS.goal;
  ctx.beginPath();
  ctx.moveTo(rx, ry - 12);
  ctx.lineTo(rx, ry + 12);
  ctx.stroke();
}

function drawTrail(
  ctx: CanvasRenderingContext2D,
  view: SessionView,
  tf: SceneTransform,
): void {
  if (view.trail.length < 2) {
    return;
  }
  ctx.strokeStyle = COLORS.trail;
  ctx.beginPath();
  view.trail.forEach((state, i) => {
    const [px, py] = tf.toPixel([state[0] ?? 0, state[1] ?? 0]);
    if (i === 0) {
      ctx.moveTo(px, py);
    } else {
      ctx.lineTo(px, py);
    }
  });
  ctx.stroke();
}

function drawAgent(
  ctx: CanvasRenderingContext2D,
  view: SessionView,
  tf: SceneTransform,
  options: RenderOptions,
): void {
  if (view.state === null) {
    return;
  }
  const world: [number, number] = [view.state[0] ?? 0, view.state[1] ?? 0];
  const [px, py] = tf.toPixel(world);

  // Robot's proposed action, only when the operator opted in.
  const pending = view.pending;
  if (options.showRobotAction && pending !== null && pending.robot_action !== null) {
    drawArrow(ctx, tf, world, pending.robot_action, COLORS.robotAction, [5, 3]);
  }
  if (options.preview !== null) {
    const color = options.preview.clipped ? COLORS.previewClipped : COLORS.previewOk;
    drawArrow(ctx, tf, world, options.preview.action, color, null);
  }

  ctx.beginPath();
  ctx.arc(px, py, 7, 0, 2 * Math.PI);
  ctx.fillStyle = view.mode === "supervisor" ? COLORS.agentSup : COLORS.agentAuto;
  ctx.fill();
  ctx.strokeStyle = COLORS.text;
  ctx.stroke();
}

function drawArrow(
  ctx: CanvasRenderingContext2D,
  tf: SceneTransform,
  origin: [number, number],
  action: readonly number[],
  color: string,
  dash: number[] | null,
): void {
  // Arrows show the commanded velocity scaled for legibility.
  const ARROW_WORLD_PER_UNIT = 0.25;
  const dx = (action[0] ?? 0) * ARROW_WORLD_PER_UNIT;
  const dy = action.length > 1 ? (action[1] ?? 0) * ARROW_WORLD_PER_UNIT : 0;
  const [x0, y0] = tf.toPixel(origin);
  const [x1, y1] = tf.toPixel([origin[0] + dx, origin[1] + dy]);
  ctx.strokeStyle = color;
  ctx.fillStyle = color;
  if (dash !== null) {
    ctx.setLineDash(dash);
  }
  ctx.beginPath();
  ctx.moveTo(x0, y0);
  ctx.lineTo(x1, y1);
  ctx.stroke();
  ctx.setLineDash([]);
  const angle = Math.atan2(y1 - y0, x1 - x0);
  ctx.beginPath();
  ctx.moveTo(x1, y1);
  ctx.lineTo(x1 - 8 * Math.cos(angle - 0.4), y1 - 8 * Math.sin(angle - 0.4));
  ctx.lineTo(x1 - 8 * Math.cos(angle + 0.4), y1 - 8 * Math.sin(angle + 0.4));
  ctx.closePath();
  ctx.fill();
}
