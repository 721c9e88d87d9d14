/**
 * World <-> pixel mapping and drag-to-action conversion.
 *
 * The transform fits the scene's world rectangle into the canvas with a
 * single uniform scale (letterboxed, centered) and flips the y axis so
 * world +y points up on screen.  Uniform scale keeps circles circular
 * and makes the mapping exactly invertible up to float rounding.
 */

export interface Viewport {
  width: number;
  height: number;
  /** Pixels of padding kept clear on every edge. */
  margin?: number;
}

export type ViewRect = [[number, number], [number, number]];

export class SceneTransform {
  readonly scale: number;
  private readonly offsetX: number;
  private readonly offsetY: number;

  constructor(view: ViewRect, viewport: Viewport) {
    const [[xmin, xmax], [ymin, ymax]] = view;
    const margin = viewport.margin ?? 0;
    const innerW = viewport.width - 2 * margin;
    const innerH = viewport.height - 2 * margin;
    if (innerW <= 0 || innerH <= 0) {
      throw new Error("viewport smaller than its margins");
    }
    const spanX = xmax - xmin;
    const spanY = ymax - ymin;
    if (spanX <= 0 || spanY <= 0) {
      throw new Error("view rectangle must have positive extent");
    }
    this.scale = Math.min(innerW / spanX, innerH / spanY);
    // Center the world rect inside the viewport.
    const cx = (xmin + xmax) / 2;
    const cy = (ymin + ymax) / 2;
    this.offsetX = viewport.width / 2 - cx * this.scale;
    this.offsetY = viewport.height / 2 + cy * this.scale;
  }

  toPixel(world: readonly [number, number]): [number, number] {
    return [
      this.offsetX + world[0] * this.scale,
      this.offsetY - world[1] * this.scale,
    ];
  }

  toWorld(pixel: readonly [number, number]): [number, number] {
    return [
      (pixel[0] - this.offsetX) / this.scale,
      (this.offsetY - pixel[1]) / this.scale,
    ];
  }

  /** Convert a world length to pixels (radii, arrow magnitudes). */
  lengthToPixels(worldLength: number): number {
    return worldLength * this.scale;
  }
}

/** World units of drag that command a full-scale (1.0) action component. */
export const DRAG_WORLD_PER_UNIT_ACTION = 0.25;

export interface DragResult {
  /** Clipped action, sized to the action bounds. */
  action: number[];
  /** Pre-clip action implied by the raw drag. */
  raw: number[];
  /** True when any component was clamped to its bound. */
  clipped: boolean;
  /** max(|raw_i| / bound span midpoint), drives the magnitude bar. */
  saturation: number;
}

/**
 * Map a pointer drag to an action.  The drag vector in world units is
 * divided by DRAG_WORLD_PER_UNIT_ACTION, so a short deliberate drag
 * spans the full action range; components beyond the bounds clip, and
 * `saturation` > 1 tells the magnitude bar to show the clipped zone.
 * One-dimensional action spaces take the horizontal component.
 */
export function dragToAction(
  startPixel: readonly [number, number],
  endPixel: readonly [number, number],
  transform: SceneTransform,
  aLow: readonly number[],
  aHigh: readonly number[],
): DragResult {
  const start = transform.toWorld(startPixel);
  const end = transform.toWorld(endPixel);
  const deltaWorld = [end[0] - start[0], end[1] - start[1]];
  const dims = aLow.length;
  const raw: number[] = [];
  for (let i = 0; i < dims; i += 1) {
    raw.push((deltaWorld[i] ?? 0) / DRAG_WORLD_PER_UNIT_ACTION);
  }
  let clipped = false;
  let saturation = 0;
  const action = raw.map((value, i) => {
    const lo = aLow[i] ?? -Infinity;
    const hi = aHigh[i] ?? Infinity;
    const bound = Math.max(Math.abs(lo), Math.abs(hi));
    if (bound > 0 && Number.isFinite(bound)) {
      saturation = Math.max(saturation, Math.abs(value) / bound);
    }
    const out = Math.min(hi, Math.max(lo, value));
    if (out !== value) {
      clipped = true;
    }
    return out;
  });
  return { action, raw, clipped, saturation };
}
