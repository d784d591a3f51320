// Pure render model: server messages map to a flat list of draw ops that a
// canvas painter (or a test) consumes. No instruction logic lives here.

import type {
  InstructionMessage,
  StateMessage,
  Style,
  UiSessionState,
} from "./protocol.js";

export type DrawOp =
  | { kind: "rect"; x: number; y: number; w: number; h: number; color: string }
  | { kind: "circle"; x: number; y: number; r: number; color: string; fill: boolean }
  | { kind: "line"; x1: number; y1: number; x2: number; y2: number; color: string; width: number }
  | { kind: "text"; x: number; y: number; text: string; color: string };

export const AXIS_NAMES = ["turret", "boom", "arm", "bucket"] as const;

// layout constants (pixels); cosmetic only
export const BAR_FULL = 80;
export const BAR_HEIGHT = 14;
export const BAR_GAP = 34;
export const CIRCLE_R = 26;

const RED = "#c62828";
const GREEN = "#2e7d32";
const BLACK = "#111";
const GREY = "#9e9e9e";

/**
 * Direction/magnitude bars: one horizontal bar per axis, length
 * proportional to the commanded magnitude in the signed direction, drawn
 * green once the operator matches and red otherwise. A thin black marker
 * shows the operator's current stick value.
 */
export function renderBars(
  instr: InstructionMessage,
  operatorAxes: number[],
  x0 = 20,
  y0 = 20,
): DrawOp[] {
  const ops: DrawOp[] = [];
  instr.per_axis.forEach((axis, j) => {
    const y = y0 + j * BAR_GAP;
    const mid = x0 + BAR_FULL;
    ops.push({ kind: "text", x: x0, y: y - 4, text: AXIS_NAMES[j] ?? `axis${j}`, color: BLACK });
    // center reference line
    ops.push({ kind: "line", x1: mid, y1: y, x2: mid, y2: y + BAR_HEIGHT, color: GREY, width: 1 });
    const length = axis.direction * axis.magnitude * BAR_FULL;
    if (length !== 0) {
      ops.push({
        kind: "rect",
        x: length > 0 ? mid : mid + length,
        y,
        w: Math.abs(length),
        h: BAR_HEIGHT,
        color: axis.matched ? GREEN : RED,
      });
    }
    const stick = Math.max(-1, Math.min(1, operatorAxes[j] ?? 0));
    const sx = mid + stick * BAR_FULL;
    ops.push({ kind: "line", x1: sx, y1: y - 3, x2: sx, y2: y + BAR_HEIGHT + 3, color: BLACK, width: 2 });
  });
  return ops;
}

/**
 * Match-indicator circles: one per joystick (two axes each), green iff
 * every axis on that stick matches the desired action, red otherwise. No
 * direction or magnitude is shown.
 */
export function renderCircles(
  instr: InstructionMessage,
  x0 = 60,
  y0 = 60,
): DrawOp[] {
  const ops: DrawOp[] = [];
  const sticks = [instr.per_axis.slice(0, 2), instr.per_axis.slice(2, 4)];
  sticks.forEach((axes, i) => {
    const matched = axes.length > 0 && axes.every((a) => a.matched);
    ops.push({
      kind: "circle",
      x: x0 + i * (CIRCLE_R * 3),
      y: y0,
      r: CIRCLE_R,
      color: matched ? GREEN : RED,
      fill: true,
    });
    ops.push({
      kind: "text",
      x: x0 + i * (CIRCLE_R * 3) - CIRCLE_R / 2,
      y: y0 + CIRCLE_R + 14,
      text: i === 0 ? "left stick" : "right stick",
      color: BLACK,
    });
  });
  return ops;
}

/** Unknown styles fall back to circles; "none" renders no overlay. */
export function renderInstruction(
  instr: InstructionMessage | null,
  operatorAxes: number[],
  style: string,
): DrawOp[] {
  if (!instr || style === "none") return [];
  if (style === "bars") return renderBars(instr, operatorAxes);
  return renderCircles(instr);
}

// ---------------------------------------------------------------------------
// task-space view: top-down turret plane plus a side elevation strip
// ---------------------------------------------------------------------------

export interface SceneConfig {
  width: number;
  height: number;
  scale: number; // pixels per meter
  pile: { x: number; y: number };
  truck: { x: number; y: number };
}

export const DEFAULT_SCENE: SceneConfig = {
  width: 480,
  height: 480,
  scale: 80,
  pile: { x: 1.34, y: 1.69 },
  truck: { x: 1.25, y: -1.58 },
};

export function renderScene(
  state: StateMessage,
  cfg: SceneConfig = DEFAULT_SCENE,
): DrawOp[] {
  const cx = cfg.width / 2;
  const cy = cfg.height / 2;
  const px = (x: number, y: number) => ({
    // base frame x points right, y up on screen
    x: cx + x * cfg.scale,
    y: cy - y * cfg.scale,
  });
  const ops: DrawOp[] = [];
  const pile = px(cfg.pile.x, cfg.pile.y);
  const truck = px(cfg.truck.x, cfg.truck.y);
  ops.push({ kind: "circle", x: pile.x, y: pile.y, r: 0.5 * cfg.scale, color: "#8d6e63", fill: true });
  ops.push({ kind: "text", x: pile.x - 12, y: pile.y + 4, text: "pile", color: "#fff" });
  ops.push({ kind: "rect", x: truck.x - 0.5 * cfg.scale, y: truck.y - 0.35 * cfg.scale, w: cfg.scale, h: 0.7 * cfg.scale, color: "#546e7a" });
  ops.push({ kind: "text", x: truck.x - 18, y: truck.y + 4, text: "truck", color: "#fff" });
  // base and arm projection
  const base = px(0, 0);
  ops.push({ kind: "circle", x: base.x, y: base.y, r: 10, color: "#333", fill: true });
  const tip = px(state.ee[0], state.ee[1]);
  ops.push({ kind: "line", x1: base.x, y1: base.y, x2: tip.x, y2: tip.y, color: "#f9a825", width: 4 });
  const loaded = state.bucket_load > 0;
  ops.push({ kind: "circle", x: tip.x, y: tip.y, r: 7, color: loaded ? "#6d4c41" : "#f9a825", fill: true });
  // side elevation strip along the bottom: height of the bucket tip
  const stripY = cfg.height - 40;
  ops.push({ kind: "line", x1: 20, y1: stripY, x2: cfg.width - 20, y2: stripY, color: GREY, width: 1 });
  const zPix = stripY - state.ee[2] * cfg.scale * 0.5;
  ops.push({ kind: "circle", x: cfg.width / 2, y: zPix, r: 5, color: "#f9a825", fill: true });
  ops.push({ kind: "text", x: 24, y: stripY - 6, text: `z=${state.ee[2].toFixed(2)}m  fill=${Math.round(state.truck_fill * 100)}%`, color: BLACK });
  return ops;
}

export function renderHud(view: UiSessionState): DrawOp[] {
  const ops: DrawOp[] = [];
  const status = view.status + (view.lastError ? `: ${view.lastError}` : "");
  ops.push({ kind: "text", x: 8, y: 14, text: `session ${status}`, color: BLACK });
  if (view.metrics) {
    const m = view.metrics;
    const mean = (xs: number[]) =>
      xs.length ? xs.reduce((a, b) => a + b, 0) / xs.length : NaN;
    ops.push({
      kind: "text",
      x: 8,
      y: 30,
      text:
        `cycles ${m.cycle_times.length}` +
        (m.cycle_times.length
          ? `, mean ${mean(m.cycle_times).toFixed(1)}s, ` +
            `err/cycle ${mean(m.erroneous_actions_per_cycle).toFixed(1)}`
          : ""),
      color: BLACK,
    });
  }
  return ops;
}
