// Canvas drawing for the dual scene and the latency chart.  Everything
// here takes its context as an argument; only main.ts touches the DOM.

import type { ConsoleModel } from "./model.js";
import type { LatencyFrame, Pose7 } from "./protocol.js";
import { type Camera, projectPoint, triadOf } from "./project.js";

/** One-way budget from the HCI guideline; the RTD chart doubles it. */
export const ONE_WAY_THRESHOLD_MS = 16;

const WIREFRAME_LEN = 0.055;
const SOLID_LEN = 0.034;
const AXIS_COLORS = ["#e05555", "#4db34d", "#4d79e0"] as const;

interface DrawableBody {
  name: string;
  pose: Pose7;
  depth: number;
}

export function drawDualScene(
  ctx: CanvasRenderingContext2D,
  model: ConsoleModel,
  cam: Camera,
  width: number,
  height: number,
  now: number,
): void {
  ctx.clearRect(0, 0, width, height);
  const stale = model.isStale(now);
  ctx.save();
  ctx.globalAlpha = stale ? 0.35 : 1.0;

  drawFloor(ctx, cam, width, height);

  const drawables: DrawableBody[] = [];
  for (const name of model.bodies) {
    const pose = model.poseOf(name);
    if (pose === undefined) continue;
    const depth = projectPoint(cam, [pose[0], pose[1], pose[2]], width,
                               height).depth;
    drawables.push({ name, pose, depth });
  }
  // Painter's order: far bodies first.
  drawables.sort((a, b) => b.depth - a.depth);

  for (const body of drawables) {
    drawWireframeTriad(ctx, cam, body.pose, width, height);
  }
  for (const body of drawables) {
    drawSolidMarker(ctx, cam, body, width, height,
                    model.isPending(body.name, now));
  }

  ctx.restore();
  if (stale) {
    ctx.fillStyle = "#9aa0a6";
    ctx.font = "14px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText("stale: no poses for over 1 s", width / 2, 24);
    ctx.textAlign = "left";
  }
}

function drawFloor(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  width: number,
  height: number,
): void {
  ctx.strokeStyle = "rgba(128, 136, 148, 0.18)";
  ctx.lineWidth = 1;
  const half = 0.4;
  const step = 0.1;
  for (let i = -4; i <= 4; i++) {
    const a = projectPoint(cam, [i * step, -half, 0], width, height);
    const b = projectPoint(cam, [i * step, half, 0], width, height);
    const c = projectPoint(cam, [-half, i * step, 0], width, height);
    const d = projectPoint(cam, [half, i * step, 0], width, height);
    ctx.beginPath();
    ctx.moveTo(a.x, a.y);
    ctx.lineTo(b.x, b.y);
    ctx.moveTo(c.x, c.y);
    ctx.lineTo(d.x, d.y);
    ctx.stroke();
  }
}

/** Commanded ground-truth layer: thin open triads. */
function drawWireframeTriad(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  pose: Pose7,
  width: number,
  height: number,
): void {
  const triad = triadOf(pose, WIREFRAME_LEN);
  const o = projectPoint(cam, triad.origin, width, height);
  ctx.lineWidth = 1;
  triad.tips.forEach((tip, i) => {
    const t = projectPoint(cam, tip, width, height);
    ctx.strokeStyle = (AXIS_COLORS[i] ?? "#888888") + "66";
    ctx.beginPath();
    ctx.moveTo(o.x, o.y);
    ctx.lineTo(t.x, t.y);
    ctx.stroke();
  });
}

/** Mirrored layer: filled origin dot, bold short triad, label. */
function drawSolidMarker(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  body: DrawableBody,
  width: number,
  height: number,
  pending: boolean,
): void {
  const triad = triadOf(body.pose, SOLID_LEN);
  const o = projectPoint(cam, triad.origin, width, height);
  ctx.lineWidth = 2.5;
  triad.tips.forEach((tip, i) => {
    const t = projectPoint(cam, tip, width, height);
    ctx.strokeStyle = AXIS_COLORS[i] ?? "#888888";
    ctx.beginPath();
    ctx.moveTo(o.x, o.y);
    ctx.lineTo(t.x, t.y);
    ctx.stroke();
  });
  ctx.fillStyle = "#e8eaed";
  ctx.beginPath();
  ctx.arc(o.x, o.y, 3, 0, 2 * Math.PI);
  ctx.fill();
  if (pending) {
    ctx.strokeStyle = "#f2b134";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.arc(o.x, o.y, 9, 0, 2 * Math.PI);
    ctx.stroke();
  }
  ctx.fillStyle = "rgba(232, 234, 237, 0.75)";
  ctx.font = "10px sans-serif";
  ctx.fillText(body.name, o.x + 6, o.y - 6);
}

/** Screen-space polyline for the RTD chart; pure so it can be tested. */
export function sparklinePoints(
  series: number[],
  width: number,
  height: number,
  pad = 4,
): Array<[number, number]> {
  if (series.length === 0) return [];
  const top = Math.max(...series, 2 * ONE_WAY_THRESHOLD_MS) * 1.05;
  const innerW = width - 2 * pad;
  const innerH = height - 2 * pad;
  const step = series.length > 1 ? innerW / (series.length - 1) : 0;
  return series.map((v, i) => [
    pad + i * step,
    pad + innerH * (1 - v / top),
  ]);
}

export function drawSparkline(
  ctx: CanvasRenderingContext2D,
  series: number[],
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  const pad = 4;
  const points = sparklinePoints(series, width, height, pad);
  if (points.length === 0) {
    ctx.fillStyle = "#9aa0a6";
    ctx.font = "11px sans-serif";
    ctx.fillText("run a bench to chart RTD", pad + 2, height / 2);
    return;
  }
  // Reference line: 16 ms one way means 32 ms round trip.
  const top = Math.max(...series, 2 * ONE_WAY_THRESHOLD_MS) * 1.05;
  const refY = pad + (height - 2 * pad) *
    (1 - (2 * ONE_WAY_THRESHOLD_MS) / top);
  ctx.strokeStyle = "#f2b13488";
  ctx.setLineDash([4, 3]);
  ctx.beginPath();
  ctx.moveTo(pad, refY);
  ctx.lineTo(width - pad, refY);
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.fillStyle = "#f2b134";
  ctx.font = "9px sans-serif";
  ctx.fillText("32 ms (16 ms one way)", pad + 2, refY - 3);

  ctx.strokeStyle = "#6fa8dc";
  ctx.lineWidth = 1.2;
  ctx.beginPath();
  points.forEach(([x, y], i) => {
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}

export interface PanelRow {
  label: string;
  /** The frame value, untouched; the view must not recompute stats. */
  raw: number;
  text: string;
}

const fmtMs = (v: number) => `${v.toFixed(2)} ms`;

/** Rows for the latency panel, straight from the latest frame. */
export function panelRows(latency: LatencyFrame | null): PanelRow[] {
  if (latency === null) return [];
  const s = latency.stats;
  return [
    { label: "frames", raw: s.n, text: String(s.n) },
    { label: "mean", raw: s.mean_ms, text: fmtMs(s.mean_ms) },
    { label: "median", raw: s.median_ms, text: fmtMs(s.median_ms) },
    { label: "std", raw: s.std_ms, text: fmtMs(s.std_ms) },
    { label: "p95", raw: s.p95_ms, text: fmtMs(s.p95_ms) },
    { label: "one way", raw: latency.one_way_ms, text: fmtMs(latency.one_way_ms) },
    { label: "dropped", raw: latency.dropped, text: String(latency.dropped) },
  ];
}
