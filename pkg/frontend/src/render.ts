/**
 * Canvas painters. All decisions about *what* to draw live in model.ts;
 * this file only turns draw lists into 2D context calls.
 */

import type { TimelineMarker, ViewDraw } from "./model.js";

const BOX_COLOR = "#3cb44b";
const TARGET_COLOR = "#ffd21f";
const TARGET_FILL = "rgba(255, 210, 31, 0.25)";
const GRIPPER_COLOR = "#42d4f4";
const MARKER_COLOR = "#e6194b";

export function drawView(canvas: HTMLCanvasElement, view: ViewDraw) {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#101418";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  ctx.font = "11px monospace";
  ctx.lineWidth = 1.5;

  for (const box of view.boxes) {
    const [x0, y0, x1, y1] = box.bbox;
    const w = x1 - x0;
    const h = y1 - y0;
    if (box.isTarget) {
      ctx.fillStyle = TARGET_FILL;
      ctx.fillRect(x0, y0, w, h);
    }
    ctx.strokeStyle = box.isTarget ? TARGET_COLOR : BOX_COLOR;
    ctx.strokeRect(x0, y0, w, h);
    const labelText = box.label; // byte-equal to the wire label
    const tw = ctx.measureText(labelText).width + 6;
    ctx.fillStyle = "rgba(0,0,0,0.65)";
    ctx.fillRect(x0, Math.max(0, y0 - 14), tw, 13);
    ctx.fillStyle = box.isTarget ? TARGET_COLOR : "#ffffff";
    ctx.fillText(labelText, x0 + 3, Math.max(10, y0 - 4));
  }

  if (view.gripperPx) {
    const [u, v] = view.gripperPx;
    ctx.strokeStyle = GRIPPER_COLOR;
    ctx.beginPath();
    ctx.moveTo(u - 6, v);
    ctx.lineTo(u + 6, v);
    ctx.moveTo(u, v - 6);
    ctx.lineTo(u, v + 6);
    ctx.stroke();
    ctx.beginPath();
    ctx.arc(u, v, 4, 0, Math.PI * 2);
    ctx.stroke();
  }
}

export function drawTimeline(
  canvas: HTMLCanvasElement,
  progress: number,
  markers: TimelineMarker[],
) {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const w = canvas.width;
  const h = canvas.height;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#22262b";
  ctx.fillRect(0, h / 2 - 3, w, 6);
  ctx.fillStyle = "#3a4048";
  ctx.fillRect(0, h / 2 - 3, w * Math.min(1, Math.max(0, progress)), 6);

  ctx.font = "bold 16px sans-serif";
  for (const marker of markers) {
    const x = marker.position * w;
    ctx.fillStyle = MARKER_COLOR;
    ctx.fillText("!", x - 2, h / 2 - 8);
    ctx.fillRect(x - 1, h / 2 - 3, 2, 6);
  }
}
