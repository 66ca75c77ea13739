// Canvas renderer for the signal tracks, boundary handles, and chips.

import { ChipBox, TimeScale, formatTime } from "./scale.js";
import type { SignalPoint, SignalsResponse } from "./types.js";

const TRACK_COLORS: Record<string, string> = {
  velocity_norm: "#4e9af1",
  gripper_left: "#58c469",
  gripper_right: "#c4a14e",
};

const KIND_COLORS: Record<string, string> = {
  zero_velocity: "#8f6ee0",
  gripper_toggle: "#d4713f",
  episode_edge: "#777777",
  manual: "#d23f6e",
};

export interface DragPreview {
  index: number;
  t: number;
}

export interface TimelineLayout {
  scale: TimeScale;
  trackTop: number;
  trackHeight: number;
  trackGap: number;
  chipRow: number;
}

export function defaultLayout(scale: TimeScale): TimelineLayout {
  return { scale, trackTop: 28, trackHeight: 64, trackGap: 14, chipRow: 2 };
}

function drawTrack(
  ctx: CanvasRenderingContext2D,
  points: SignalPoint[],
  scale: TimeScale,
  top: number,
  height: number,
  color: string,
  label: string,
) {
  const max = Math.max(...points.map(([, v]) => v), 1e-9);
  ctx.strokeStyle = "#333a44";
  ctx.strokeRect(scale.padLeft, top, scale.innerWidth, height);
  ctx.beginPath();
  points.forEach(([t, v], i) => {
    const x = scale.xOf(t);
    const y = top + height - (v / max) * (height - 4) - 2;
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.stroke();
  ctx.lineWidth = 1;
  ctx.fillStyle = "#9aa3ad";
  ctx.font = "11px system-ui";
  ctx.fillText(`${label} (max ${max.toPrecision(3)})`, scale.padLeft + 4, top + 12);
}

export function renderTimeline(
  ctx: CanvasRenderingContext2D,
  signals: SignalsResponse,
  boundaries: number[],
  boundaryKinds: string[],
  chips: ChipBox[],
  layout: TimelineLayout,
  selected: number,
  approved: boolean,
  drag: DragPreview | null,
): void {
  const { scale } = layout;
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);

  // transcript chips above the tracks
  ctx.font = "11px system-ui";
  for (const chip of chips) {
    ctx.fillStyle = "#2b3a55";
    ctx.fillRect(chip.x, layout.chipRow, chip.width, 18);
    ctx.strokeStyle = "#3f558a";
    ctx.strokeRect(chip.x, layout.chipRow, chip.width, 18);
    ctx.fillStyle = "#d7e0f0";
    ctx.save();
    ctx.beginPath();
    ctx.rect(chip.x, layout.chipRow, chip.width, 18);
    ctx.clip();
    ctx.fillText(chip.text, chip.x + 3, layout.chipRow + 13);
    ctx.restore();
  }

  let top = layout.trackTop;
  const names = Object.keys(signals.channels);
  for (const name of names) {
    drawTrack(
      ctx,
      signals.channels[name],
      scale,
      top,
      layout.trackHeight,
      TRACK_COLORS[name] ?? "#cccccc",
      name,
    );
    top += layout.trackHeight + layout.trackGap;
  }
  const bottom = top - layout.trackGap;

  // boundary handles span all tracks
  boundaries.forEach((t, i) => {
    const displayT = drag !== null && drag.index === i ? drag.t : t;
    const x = scale.xOf(displayT);
    ctx.strokeStyle = KIND_COLORS[boundaryKinds[i] ?? "manual"] ?? "#d23f6e";
    ctx.lineWidth = i === selected ? 3 : 1.5;
    ctx.beginPath();
    ctx.moveTo(x, layout.trackTop - 6);
    ctx.lineTo(x, bottom + 6);
    ctx.stroke();
    ctx.lineWidth = 1;
    if (!approved) {
      ctx.fillStyle = i === selected ? "#ffffff" : "#c3cbd6";
      ctx.beginPath();
      ctx.moveTo(x - 5, layout.trackTop - 6);
      ctx.lineTo(x + 5, layout.trackTop - 6);
      ctx.lineTo(x, layout.trackTop + 2);
      ctx.closePath();
      ctx.fill();
    }
    ctx.fillStyle = "#9aa3ad";
    ctx.fillText(formatTime(displayT), x + 3, bottom + 16);
  });

  // time axis labels
  ctx.fillStyle = "#6b7480";
  ctx.fillText("0s", scale.padLeft, bottom + 30);
  ctx.fillText(formatTime(signals.duration_s), scale.xOf(signals.duration_s) - 30, bottom + 30);
}
