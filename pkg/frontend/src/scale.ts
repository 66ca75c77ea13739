// Time-to-pixel mapping and hit geometry for the timeline canvas.

import type { TranscriptChip } from "./types.js";

export class TimeScale {
  constructor(
    readonly duration: number,
    readonly width: number,
    readonly padLeft: number = 8,
    readonly padRight: number = 8,
  ) {}

  get innerWidth(): number {
    return Math.max(1, this.width - this.padLeft - this.padRight);
  }

  xOf(t: number): number {
    return this.padLeft + (t / Math.max(this.duration, 1e-9)) * this.innerWidth;
  }

  tOf(x: number): number {
    const t = ((x - this.padLeft) / this.innerWidth) * this.duration;
    return Math.min(Math.max(t, 0), this.duration);
  }
}

/** Index of the boundary whose handle is within `tolPx` of x, else -1. */
export function hitBoundary(
  boundaries: number[],
  scale: TimeScale,
  x: number,
  tolPx: number = 6,
): number {
  let best = -1;
  let bestDist = tolPx + 1;
  boundaries.forEach((t, i) => {
    const d = Math.abs(scale.xOf(t) - x);
    if (d <= tolPx && d < bestDist) {
      best = i;
      bestDist = d;
    }
  });
  return best;
}

export interface ChipBox {
  x: number;
  width: number;
  text: string;
}

/** Chip rectangles for transcript segments, shifted earlier by the lead. */
export function chipLayout(
  chips: TranscriptChip[],
  leadS: number,
  scale: TimeScale,
): ChipBox[] {
  return chips.map((c) => {
    const start = Math.max(c.start - leadS, 0);
    const end = Math.max(c.end - leadS, start + 1e-6);
    const x = scale.xOf(start);
    return { x, width: Math.max(scale.xOf(end) - x, 3), text: c.text };
  });
}

export function formatTime(t: number): string {
  const m = Math.floor(t / 60);
  const s = t - m * 60;
  return m > 0 ? `${m}:${s.toFixed(2).padStart(5, "0")}` : `${s.toFixed(2)}s`;
}
