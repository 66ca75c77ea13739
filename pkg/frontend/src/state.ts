// Timeline store: the server-acknowledged annotation state plus the pending
// optimistic edits currently in flight. Rendered boundaries always reflect
// acknowledged-state-plus-pending; a rejected edit disappears from pending
// (visual rollback) and its violation message lands in lastError. The
// annotation file behind the service stays the single source of truth.

import { ApiClient, ApiError } from "./api.js";
import type { AnnotationRecord, Edit, SignalsResponse } from "./types.js";

export type StoreStatus = "idle" | "loading" | "ready" | "not-found" | "error";

export interface StoreError {
  code: string;
  message: string;
}

export class TimelineStore {
  status: StoreStatus = "idle";
  signals: SignalsResponse | null = null;
  annotations: AnnotationRecord[] = [];
  approved = false;
  pending: Edit[] = [];
  lastError: StoreError | null = null;
  selectedBoundary = 0;

  private listeners: Array<() => void> = [];

  constructor(
    private api: ApiClient,
    readonly episodeId: string,
  ) {}

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  async load(): Promise<void> {
    this.status = "loading";
    this.emit();
    try {
      const [signals, annotations] = await Promise.all([
        this.api.getSignals(this.episodeId, [
          "velocity_norm",
          "gripper_left",
          "gripper_right",
        ]),
        this.api.getAnnotations(this.episodeId),
      ]);
      this.signals = signals;
      this.annotations = annotations.annotations;
      this.approved = annotations.approved;
      this.pending = [];
      this.status = "ready";
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.status = "not-found";
      } else {
        this.status = "error";
        this.lastError = {
          code: err instanceof ApiError ? err.code : "network",
          message: err instanceof Error ? err.message : String(err),
        };
      }
    }
    this.emit();
  }

  /** Acknowledged annotations with pending optimistic edits overlaid. */
  get viewAnnotations(): AnnotationRecord[] {
    let view = this.annotations.map((a) => ({ ...a }));
    for (const edit of this.pending) {
      if (edit.op === "move_boundary" && edit.index < view.length - 1) {
        view[edit.index].end = edit.new_t;
        view[edit.index + 1].start = edit.new_t;
      } else if (edit.op === "set_instruction" && edit.index < view.length) {
        view[edit.index].instruction = edit.text;
      }
    }
    return view;
  }

  /** Interior boundary times (boundary i separates annotation i and i+1). */
  get boundaries(): number[] {
    const view = this.viewAnnotations;
    return view.slice(0, -1).map((a) => a.end);
  }

  /** Snap a time onto the episode's sample grid. */
  snap(t: number): number {
    const rate = this.signals?.sample_rate_hz ?? 0;
    if (rate <= 0) return t;
    return Math.round(t * rate) / rate;
  }

  /**
   * Local pre-validation for a boundary drag: crossing a neighboring
   * boundary is blocked here, before any network call. Duration rules are
   * the server's. Returns a violation message, or null when the move may
   * be submitted.
   */
  validateMove(index: number, newT: number): string | null {
    if (this.approved) return "episode is approved; editing is locked";
    const view = this.viewAnnotations;
    if (index < 0 || index >= view.length - 1) return "no such boundary";
    const left = view[index];
    const right = view[index + 1];
    if (newT <= left.start || newT >= right.end) {
      return `boundary must stay inside (${left.start.toFixed(3)}, ${right.end.toFixed(3)})`;
    }
    return null;
  }

  private async submit(edit: Edit): Promise<boolean> {
    this.pending.push(edit);
    this.lastError = null;
    this.emit();
    try {
      const response = await this.api.putEdits(this.episodeId, [edit]);
      this.annotations = response.annotations;
      this.approved = response.approved;
      return true;
    } catch (err) {
      if (err instanceof ApiError) {
        this.lastError = { code: err.code, message: err.message };
      } else {
        this.lastError = {
          code: "network",
          message: err instanceof Error ? err.message : String(err),
        };
      }
      return false;
    } finally {
      // acknowledged or rejected, the edit is no longer pending; a
      // rejection therefore rolls the view back to the server state
      this.pending = this.pending.filter((p) => p !== edit);
      this.emit();
    }
  }

  /** Optimistic boundary move; resolves false (and rolls back) on rejection. */
  moveBoundary(index: number, newT: number): Promise<boolean> {
    return this.submit({ op: "move_boundary", index, new_t: this.snap(newT) });
  }

  setInstruction(index: number, text: string): Promise<boolean> {
    return this.submit({ op: "set_instruction", index, text });
  }

  split(index: number, t: number): Promise<boolean> {
    return this.submit({ op: "split", index, t: this.snap(t) });
  }

  merge(index: number): Promise<boolean> {
    return this.submit({ op: "merge", index });
  }

  /** Indices of annotations still lacking an instruction (approve warning). */
  emptyInstructionIndices(): number[] {
    return this.viewAnnotations
      .map((a, i) => (a.instruction.trim() === "" ? i : -1))
      .filter((i) => i >= 0);
  }

  async approve(): Promise<number | null> {
    this.lastError = null;
    try {
      const response = await this.api.approve(this.episodeId);
      this.approved = true;
      const fresh = await this.api.getAnnotations(this.episodeId);
      this.annotations = fresh.annotations;
      this.emit();
      return response.subtasks;
    } catch (err) {
      this.lastError = {
        code: err instanceof ApiError ? err.code : "network",
        message: err instanceof Error ? err.message : String(err),
      };
      this.emit();
      return null;
    }
  }

  selectNextBoundary(step: 1 | -1): void {
    const count = this.boundaries.length;
    if (count === 0) return;
    this.selectedBoundary =
      (this.selectedBoundary + step + count) % count;
    this.emit();
  }
}
