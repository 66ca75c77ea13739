// Wire types for the review service API.

export interface EpisodeSummary {
  id: string;
  task: string;
  modality: string;
  sample_rate_hz: number;
  n_samples: number;
  duration_s: number;
  approved: boolean;
  n_annotations: number;
}

export interface AnnotationRecord {
  start: number;
  end: number;
  instruction: string;
  start_kind: string;
  end_kind: string;
  review_status: string;
}

export interface AnnotationsResponse {
  episode_id: string;
  approved: boolean;
  annotations: AnnotationRecord[];
}

export type SignalPoint = [number, number];

export interface BoundaryInfo {
  t: number;
  kind: string;
}

export interface TranscriptChip {
  start: number;
  end: number;
  text: string;
}

export interface SignalsResponse {
  episode_id: string;
  sample_rate_hz: number;
  duration_s: number;
  decimate: number;
  channels: Record<string, SignalPoint[]>;
  breakpoints: BoundaryInfo[];
  transcript: TranscriptChip[];
  transcript_lead_s: number;
}

export interface ApproveResponse {
  episode_id: string;
  subtasks: number;
  subtask_ids: string[];
}

export type Edit =
  | { op: "move_boundary"; index: number; new_t: number }
  | { op: "set_instruction"; index: number; text: string }
  | { op: "split"; index: number; t: number }
  | { op: "merge"; index: number }
  | { op: "approve_all" };
