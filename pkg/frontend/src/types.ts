/** Payload shapes of the review service API, mirrored field for field. */

export type DecisionStatus = "pending" | "accepted" | "overridden" | "rejected";

export interface CaseSummary {
  case_id: string;
  modality: string;
  method: string | null;
  measurement_mm: number | null;
  uncertainty_score: number;
  ood_flag: boolean;
  error: string | null;
  decision_status: DecisionStatus;
}

export interface MeasurementFit {
  kind: string;
  center: [number, number];
  orientation_deg: number;
  semi_major?: number;
  semi_minor?: number;
  side_long?: number;
  side_short?: number;
}

export interface Measurement {
  kind: string;
  value_mm: number;
  value_px: number;
  fit: MeasurementFit;
}

export interface DecisionState {
  action: string;
  note?: string;
  reviewer?: string;
  timestamp?: string;
  value_mm?: number;
}

export interface CaseDetail {
  case_id: string;
  modality: string;
  method: string;
  pixel_size_mm: number;
  measurement: Measurement | null;
  gt_measurement_mm: number | null;
  abs_error_mm: number | null;
  rel_error_pct: number | null;
  iou: number | null;
  uncertainty_score: number;
  ood_flag: boolean;
  error: string | null;
  uncertainty_paths: Record<string, string>;
  decision: DecisionState;
  decision_status: DecisionStatus;
}

export interface LayerPayload {
  width: number;
  height: number;
  values: number[];
}

export type DecisionAction = "accept" | "override" | "reject";

export interface DecisionBody {
  action: DecisionAction;
  value_mm?: number;
  note?: string;
  reviewer?: string;
}

export interface DecisionResponse {
  case_id: string;
  decision_status: DecisionStatus;
  decision: DecisionState;
}

export const HEATMAP_LAYERS = ["data", "model", "total", "ekl", "variance"] as const;
export type HeatmapLayer = (typeof HEATMAP_LAYERS)[number];
