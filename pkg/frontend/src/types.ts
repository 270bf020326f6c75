// Wire types mirroring the gateway HTTP API. The console never mutates or
// recomputes any of these values; it renders what the server asserts.

export type HeldState = 'pending' | 'approved' | 'rejected';

export interface HeldItemView {
  request_id: string;
  response_text: string;
  created_at: string;
  age_s: number;
  state: HeldState;
  reviewer_id: string | null;
  decided_at: string | null;
}

export type Light = 'green' | 'amber' | 'red';

export interface ThresholdAnnotation {
  amber: number;
  red: number;
  higher_is_worse: boolean;
}

export interface KpiSnapshot {
  window: { start: string; end: string };
  success_ratio: number | null;
  mean_toxicity: number | null;
  mean_hallucination: number | null;
  mean_feedback: number | null;
  drift_psi: number | null;
  per_kpi_status: Record<string, Light>;
  overall: Light;
  actions: string[];
  attempts: number;
  insufficient_data: boolean;
  thresholds?: Record<string, ThresholdAnnotation>;
}

export interface ConsoleConfig {
  gateway_url: string;
  poll_ms: number;
}

export const KPI_NAMES = [
  'success_ratio',
  'mean_toxicity',
  'mean_hallucination',
  'mean_feedback',
  'drift_psi',
] as const;
