/**
 * Typed client for the triage service JSON API.
 *
 * Every model quantity shown in the UI (scores, similarities, nDCG)
 * comes from these payloads verbatim; the client never recomputes them.
 */

export type Phase = "training" | "awaiting-labels" | "retraining" | "complete" | "failed";
export type Label = "normal" | "anomaly";

export interface ApiErrorBody {
  code: string;
  message: string;
  detail: string;
}

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly detail: string;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.status = status;
    this.code = body.code;
    this.detail = body.detail ?? "";
  }
}

export interface DatasetInfo {
  dataset_id: string;
  name: string;
  rows: number;
  features: number;
  anomalies: number;
  anomaly_pct: string;
  has_labels: boolean;
}

export interface SessionView {
  session_id: string;
  phase: Phase;
  error: string | null;
  iteration: number;
  max_iterations: number;
  budget: number;
  oracle_calls: number;
  strategy: string;
  metric: string;
  pending_count: number;
  labeled_normal: number;
  labeled_anomalous: number;
  train_pool: number;
  rows: number;
  has_truth: boolean;
}

export interface Neighbor {
  id: string;
  similarity: number;
}

export interface Candidate {
  id: string;
  score: number;
  rank: number;
  top_features: string[];
  active_count: number;
  neighbors: { normal: Neighbor | null; anomaly: Neighbor | null };
}

export interface CandidateBatch {
  iteration: number;
  tau: number | null;
  candidates: Candidate[];
}

export interface SeriesPoint {
  iteration: number;
  ndcg: number | null;
  tau: number | null;
  queried: number;
  expanded: number;
  prioritized: number;
}

export interface Metrics {
  strategy: string;
  series: SeriesPoint[];
  summary: { max: number; mean: number; median: number } | null;
}

export interface RankingItem {
  rank: number;
  id: string;
  score: number | null;
  oracle_label: Label | null;
  in_train_pool: boolean;
}

export interface RankingPage {
  total: number;
  offset: number;
  items: RankingItem[];
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const text = await resp.text();
  const body = text ? JSON.parse(text) : {};
  if (!resp.ok) {
    throw new ApiError(resp.status, body as ApiErrorBody);
  }
  return body as T;
}

export class WinnowClient {
  constructor(readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  health(): Promise<{ status: string }> {
    return request(this.url("/healthz"));
  }

  uploadDataset(name: string, datasetCsv: string, labelsCsv?: string): Promise<DatasetInfo> {
    return request(this.url("/datasets"), {
      method: "POST",
      body: JSON.stringify({
        name,
        dataset_csv: datasetCsv,
        labels_csv: labelsCsv ?? null,
      }),
    });
  }

  createSession(
    datasetId: string,
    session: Record<string, unknown> = {},
    model: Record<string, unknown> = {},
  ): Promise<{ session_id: string; phase: Phase }> {
    return request(this.url("/sessions"), {
      method: "POST",
      body: JSON.stringify({ dataset_id: datasetId, session, model }),
    });
  }

  session(id: string): Promise<SessionView> {
    return request(this.url(`/sessions/${id}`));
  }

  candidates(id: string): Promise<CandidateBatch> {
    return request(this.url(`/sessions/${id}/candidates`));
  }

  submitLabels(
    id: string,
    labels: Record<string, Label>,
  ): Promise<{ accepted: number; remaining: number; phase: Phase }> {
    return request(this.url(`/sessions/${id}/labels`), {
      method: "POST",
      body: JSON.stringify({ labels }),
    });
  }

  metrics(id: string): Promise<Metrics> {
    return request(this.url(`/sessions/${id}/metrics`));
  }

  ranking(id: string, offset = 0, limit = 50): Promise<RankingPage> {
    return request(this.url(`/sessions/${id}/ranking?offset=${offset}&limit=${limit}`));
  }
}
