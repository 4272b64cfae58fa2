/**
 * Dashboard state: everything the render layer needs, plus the label
 * selections the analyst has made but not yet sent.
 *
 * All durable state lives server-side; losing this object (page reload)
 * loses only unsent selections. Polling cadence follows the phase:
 * fast while the server is training, relaxed while waiting on the
 * analyst.
 */

import type {
  Candidate,
  CandidateBatch,
  Label,
  Metrics,
  Phase,
  RankingPage,
  SessionView,
} from "./api.js";

export const POLL_TRAINING_MS = 1000;
export const POLL_IDLE_MS = 5000;

export interface DashboardState {
  sessionId: string | null;
  view: SessionView | null;
  batch: CandidateBatch | null;
  metrics: Metrics | null;
  ranking: RankingPage | null;
  rankingOffset: number;
  selections: Record<string, Label>;
  submitting: boolean;
  queued: Record<string, Label> | null; // kept after a network failure, resent on demand
  lastError: string | null;
}

export function initialState(): DashboardState {
  return {
    sessionId: null,
    view: null,
    batch: null,
    metrics: null,
    ranking: null,
    rankingOffset: 0,
    selections: {},
    submitting: false,
    queued: null,
    lastError: null,
  };
}

export function pollIntervalMs(state: DashboardState): number {
  const phase = state.view?.phase;
  return phase === "training" || phase === "retraining" ? POLL_TRAINING_MS : POLL_IDLE_MS;
}

export function applySession(state: DashboardState, view: SessionView): DashboardState {
  const phaseChanged = state.view?.phase !== view.phase;
  const next = { ...state, view };
  if (phaseChanged && view.phase !== "awaiting-labels") {
    // a new batch will arrive with the next awaiting phase
    next.batch = null;
  }
  return next;
}

export function applyCandidates(state: DashboardState, batch: CandidateBatch): DashboardState {
  const ids = new Set(batch.candidates.map((c) => c.id));
  const selections: Record<string, Label> = {};
  for (const [id, label] of Object.entries(state.selections)) {
    if (ids.has(id)) selections[id] = label; // keep selections still applicable
  }
  return { ...state, batch, selections };
}

export function applyMetrics(state: DashboardState, metrics: Metrics): DashboardState {
  return { ...state, metrics };
}

export function applyRanking(state: DashboardState, ranking: RankingPage): DashboardState {
  return { ...state, ranking, rankingOffset: ranking.offset };
}

export function select(state: DashboardState, id: string, label: Label): DashboardState {
  if (!state.batch || !state.batch.candidates.some((c) => c.id === id)) {
    return state;
  }
  return { ...state, selections: { ...state.selections, [id]: label } };
}

export function clearSelection(state: DashboardState, id: string): DashboardState {
  const selections = { ...state.selections };
  delete selections[id];
  return { ...state, selections };
}

export function labelingEnabled(state: DashboardState): boolean {
  return state.view?.phase === "awaiting-labels" && !state.submitting;
}

export function selectedCount(state: DashboardState): number {
  return Object.keys(state.selections).length;
}

/** Candidates not yet answered in this batch, in server (score) order. */
export function pendingCandidates(state: DashboardState): Candidate[] {
  return state.batch?.candidates ?? [];
}

export function beginSubmit(state: DashboardState): DashboardState {
  return { ...state, submitting: true, lastError: null };
}

export function submitSucceeded(state: DashboardState, phase: Phase): DashboardState {
  const view = state.view ? { ...state.view, phase } : state.view;
  return {
    ...state,
    view,
    submitting: false,
    selections: {},
    queued: null,
    batch: phase === "awaiting-labels" ? state.batch : null,
  };
}

/** Network failure: keep the unsent selections queued for explicit retry. */
export function submitFailed(state: DashboardState, message: string): DashboardState {
  return {
    ...state,
    submitting: false,
    queued: { ...state.selections },
    lastError: message,
  };
}

export function retryPayload(state: DashboardState): Record<string, Label> | null {
  return state.queued && Object.keys(state.queued).length ? state.queued : null;
}
