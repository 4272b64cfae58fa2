/** DOM wiring and the polling loop. Logic lives in state.ts / render.ts. */

import { ApiError, WinnowClient, type Label } from "./api.js";
import {
  applyCandidates,
  applyMetrics,
  applyRanking,
  applySession,
  beginSubmit,
  initialState,
  pollIntervalMs,
  retryPayload,
  select,
  submitFailed,
  submitSucceeded,
  type DashboardState,
} from "./state.js";
import { renderCandidates, renderMetrics, renderRanking, renderStatus } from "./render.js";

const client = new WinnowClient("");
let state: DashboardState = initialState();
let pollTimer: number | undefined;

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function draw(): void {
  el("status").innerHTML = renderStatus(state.view, state.lastError);
  el("candidates").innerHTML = renderCandidates(state);
  el("metrics").innerHTML = renderMetrics(state.metrics);
  el("ranking").innerHTML = renderRanking(state.ranking);
}

async function refresh(): Promise<void> {
  const sessionId = state.sessionId;
  if (!sessionId) return;
  try {
    const view = await client.session(sessionId);
    state = applySession(state, view);
    if (view.phase === "awaiting-labels" && !state.submitting) {
      state = applyCandidates(state, await client.candidates(sessionId));
    }
    state = applyMetrics(state, await client.metrics(sessionId));
    state = applyRanking(state, await client.ranking(sessionId, state.rankingOffset, 25));
    state.lastError = null;
  } catch (err) {
    state = { ...state, lastError: err instanceof Error ? err.message : String(err) };
  }
  draw();
  schedule();
}

function schedule(): void {
  if (pollTimer !== undefined) window.clearTimeout(pollTimer);
  pollTimer = window.setTimeout(() => void refresh(), pollIntervalMs(state));
}

async function submitSelections(payload: Record<string, Label>): Promise<void> {
  const sessionId = state.sessionId;
  if (!sessionId || Object.keys(payload).length === 0) return;
  state = beginSubmit(state);
  draw();
  try {
    const ack = await client.submitLabels(sessionId, payload);
    state = submitSucceeded(state, ack.phase);
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      // conflict: refresh will reconcile; drop nothing silently
      state = submitFailed(state, `${err.message} (${err.detail || "conflict"})`);
    } else {
      state = submitFailed(state, err instanceof Error ? err.message : String(err));
    }
  }
  draw();
  void refresh();
}

function attachHandlers(): void {
  el("candidates").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.matches("button[data-label]")) {
      const id = target.dataset.id as string;
      const label = target.dataset.label as Label;
      state = select(state, id, label);
      draw();
    } else if (target.id === "submit-labels") {
      void submitSelections({ ...state.selections });
    } else if (target.id === "retry-labels") {
      const queued = retryPayload(state);
      if (queued) void submitSelections(queued);
    }
  });

  el("ranking").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const page = state.ranking;
    if (!page || !state.sessionId) return;
    if (target.id === "rank-next") {
      state.rankingOffset = page.offset + page.items.length;
      void refresh();
    } else if (target.id === "rank-prev") {
      state.rankingOffset = Math.max(0, page.offset - 25);
      void refresh();
    }
  });

  el("setup-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void createSession();
  });

  el("attach-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const id = (el("attach-id") as HTMLInputElement).value.trim();
    if (id) attach(id);
  });
}

function attach(sessionId: string): void {
  state = { ...initialState(), sessionId };
  const params = new URLSearchParams(window.location.search);
  params.set("session", sessionId);
  window.history.replaceState(null, "", `?${params}`);
  void refresh();
}

async function createSession(): Promise<void> {
  const datasetCsv = (el("dataset-csv") as HTMLTextAreaElement).value;
  const labelsCsv = (el("labels-csv") as HTMLTextAreaElement).value;
  const strategy = (el("strategy") as HTMLSelectElement).value;
  const budget = Number((el("budget") as HTMLInputElement).value) || 10;
  const iterations = Number((el("iterations") as HTMLInputElement).value) || 20;
  const epochs = Number((el("epochs") as HTMLInputElement).value) || 100;
  const seed = Number((el("seed") as HTMLInputElement).value) || 0;
  if (!datasetCsv.trim()) {
    state.lastError = "paste a dataset CSV first";
    draw();
    return;
  }
  try {
    const info = await client.uploadDataset(
      "pasted",
      datasetCsv,
      labelsCsv.trim() ? labelsCsv : undefined,
    );
    const created = await client.createSession(
      info.dataset_id,
      { strategy, budget, iterations, seed },
      { epochs, seed },
    );
    attach(created.session_id);
  } catch (err) {
    state.lastError = err instanceof Error ? err.message : String(err);
    draw();
  }
}

function boot(): void {
  attachHandlers();
  draw();
  const fromUrl = new URLSearchParams(window.location.search).get("session");
  if (fromUrl) attach(fromUrl);
}

boot();
