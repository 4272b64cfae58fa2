/** DOM wiring and the polling loop. Logic lives in state.ts / render.ts. */
import { ApiError, WinnowClient } from "./api.js";
import { applyCandidates, applyMetrics, applyRanking, applySession, beginSubmit, initialState, pollIntervalMs, retryPayload, select, submitFailed, submitSucceeded, } from "./state.js";
import { renderCandidates, renderMetrics, renderRanking, renderStatus } from "./render.js";
const client = new WinnowClient("");
let state = initialState();
let pollTimer;
function el(id) {
    const node = document.getElementById(id);
    if (!node)
        throw new Error(`missing element #${id}`);
    return node;
}
function draw() {
    el("status").innerHTML = renderStatus(state.view, state.lastError);
    el("candidates").innerHTML = renderCandidates(state);
    el("metrics").innerHTML = renderMetrics(state.metrics);
    el("ranking").innerHTML = renderRanking(state.ranking);
}
async function refresh() {
    const sessionId = state.sessionId;
    if (!sessionId)
        return;
    try {
        const view = await client.session(sessionId);
        state = applySession(state, view);
        if (view.phase === "awaiting-labels" && !state.submitting) {
            state = applyCandidates(state, await client.candidates(sessionId));
        }
        state = applyMetrics(state, await client.metrics(sessionId));
        state = applyRanking(state, await client.ranking(sessionId, state.rankingOffset, 25));
        state.lastError = null;
    }
    catch (err) {
        state = { ...state, lastError: err instanceof Error ? err.message : String(err) };
    }
    draw();
    schedule();
}
function schedule() {
    if (pollTimer !== undefined)
        window.clearTimeout(pollTimer);
    pollTimer = window.setTimeout(() => void refresh(), pollIntervalMs(state));
}
async function submitSelections(payload) {
    const sessionId = state.sessionId;
    if (!sessionId || Object.keys(payload).length === 0)
        return;
    state = beginSubmit(state);
    draw();
    try {
        const ack = await client.submitLabels(sessionId, payload);
        state = submitSucceeded(state, ack.phase);
    }
    catch (err) {
        if (err instanceof ApiError && err.status === 409) {
            // conflict: refresh will reconcile; drop nothing silently
            state = submitFailed(state, `${err.message} (${err.detail || "conflict"})`);
        }
        else {
            state = submitFailed(state, err instanceof Error ? err.message : String(err));
        }
    }
    draw();
    void refresh();
}
function attachHandlers() {
    el("candidates").addEventListener("click", (event) => {
        const target = event.target;
        if (target.matches("button[data-label]")) {
            const id = target.dataset.id;
            const label = target.dataset.label;
            state = select(state, id, label);
            draw();
        }
        else if (target.id === "submit-labels") {
            void submitSelections({ ...state.selections });
        }
        else if (target.id === "retry-labels") {
            const queued = retryPayload(state);
            if (queued)
                void submitSelections(queued);
        }
    });
    el("ranking").addEventListener("click", (event) => {
        const target = event.target;
        const page = state.ranking;
        if (!page || !state.sessionId)
            return;
        if (target.id === "rank-next") {
            state.rankingOffset = page.offset + page.items.length;
            void refresh();
        }
        else if (target.id === "rank-prev") {
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
        const id = el("attach-id").value.trim();
        if (id)
            attach(id);
    });
}
function attach(sessionId) {
    state = { ...initialState(), sessionId };
    const params = new URLSearchParams(window.location.search);
    params.set("session", sessionId);
    window.history.replaceState(null, "", `?${params}`);
    void refresh();
}
async function createSession() {
    const datasetCsv = el("dataset-csv").value;
    const labelsCsv = el("labels-csv").value;
    const strategy = el("strategy").value;
    const budget = Number(el("budget").value) || 10;
    const iterations = Number(el("iterations").value) || 20;
    const epochs = Number(el("epochs").value) || 100;
    const seed = Number(el("seed").value) || 0;
    if (!datasetCsv.trim()) {
        state.lastError = "paste a dataset CSV first";
        draw();
        return;
    }
    try {
        const info = await client.uploadDataset("pasted", datasetCsv, labelsCsv.trim() ? labelsCsv : undefined);
        const created = await client.createSession(info.dataset_id, { strategy, budget, iterations, seed }, { epochs, seed });
        attach(created.session_id);
    }
    catch (err) {
        state.lastError = err instanceof Error ? err.message : String(err);
        draw();
    }
}
function boot() {
    attachHandlers();
    draw();
    const fromUrl = new URLSearchParams(window.location.search).get("session");
    if (fromUrl)
        attach(fromUrl);
}
boot();
