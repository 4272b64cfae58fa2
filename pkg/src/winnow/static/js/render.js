/**
 * HTML fragments for the dashboard. Pure string builders so the view
 * logic is testable without a browser; values are rendered exactly as
 * the server sent them.
 */
import { lineChartSvg } from "./chart.js";
import { labelingEnabled, selectedCount } from "./state.js";
export function esc(value) {
    return String(value)
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;");
}
export function fmtScore(value) {
    return value == null ? "-" : value.toFixed(4);
}
export function renderStatus(view, error) {
    if (!view) {
        return `<p class="muted">No session loaded.</p>`;
    }
    const badge = `<span class="phase phase-${esc(view.phase)}">${esc(view.phase)}</span>`;
    const err = error ? `<p class="error">${esc(error)}</p>` : "";
    const serverErr = view.error ? `<p class="error">server: ${esc(view.error)}</p>` : "";
    return `
    ${badge}
    <dl class="status-grid">
      <dt>session</dt><dd><code>${esc(view.session_id)}</code></dd>
      <dt>strategy</dt><dd>${esc(view.strategy)} / ${esc(view.metric)}</dd>
      <dt>iteration</dt><dd>${view.iteration} of ${view.max_iterations}</dd>
      <dt>oracle budget</dt><dd>${view.oracle_calls} used (${view.budget}/iteration)</dd>
      <dt>labeled</dt><dd>${view.labeled_normal} normal, ${view.labeled_anomalous} anomalous</dd>
      <dt>training pool</dt><dd>${view.train_pool} of ${view.rows} rows</dd>
    </dl>
    ${err}${serverErr}`;
}
function neighborHtml(kind, n) {
    if (!n) {
        return `<span class="muted">no ${esc(kind)} yet</span>`;
    }
    return `nearest ${esc(kind)}: <code>${esc(n.id)}</code> (${n.similarity.toFixed(3)})`;
}
export function renderCandidates(state) {
    const batch = state.batch;
    if (!batch || state.view?.phase !== "awaiting-labels") {
        const phase = state.view?.phase ?? "idle";
        return `<p class="muted">No pending queries (phase: ${esc(phase)}).</p>`;
    }
    const enabled = labelingEnabled(state);
    const cards = batch.candidates
        .map((c) => renderCandidateCard(c, state.selections[c.id], enabled))
        .join("");
    const chosen = selectedCount(state);
    const total = batch.candidates.length;
    const canSubmit = enabled && chosen > 0;
    const retry = state.queued
        ? `<button id="retry-labels" class="retry">retry failed submission</button>`
        : "";
    return `
    <p>Iteration ${batch.iteration}: ${total} row(s) above the error threshold
       (tau = ${fmtScore(batch.tau)}).</p>
    <div class="cards">${cards}</div>
    <div class="submit-row">
      <button id="submit-labels" ${canSubmit ? "" : "disabled"}>
        submit ${chosen} of ${total} label(s)
      </button>
      ${retry}
    </div>`;
}
export function renderCandidateCard(candidate, selection, enabled) {
    const features = candidate.top_features.map((f) => `<code>${esc(f)}</code>`).join(" ");
    const dis = enabled ? "" : "disabled";
    return `
    <article class="card" data-id="${esc(candidate.id)}">
      <header>
        <code class="row-id">${esc(candidate.id)}</code>
        <span class="score" title="anomaly score">${fmtScore(candidate.score)}</span>
        <span class="rank">#${candidate.rank}</span>
      </header>
      <p class="features">${candidate.active_count} active feature(s); top by attention:
        ${features || '<span class="muted">none</span>'}</p>
      <p class="neighbors">
        ${neighborHtml("anomaly", candidate.neighbors.anomaly)} ·
        ${neighborHtml("normal", candidate.neighbors.normal)}
      </p>
      <div class="label-buttons">
        <button class="label-normal ${selection === "normal" ? "chosen" : ""}"
                data-id="${esc(candidate.id)}" data-label="normal" ${dis}>normal</button>
        <button class="label-anomaly ${selection === "anomaly" ? "chosen" : ""}"
                data-id="${esc(candidate.id)}" data-label="anomaly" ${dis}>anomaly</button>
      </div>
    </article>`;
}
export function renderMetrics(metrics) {
    if (!metrics || metrics.series.length === 0) {
        return `<p class="muted">No iterations recorded yet.</p>`;
    }
    const points = metrics.series
        .filter((p) => p.ndcg != null)
        .map((p) => ({ x: p.iteration, y: p.ndcg }));
    const chart = points.length > 0
        ? lineChartSvg(points, { label: "ranking quality (nDCG) by iteration" })
        : `<p class="muted">Ground-truth labels were not registered; quality series unavailable.</p>`;
    const rows = metrics.series
        .map((p) => `
      <tr>
        <td>${p.iteration}</td>
        <td>${p.ndcg == null ? "-" : p.ndcg.toFixed(4)}</td>
        <td>${p.tau == null ? "-" : p.tau.toFixed(4)}</td>
        <td>${p.queried}</td>
        <td>${p.expanded}</td>
        <td>${p.prioritized}</td>
      </tr>`)
        .join("");
    const summary = metrics.summary
        ? `<p class="summary">max ${metrics.summary.max.toFixed(4)} ·
         mean ${metrics.summary.mean.toFixed(4)} ·
         median ${metrics.summary.median.toFixed(4)}</p>`
        : "";
    return `
    ${chart}${summary}
    <table class="series">
      <thead><tr><th>iter</th><th>nDCG</th><th>tau</th><th>queried</th>
        <th>expanded</th><th>prioritized</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}
export function renderRanking(page) {
    if (!page) {
        return `<p class="muted">No ranking yet.</p>`;
    }
    const rows = page.items
        .map((item) => {
        const label = item.oracle_label
            ? `<span class="tag tag-${esc(item.oracle_label)}">${esc(item.oracle_label)}</span>`
            : item.in_train_pool
                ? `<span class="tag tag-pool">pool</span>`
                : "";
        return `
      <tr>
        <td>${item.rank}</td>
        <td><code>${esc(item.id)}</code></td>
        <td>${fmtScore(item.score)}</td>
        <td>${label}</td>
      </tr>`;
    })
        .join("");
    const last = Math.min(page.offset + page.items.length, page.total);
    return `
    <table class="ranking">
      <thead><tr><th>rank</th><th>row</th><th>score</th><th></th></tr></thead>
      <tbody>${rows}</tbody>
    </table>
    <div class="pager">
      <button id="rank-prev" ${page.offset === 0 ? "disabled" : ""}>&laquo; prev</button>
      <span>${page.offset + 1}&ndash;${last} of ${page.total}</span>
      <button id="rank-next" ${last >= page.total ? "disabled" : ""}>next &raquo;</button>
    </div>`;
}
