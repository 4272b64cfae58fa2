/**
 * Typed client for the triage service JSON API.
 *
 * Every model quantity shown in the UI (scores, similarities, nDCG)
 * comes from these payloads verbatim; the client never recomputes them.
 */
export class ApiError extends Error {
    constructor(status, body) {
        super(body.message);
        this.status = status;
        this.code = body.code;
        this.detail = body.detail ?? "";
    }
}
async function request(url, init) {
    const resp = await fetch(url, {
        headers: { "content-type": "application/json" },
        ...init,
    });
    const text = await resp.text();
    const body = text ? JSON.parse(text) : {};
    if (!resp.ok) {
        throw new ApiError(resp.status, body);
    }
    return body;
}
export class WinnowClient {
    constructor(baseUrl = "") {
        this.baseUrl = baseUrl;
    }
    url(path) {
        return `${this.baseUrl}${path}`;
    }
    health() {
        return request(this.url("/healthz"));
    }
    uploadDataset(name, datasetCsv, labelsCsv) {
        return request(this.url("/datasets"), {
            method: "POST",
            body: JSON.stringify({
                name,
                dataset_csv: datasetCsv,
                labels_csv: labelsCsv ?? null,
            }),
        });
    }
    createSession(datasetId, session = {}, model = {}) {
        return request(this.url("/sessions"), {
            method: "POST",
            body: JSON.stringify({ dataset_id: datasetId, session, model }),
        });
    }
    session(id) {
        return request(this.url(`/sessions/${id}`));
    }
    candidates(id) {
        return request(this.url(`/sessions/${id}/candidates`));
    }
    submitLabels(id, labels) {
        return request(this.url(`/sessions/${id}/labels`), {
            method: "POST",
            body: JSON.stringify({ labels }),
        });
    }
    metrics(id) {
        return request(this.url(`/sessions/${id}/metrics`));
    }
    ranking(id, offset = 0, limit = 50) {
        return request(this.url(`/sessions/${id}/ranking?offset=${offset}&limit=${limit}`));
    }
}
