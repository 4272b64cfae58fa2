"""JSON-over-HTTP triage service hosting interactive labeling sessions.

A human oracle works through the browser UI served at ``/``: datasets
are registered once (optionally with ground-truth labels, which enable
ranking-quality metrics), sessions are created against them, and the
analyst labels the pending query batch while the service retrains and
re-ranks in the background. Clients poll the session phase; nothing is
pushed.

Long steps (cold-start training, per-iteration retraining) run in a
worker thread per session. All session state is guarded by one lock per
session: reads take a consistent snapshot, label submission is
serialized, and distinct sessions never share mutable state. Errors use
a uniform ``{code, message, detail}`` body.
"""

from __future__ import annotations

import io
import threading
import uuid
from dataclasses import asdict, fields
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .active import ActiveSession, SessionConfig, SessionError
from .data import (
    ANOMALY,
    NORMAL,
    BinaryDataset,
    DataError,
    anomaly_ids,
    parse_dataset_csv,
    parse_labels_csv,
    summarize,
)
from .model import ModelConfig
from .ranking import UndefinedMetricError, write_report, write_series_csv
from .similarity import similarities

MAX_UPLOAD_BYTES = 32 * 1024 * 1024  # documented upload cap
TOP_FEATURES = 10


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, detail: str = ""):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail


class DatasetUpload(BaseModel):
    name: str = "dataset"
    dataset_csv: str
    labels_csv: str | None = None


class SessionRequest(BaseModel):
    dataset_id: str
    session: dict = Field(default_factory=dict)
    model: dict = Field(default_factory=dict)


class LabelSubmission(BaseModel):
    labels: dict[str, str]


class DatasetEntry:
    def __init__(self, name: str, dataset: BinaryDataset, labels: dict[str, str] | None):
        self.name = name
        self.dataset = dataset
        self.labels = labels


class SessionHandle:
    """One live session: the engine, its lock, and its worker thread."""

    def __init__(self, session: ActiveSession, dataset_entry: DatasetEntry, state_dir: Path | None):
        self.session = session
        self.dataset_entry = dataset_entry
        self.lock = threading.RLock()
        self.worker: threading.Thread | None = None
        self.error: str | None = None
        self.state_dir = state_dir

    def _run(self, step) -> None:
        try:
            step()
            with self.lock:
                if self.session.phase == "complete" and self.state_dir is not None:
                    report = self.session.report(
                        dataset_name=self.dataset_entry.name,
                        generated_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
                    )
                    write_report(report, self.state_dir / "report.txt")
                    write_series_csv(report, self.state_dir / "series.csv")
        except Exception as exc:  # noqa: BLE001 - surfaced through the API
            with self.lock:
                self.error = f"{type(exc).__name__}: {exc}"
                self.session.phase = "failed"

    def spawn(self, step) -> None:
        self.worker = threading.Thread(target=self._run, args=(step,), daemon=True)
        self.worker.start()

    def join(self, timeout: float | None = None) -> None:
        if self.worker is not None:
            self.worker.join(timeout)


def _session_config(raw: dict) -> SessionConfig:
    allowed = {f.name for f in fields(SessionConfig)}
    unknown = set(raw) - allowed
    if unknown:
        raise ApiError(400, "invalid_config", f"unknown session fields: {sorted(unknown)}")
    try:
        cfg = SessionConfig(**raw)
        cfg.validate()
    except (TypeError, ValueError) as exc:
        raise ApiError(400, "invalid_config", str(exc)) from exc
    return cfg


def _model_config(raw: dict, input_dim: int) -> ModelConfig:
    allowed = {f.name for f in fields(ModelConfig)} - {"input_dim"}
    unknown = set(raw) - allowed
    if unknown:
        raise ApiError(400, "invalid_config", f"unknown model fields: {sorted(unknown)}")
    if "hidden_layers" in raw and raw["hidden_layers"] is not None:
        raw = dict(raw, hidden_layers=tuple(raw["hidden_layers"]))
    try:
        return ModelConfig(input_dim=input_dim, **raw).resolve()
    except (TypeError, ValueError) as exc:
        raise ApiError(400, "invalid_config", str(exc)) from exc


def create_app(state_dir: str | None = None, max_upload_bytes: int = MAX_UPLOAD_BYTES) -> FastAPI:
    app = FastAPI(title="winnow triage service", version="0.1.0")
    datasets: dict[str, DatasetEntry] = {}
    sessions: dict[str, SessionHandle] = {}
    app.state.datasets = datasets
    app.state.sessions = sessions
    root_dir = Path(state_dir) if state_dir else None
    if root_dir is not None:
        root_dir.mkdir(parents=True, exist_ok=True)

    @app.exception_handler(ApiError)
    async def handle_api_error(_: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": exc.message, "detail": exc.detail},
        )

    def get_dataset(dataset_id: str) -> DatasetEntry:
        try:
            return datasets[dataset_id]
        except KeyError:
            raise ApiError(404, "unknown_dataset", f"no dataset {dataset_id!r}") from None

    def get_handle(session_id: str) -> SessionHandle:
        try:
            return sessions[session_id]
        except KeyError:
            raise ApiError(404, "unknown_session", f"no session {session_id!r}") from None

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "datasets": len(datasets), "sessions": len(sessions)}

    @app.post("/datasets", status_code=201)
    def upload_dataset(body: DatasetUpload):
        if len(body.dataset_csv) > max_upload_bytes:
            raise ApiError(
                413, "too_large",
                f"dataset exceeds the {max_upload_bytes} byte upload cap",
            )
        try:
            dataset = parse_dataset_csv(io.StringIO(body.dataset_csv), origin=body.name)
            labels = None
            if body.labels_csv is not None:
                labels = parse_labels_csv(
                    io.StringIO(body.labels_csv), dataset, origin=f"{body.name} labels"
                )
        except DataError as exc:
            raise ApiError(400, "bad_upload", str(exc)) from exc
        dataset_id = f"ds-{uuid.uuid4().hex[:12]}"
        datasets[dataset_id] = DatasetEntry(body.name, dataset, labels)
        info = {
            "dataset_id": dataset_id,
            "name": body.name,
            **summarize(dataset, labels),
            "has_labels": labels is not None,
        }
        return info

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionRequest):
        entry = get_dataset(body.dataset_id)
        session_cfg = _session_config(body.session)
        model_cfg = _model_config(body.model, entry.dataset.d)
        session_dir = None
        if root_dir is not None:
            session_dir = root_dir / f"session-{uuid.uuid4().hex[:12]}"
            session_dir.mkdir(parents=True, exist_ok=True)
        try:
            session = ActiveSession(
                entry.dataset,
                session_cfg,
                model_cfg,
                truth_labels=entry.labels,
                journal_path=(session_dir / "journal.jsonl") if session_dir else None,
            )
        except (UndefinedMetricError, ValueError) as exc:
            raise ApiError(400, "invalid_config", str(exc)) from exc
        session_id = f"s-{uuid.uuid4().hex[:12]}"
        handle = SessionHandle(session, entry, session_dir)
        sessions[session_id] = handle
        handle.spawn(session.start)
        return {"session_id": session_id, "phase": "training"}

    def session_view(session_id: str, handle: SessionHandle) -> dict:
        s = handle.session
        return {
            "session_id": session_id,
            "phase": s.phase,
            "error": handle.error,
            "iteration": max(0, s.iteration - 1),
            "max_iterations": s.config.iterations,
            "budget": s.config.budget,
            "oracle_calls": s.oracle_calls,
            "strategy": s.config.strategy,
            "metric": s.config.metric,
            "pending_count": len(s.pending) - len(s._answers) if s.phase == "awaiting-labels" else 0,
            "labeled_normal": len(s.labeled.normal),
            "labeled_anomalous": len(s.labeled.anomalous),
            "train_pool": len(s.labeled.train_pool),
            "rows": len(s.dataset.ids),
            "has_truth": s.truth_anomalies is not None,
            "session_config": asdict(s.config),
        }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        handle = get_handle(session_id)
        with handle.lock:
            return session_view(session_id, handle)

    @app.get("/sessions/{session_id}/candidates")
    def get_candidates(session_id: str):
        handle = get_handle(session_id)
        with handle.lock:
            s = handle.session
            if s.phase != "awaiting-labels":
                raise ApiError(
                    409, "wrong_phase",
                    f"no candidates in phase {s.phase!r}",
                    detail="poll the session until phase is awaiting-labels",
                )
            dataset = s.dataset
            rank_of = {rid: i + 1 for i, rid in enumerate(s.ranking)}
            items = []
            for rid in s.pending_queries():
                row = dataset.row_vector(rid)
                mask = s.model.attention_mask(row.to_bits().astype(float))
                active = row.active_indices()
                top = sorted(active, key=lambda j: -mask[j])[:TOP_FEATURES]
                sims_all = similarities(row, dataset.rows, s.config.metric)
                neighbors = {}
                for kind, pool in (("normal", s.labeled.normal), ("anomaly", s.labeled.anomalous)):
                    if pool:
                        pool_ids = sorted(pool)
                        sims = [float(sims_all[dataset.index_of(p)]) for p in pool_ids]
                        best = max(range(len(pool_ids)), key=lambda i: (sims[i], pool_ids[i]))
                        neighbors[kind] = {"id": pool_ids[best], "similarity": sims[best]}
                    else:
                        neighbors[kind] = None
                items.append(
                    {
                        "id": rid,
                        "score": s.scores[rid],
                        "rank": rank_of[rid],
                        "top_features": [dataset.feature_names[j] for j in top],
                        "active_count": int(row.popcount),
                        "neighbors": neighbors,
                    }
                )
            return {"iteration": s.iteration, "tau": s.pending_tau, "candidates": items}

    @app.post("/sessions/{session_id}/labels")
    def submit_labels(session_id: str, body: LabelSubmission):
        handle = get_handle(session_id)
        with handle.lock:
            s = handle.session
            bad = {v for v in body.labels.values() if v not in (NORMAL, ANOMALY)}
            if bad:
                raise ApiError(
                    400, "bad_label",
                    f"labels must be {NORMAL!r} or {ANOMALY!r}, got {sorted(bad)}",
                )
            try:
                complete = s.submit_labels(dict(body.labels), advance=False)
            except SessionError as exc:
                raise ApiError(409, "label_conflict", str(exc)) from exc
            if complete:
                handle.spawn(s.advance)
            return {
                "accepted": len(body.labels),
                "remaining": len(s.pending) - len(s._answers) if not complete else 0,
                "phase": s.phase,
            }

    @app.get("/sessions/{session_id}/metrics")
    def get_metrics(session_id: str):
        handle = get_handle(session_id)
        with handle.lock:
            s = handle.session
            series = [
                {
                    "iteration": rec.iteration,
                    "ndcg": rec.ndcg,
                    "tau": rec.tau,
                    "queried": len(rec.queried),
                    "expanded": len(rec.expanded),
                    "prioritized": len(rec.priority),
                }
                for rec in s.records
            ]
            values = [rec.ndcg for rec in s.records if rec.ndcg is not None]
            summary = None
            if values:
                ordered = sorted(values)
                summary = {
                    "max": max(values),
                    "mean": sum(values) / len(values),
                    "median": ordered[(len(ordered) - 1) // 2],
                }
            return {"strategy": s.config.strategy, "series": series, "summary": summary}

    @app.get("/sessions/{session_id}/ranking")
    def get_ranking(session_id: str, offset: int = 0, limit: int = 50):
        handle = get_handle(session_id)
        if offset < 0 or limit < 1 or limit > 1000:
            raise ApiError(400, "bad_page", "offset must be >= 0 and 1 <= limit <= 1000")
        with handle.lock:
            s = handle.session
            page = s.ranking[offset : offset + limit]
            items = []
            for i, rid in enumerate(page):
                label = None
                if rid in s.labeled.anomalous:
                    label = ANOMALY
                elif rid in s.labeled.normal:
                    label = NORMAL
                items.append(
                    {
                        "rank": offset + i + 1,
                        "id": rid,
                        "score": s.scores.get(rid),
                        "oracle_label": label,
                        "in_train_pool": rid in s.labeled.train_pool,
                    }
                )
            return {"total": len(s.ranking), "offset": offset, "items": items}

    static_dir = Path(__file__).parent / "static"
    if static_dir.is_dir() and (static_dir / "index.html").exists():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    else:
        @app.get("/")
        def index():
            return JSONResponse(
                {"code": "no_ui", "message": "UI assets not built", "detail": "see frontend/"}
            )

    return app
