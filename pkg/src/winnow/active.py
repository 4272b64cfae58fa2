"""Similarity-guided active learning around the dual autoencoder.

One session owns a dataset, a model configuration, and a labeled-set
state. Iteration 0 is the pre-feedback baseline: the model is trained on
a small presumed-normal cold-start pool, every row is scored and ranked,
and ranking quality is recorded before any oracle contact. Each later
iteration selects the unlabeled rows whose anomaly score exceeds the
80th-percentile threshold (at most the per-iteration budget), asks the
oracle, and then applies the session's strategy:

* normal-expansion: rows similar to oracle-confirmed normals (above a
  per-anchor 80th-percentile similarity threshold) join the training
  pool as presumed normals, and the model is retrained;
* anomaly-prioritization: confirmed anomalies plus unlabeled rows
  similar to them are moved to the head of the ranking (no retraining);
* hybrid: both;
* passive: neither (the pure uncertainty-sampling ablation).

The session advances stepwise (``pending_queries`` / ``submit_labels``)
so a human oracle behind an HTTP boundary and the in-process simulated
oracle drive exactly the same machinery; `run_session` is the batch
driver. Every event is appended to a JSONL journal from which a session
can be replayed and verified.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, asdict, replace
from typing import Protocol

import numpy as np

from . import similarity as sim
from .data import ANOMALY, NORMAL, BinaryDataset, anomaly_ids, derive_seed, make_rng
from .model import DualAttentionAutoencoder, ModelConfig, train_model
from .ranking import RunReport, SeriesPoint, UndefinedMetricError, ndcg

STRATEGIES = ("passive", "s1", "s2", "hybrid")


class SessionError(RuntimeError):
    """The session was driven outside its phase contract."""


class Oracle(Protocol):
    def label(self, row_id: str) -> str: ...


class SimulatedOracle:
    """Answers from a ground-truth label map; answers never change."""

    def __init__(self, labels: dict[str, str]):
        self._labels = dict(labels)
        self.calls = 0

    def label(self, row_id: str) -> str:
        self.calls += 1
        return self._labels[row_id]


@dataclass(frozen=True)
class SessionConfig:
    strategy: str = "hybrid"
    iterations: int = 20  # max feedback rounds (records 1..iterations)
    budget: int = 10  # oracle queries per iteration
    error_percentile: float = 80.0
    sim_percentile: float = 80.0
    metric: str = "nm1"
    retrain_policy: str = "from-scratch"  # or "warm-start"
    ndcg_cutoff: int | None = None
    cold_start_fraction: float = 0.10
    seed: int = 0

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")
        for name in ("error_percentile", "sim_percentile"):
            v = getattr(self, name)
            if not (0.0 < v < 100.0):
                raise ValueError(f"{name} must lie in (0, 100), got {v}")
        if self.metric not in sim.METRICS:
            raise ValueError(f"metric must be one of {sim.METRICS}, got {self.metric!r}")
        if self.retrain_policy not in ("from-scratch", "warm-start"):
            raise ValueError(f"unknown retrain_policy: {self.retrain_policy!r}")
        if self.ndcg_cutoff is not None and self.ndcg_cutoff < 1:
            raise ValueError(f"ndcg_cutoff must be >= 1, got {self.ndcg_cutoff}")
        if not (0.0 < self.cold_start_fraction <= 1.0):
            raise ValueError(
                f"cold_start_fraction must lie in (0, 1], got {self.cold_start_fraction}"
            )
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")


@dataclass
class LabeledSets:
    """Training pool and oracle knowledge.

    ``train_pool`` may contain presumed normals (cold start, expansions)
    that the oracle has not confirmed; it never contains a confirmed
    anomaly. ``unlabeled`` means not oracle-labeled.
    """

    all_ids: list[str]
    train_pool: set[str] = field(default_factory=set)
    normal: set[str] = field(default_factory=set)
    anomalous: set[str] = field(default_factory=set)

    @property
    def unlabeled(self) -> list[str]:
        labeled = self.normal | self.anomalous
        return [rid for rid in self.all_ids if rid not in labeled]

    def record_answer(self, row_id: str, label: str) -> None:
        if row_id in self.normal or row_id in self.anomalous:
            raise SessionError(f"row {row_id!r} is already labeled")
        if label == NORMAL:
            self.normal.add(row_id)
            self.train_pool.add(row_id)
        elif label == ANOMALY:
            self.anomalous.add(row_id)
            self.train_pool.discard(row_id)
        else:
            raise ValueError(f"label must be {NORMAL!r} or {ANOMALY!r}, got {label!r}")

    def check(self) -> None:
        assert not (self.normal & self.anomalous)
        assert not (self.train_pool & self.anomalous)


@dataclass
class IterationRecord:
    iteration: int
    tau: float | None
    queried: list[tuple[str, str]]  # (row id, oracle answer), in query order
    rho_thresholds: dict[str, float]  # per normal anchor (strategy 1)
    xi_thresholds: dict[str, float]  # per anomaly anchor (strategy 2)
    expanded: list[str]  # presumed normals added by strategy 1
    priority: list[str]  # head of the ranking from strategy 2
    ranking_hash: str
    ndcg: float | None
    wall_clock_s: float = 0.0

    def to_json(self) -> dict:
        d = asdict(self)
        d["queried"] = [list(pair) for pair in self.queried]
        return d


def ranking_hash(ranking: list[str]) -> str:
    return hashlib.sha256("\x1f".join(ranking).encode()).hexdigest()


# ---------------------------------------------------------------------------
# pure selection / strategy operations
# ---------------------------------------------------------------------------


def select_candidates(
    scores: dict[str, float],
    unlabeled: list[str],
    percentile: float,
    budget: int,
) -> tuple[float | None, list[str]]:
    """Unlabeled rows scoring strictly above the percentile threshold.

    Returns the realized threshold and at most ``budget`` ids, ordered by
    descending score with ascending-id ties. ``(None, [])`` signals that
    no unlabeled rows remain.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if not unlabeled:
        return None, []
    values = [scores[rid] for rid in unlabeled]
    tau = sim.percentile_threshold(values, percentile)
    above = [rid for rid in unlabeled if scores[rid] > tau]
    above.sort(key=lambda rid: (-scores[rid], rid))
    return tau, above[:budget]


def strategy1_expand(
    normal_ids: set[str],
    unlabeled: list[str],
    dataset: BinaryDataset,
    metric: str,
    percentile: float,
) -> tuple[set[str], dict[str, float]]:
    """Unlabeled rows similar to any confirmed normal.

    Each anchor gets its own dynamic threshold: the given percentile of
    its similarity distribution over the unlabeled rows; rows at or above
    it are collected across anchors.
    """
    if not normal_ids or not unlabeled:
        return set(), {}
    rows = dataset.rows
    unl_idx = np.array([dataset.index_of(rid) for rid in unlabeled])
    expansion: set[str] = set()
    thresholds: dict[str, float] = {}
    for anchor in sorted(normal_ids):
        sims = sim.similarities(dataset.row_vector(anchor), rows, metric)[unl_idx]
        rho = sim.percentile_threshold(sims, percentile)
        thresholds[anchor] = rho
        expansion.update(
            unlabeled[int(j)] for j in np.flatnonzero(sims >= rho)
        )
    return expansion, thresholds


def strategy2_prioritize(
    anomaly_ids_: set[str],
    unlabeled: list[str],
    dataset: BinaryDataset,
    metric: str,
    percentile: float,
    scores: dict[str, float],
) -> tuple[list[str], dict[str, float]]:
    """Priority head: confirmed anomalies, then unlabeled rows similar to them.

    Anchor similarity thresholds are per-anchor percentiles, as in the
    normal expansion. Confirmed anomalies are ordered by descending score;
    the similar tail is ordered by descending score as well. Duplicates
    keep their first occurrence.
    """
    if not anomaly_ids_:
        return [], {}
    thresholds: dict[str, float] = {}
    similar: set[str] = set()
    if unlabeled:
        rows = dataset.rows
        unl_idx = np.array([dataset.index_of(rid) for rid in unlabeled])
        for anchor in sorted(anomaly_ids_):
            sims = sim.similarities(dataset.row_vector(anchor), rows, metric)[unl_idx]
            xi = sim.percentile_threshold(sims, percentile)
            thresholds[anchor] = xi
            similar.update(unlabeled[int(j)] for j in np.flatnonzero(sims >= xi))
    by_score = lambda rid: (-scores[rid], rid)
    head = sorted(anomaly_ids_, key=by_score)
    tail = sorted(similar - set(head), key=by_score)
    return head + tail, thresholds


def build_ranking(
    strategy: str,
    scores: dict[str, float],
    all_ids: list[str],
    priority: list[str],
) -> list[str]:
    """Full ranking: the priority head (anomaly-prioritizing strategies),
    then every remaining id by descending score with ascending-id ties."""
    head = list(priority) if strategy in ("s2", "hybrid") else []
    head_set = set(head)
    rest = [rid for rid in all_ids if rid not in head_set]
    rest.sort(key=lambda rid: (-scores[rid], rid))
    return head + rest


# ---------------------------------------------------------------------------
# the session
# ---------------------------------------------------------------------------


class Journal:
    """Append-only JSONL event log; ``None`` path keeps events in memory."""

    def __init__(self, path=None):
        self.path = path
        self.events: list[dict] = []
        if path is not None:
            self._fh = open(path, "w", encoding="utf-8")
        else:
            self._fh = None

    def append(self, event: dict) -> None:
        self.events.append(event)
        if self._fh is not None:
            self._fh.write(json.dumps(event, sort_keys=True) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


class ActiveSession:
    """Stepwise driver of the iteration loop.

    Phases: ``training`` (cold start or retrain in progress), then
    ``awaiting-labels`` with a nonempty pending query list, repeating
    until ``complete``. ``start`` runs the cold-start phase; labels flow
    in through `submit_labels`.
    """

    def __init__(
        self,
        dataset: BinaryDataset,
        session_config: SessionConfig,
        model_config: ModelConfig,
        truth_labels: dict[str, str] | None = None,
        journal_path=None,
    ):
        session_config.validate()
        self.dataset = dataset
        self.config = session_config
        self.model_config = model_config.resolve()
        if self.model_config.input_dim != dataset.d:
            raise ValueError(
                f"model input_dim {self.model_config.input_dim} does not match "
                f"dataset width {dataset.d}"
            )
        self.truth_anomalies = anomaly_ids(truth_labels) if truth_labels else None
        if self.truth_anomalies is not None and not self.truth_anomalies:
            raise UndefinedMetricError(
                "ground-truth labels contain no anomaly; ranking quality undefined"
            )
        self.journal = Journal(journal_path)
        self.labeled = LabeledSets(all_ids=list(dataset.ids))
        self.records: list[IterationRecord] = []
        self.model: DualAttentionAutoencoder | None = None
        self.scores: dict[str, float] = {}
        self.ranking: list[str] = []
        self.phase = "training"
        self.iteration = 0  # index of the next record to produce
        self.pending: list[str] = []
        self.pending_tau: float | None = None
        self._answers: dict[str, str] = {}
        self.oracle_calls = 0

    # -- helpers ------------------------------------------------------------

    def _train(self, iteration: int) -> None:
        pool = sorted(self.labeled.train_pool)
        rows = self.dataset.subset(pool).to_array()
        cfg = self.model_config
        if iteration > 0:
            cfg = replace(cfg, seed=derive_seed(self.config.seed, iteration))
            if self.config.retrain_policy == "warm-start":
                self.model, _ = train_model(rows, cfg, init_from=self.model)
                return
        self.model, _ = train_model(rows, cfg)

    def _rescore(self) -> None:
        values = self.model.score_all(self.dataset.to_array())
        self.scores = {rid: float(v) for rid, v in zip(self.dataset.ids, values)}

    def _evaluate(self, ranking: list[str]) -> float | None:
        if self.truth_anomalies is None:
            return None
        return ndcg(ranking, self.truth_anomalies, self.config.ndcg_cutoff)

    def _record(self, rec: IterationRecord) -> None:
        self.records.append(rec)
        self.journal.append({"event": "iteration", **rec.to_json()})

    def _prepare_queries(self) -> None:
        """Compute the next pending batch, or complete the session."""
        candidates: list[str] = []
        tau = None
        if self.iteration <= self.config.iterations:
            tau, candidates = select_candidates(
                self.scores,
                self.labeled.unlabeled,
                self.config.error_percentile,
                self.config.budget,
            )
        if not candidates:
            self.phase = "complete"
            self.pending = []
            self.journal.append({"event": "complete", "iterations": len(self.records) - 1})
            self.journal.close()
            return
        self.pending = candidates
        self.pending_tau = tau
        self._answers = {}
        self.phase = "awaiting-labels"

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        """Cold start: sample the presumed-normal pool, train, record the
        pre-feedback baseline, and open the first query batch."""
        if self.model is not None:
            raise SessionError("session already started")
        n = len(self.dataset)
        if n == 0:
            raise ValueError("empty dataset")
        # a fixed tag keeps the cold-start stream distinct from retrain seeds
        rng = make_rng((self.config.seed, 0xC01D))
        size = max(1, int(round(n * self.config.cold_start_fraction)))
        chosen = rng.choice(n, size=min(size, n), replace=False)
        self.labeled.train_pool = {self.dataset.ids[i] for i in sorted(chosen)}
        self.journal.append(
            {
                "event": "start",
                "session_config": asdict(self.config),
                "model_config": json.loads(self.model_config.to_json()),
                "dataset_sha256": self.dataset.fingerprint(),
                "cold_start": sorted(self.labeled.train_pool),
            }
        )
        t0 = time.perf_counter()
        self._train(iteration=0)
        self._rescore()
        self.ranking = build_ranking("passive", self.scores, self.dataset.ids, [])
        rec = IterationRecord(
            iteration=0,
            tau=None,
            queried=[],
            rho_thresholds={},
            xi_thresholds={},
            expanded=[],
            priority=[],
            ranking_hash=ranking_hash(self.ranking),
            ndcg=self._evaluate(self.ranking),
            wall_clock_s=time.perf_counter() - t0,
        )
        self._record(rec)
        self.iteration = 1
        self._prepare_queries()

    def pending_queries(self) -> list[str]:
        if self.phase != "awaiting-labels":
            raise SessionError(f"no pending queries in phase {self.phase!r}")
        return [rid for rid in self.pending if rid not in self._answers]

    def submit_labels(self, answers: dict[str, str], advance: bool = True) -> bool:
        """Record oracle answers for pending rows.

        Returns True when the batch became complete. With ``advance``
        (the default) the strategy step runs immediately; the service
        passes ``advance=False`` and calls `advance` from a worker so
        retraining stays off the request path.
        """
        if self.phase != "awaiting-labels":
            raise SessionError(f"cannot submit labels in phase {self.phase!r}")
        if not answers:
            raise ValueError("no labels submitted")
        pending = set(self.pending)
        for rid, label in answers.items():
            if rid not in pending:
                raise SessionError(f"row {rid!r} is not in the pending query list")
            if rid in self._answers:
                raise SessionError(f"row {rid!r} was already labeled")
            if label not in (NORMAL, ANOMALY):
                raise ValueError(f"label must be {NORMAL!r} or {ANOMALY!r}, got {label!r}")
        for rid, label in answers.items():
            self._answers[rid] = label
            self.oracle_calls += 1
        self.journal.append(
            {"event": "labels", "iteration": self.iteration, "answers": dict(sorted(answers.items()))}
        )
        complete = len(self._answers) == len(self.pending)
        if complete:
            self.phase = "retraining"
            if advance:
                self.advance()
        return complete

    def advance(self) -> None:
        """Run the strategy step for a fully-labeled batch and open the
        next iteration (or complete the session)."""
        if self.phase != "retraining":
            raise SessionError(f"cannot advance in phase {self.phase!r}")
        self._finish_iteration()

    def _finish_iteration(self) -> None:
        t0 = time.perf_counter()
        queried = [(rid, self._answers[rid]) for rid in self.pending]
        for rid, label in queried:
            self.labeled.record_answer(rid, label)
        self.labeled.check()

        cfg = self.config
        expanded: list[str] = []
        rho_thresholds: dict[str, float] = {}
        priority: list[str] = []
        xi_thresholds: dict[str, float] = {}
        unlabeled = self.labeled.unlabeled
        if cfg.strategy in ("s1", "hybrid"):
            expansion, rho_thresholds = strategy1_expand(
                self.labeled.normal, unlabeled, self.dataset, cfg.metric, cfg.sim_percentile
            )
            expansion -= self.labeled.train_pool
            expanded = sorted(expansion)
            self.labeled.train_pool.update(expansion)
            self._train(iteration=self.iteration)
        if cfg.strategy in ("s2", "hybrid"):
            priority, xi_thresholds = strategy2_prioritize(
                self.labeled.anomalous,
                unlabeled,
                self.dataset,
                cfg.metric,
                cfg.sim_percentile,
                self.scores,
            )
        self.ranking = build_ranking(cfg.strategy, self.scores, self.dataset.ids, priority)
        rec = IterationRecord(
            iteration=self.iteration,
            tau=self.pending_tau,
            queried=queried,
            rho_thresholds=rho_thresholds,
            xi_thresholds=xi_thresholds,
            expanded=expanded,
            priority=priority,
            ranking_hash=ranking_hash(self.ranking),
            ndcg=self._evaluate(self.ranking),
            wall_clock_s=time.perf_counter() - t0,
        )
        self._record(rec)
        self.iteration += 1
        if cfg.strategy in ("s1", "hybrid"):
            self._rescore()  # retrained model drives the next iteration
        self._prepare_queries()

    # -- batch driving ------------------------------------------------------

    def run(self, oracle: Oracle) -> None:
        """Drive the session to completion with a synchronous oracle."""
        if self.model is None:
            self.start()
        while self.phase == "awaiting-labels":
            batch = {rid: oracle.label(rid) for rid in self.pending_queries()}
            self.submit_labels(batch)
        if self.phase != "complete":
            raise SessionError(f"session stalled in phase {self.phase!r}")

    def report(self, dataset_name: str = "", generated_at: str = "") -> RunReport:
        points = [
            SeriesPoint(
                iteration=r.iteration,
                ndcg=r.ndcg,
                tau=r.tau,
                queried=len(r.queried),
                wall_clock_s=r.wall_clock_s,
            )
            for r in self.records
        ]
        config = {
            "strategy": self.config.strategy,
            "iterations": self.config.iterations,
            "budget": self.config.budget,
            "error_percentile": self.config.error_percentile,
            "sim_percentile": self.config.sim_percentile,
            "metric": self.config.metric,
            "retrain_policy": self.config.retrain_policy,
            "ndcg_cutoff": self.config.ndcg_cutoff,
            "cold_start_fraction": self.config.cold_start_fraction,
            "session_seed": self.config.seed,
            "model": self.model_config.to_json(),
        }
        return RunReport(
            config=config,
            series={self.config.strategy: points},
            dataset_fingerprint=self.dataset.fingerprint(),
            dataset_name=dataset_name,
            generated_at=generated_at,
        )


def run_session(
    dataset: BinaryDataset,
    oracle: Oracle | dict[str, str],
    session_config: SessionConfig,
    model_config: ModelConfig,
    truth_labels: dict[str, str] | None = None,
    journal_path=None,
) -> ActiveSession:
    """Run a full session with a synchronous oracle and return it.

    ``oracle`` may be a ground-truth label map, in which case it also
    serves as the evaluation labels unless ``truth_labels`` overrides.
    """
    if isinstance(oracle, dict):
        if truth_labels is None:
            truth_labels = oracle
        oracle = SimulatedOracle(oracle)
    session = ActiveSession(
        dataset, session_config, model_config, truth_labels, journal_path
    )
    session.run(oracle)
    return session


def replay_journal(path, dataset: BinaryDataset, truth_labels=None) -> ActiveSession:
    """Re-run a journaled session, feeding back its recorded answers, and
    verify the regenerated iteration records match the journal."""
    with open(path, encoding="utf-8") as fh:
        events = [json.loads(line) for line in fh if line.strip()]
    start = next(e for e in events if e["event"] == "start")
    if start["dataset_sha256"] != dataset.fingerprint():
        raise ValueError("journal was recorded against a different dataset")
    session_config = SessionConfig(**start["session_config"])
    model_config = ModelConfig.from_json(json.dumps(start["model_config"]))
    session = ActiveSession(dataset, session_config, model_config, truth_labels)
    session.start()
    answers_by_iteration: dict[int, dict[str, str]] = {}
    for e in events:
        if e["event"] == "labels":
            answers_by_iteration.setdefault(e["iteration"], {}).update(e["answers"])
    while session.phase == "awaiting-labels":
        answers = answers_by_iteration.get(session.iteration)
        if answers is None:
            break  # journal ends mid-session; resume from here
        session.submit_labels({rid: answers[rid] for rid in session.pending_queries()})
    recorded = [e for e in events if e["event"] == "iteration"]
    for rec, expected in zip(session.records, recorded):
        if rec.ranking_hash != expected["ranking_hash"]:
            raise ValueError(
                f"replay diverged at iteration {rec.iteration}: ranking hash mismatch"
            )
    return session
