"""Ranking-quality metrics and run summaries.

DCG uses the graded form ``sum (2^r - 1) / log2(i + 1)`` which, for the
binary relevance used here, reduces to ``sum 1 / log2(pos + 1)`` over
anomaly positions. nDCG divides by the ideal ordering's DCG and is
undefined (an error, never a silent 0) when the ranking contains no
anomaly.

A session's quality series is summarized by three statistics across the
S1 / S2 / hybrid strategies: the best max, the best mean, and the best
median. Medians of even-length series take the lower-middle element so
every reported summary is a realized score. Cross-method comparison
uses mean ranks per dataset (ties get the mean of their rank range),
averaged over datasets; lower is better.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata


class UndefinedMetricError(ValueError):
    """nDCG was requested for a ranking with no anomalies."""


def dcg(relevances) -> float:
    """``sum_i (2^{r_i} - 1) / log2(i + 1)`` over a ranked relevance list.

    Summed with `math.fsum` so the result is correctly rounded and
    independent of term order.
    """
    rel = np.asarray(list(relevances), dtype=np.float64)
    if rel.size == 0:
        return 0.0
    if not np.isin(rel, (0.0, 1.0)).all():
        raise ValueError("relevances must be binary (0 or 1)")
    positions = np.arange(1, rel.size + 1, dtype=np.float64)
    return math.fsum((2.0**rel - 1.0) / np.log2(positions + 1.0))


def ndcg(
    ranking: list[str], anomalies: set[str], cutoff: int | None = None
) -> float:
    """DCG of the ranking over the ideal DCG, optionally truncated at a cutoff.

    ``anomalies`` are the ground-truth positive ids; every other ranked id
    has relevance 0.
    """
    if not anomalies:
        raise UndefinedMetricError("nDCG is undefined with zero anomalies")
    if cutoff is not None and cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    rel = [1.0 if rid in anomalies else 0.0 for rid in ranking]
    n_hits = int(sum(rel))
    ideal = [1.0] * n_hits + [0.0] * (len(rel) - n_hits)
    if cutoff is not None:
        rel = rel[:cutoff]
        # the ideal ordering of the same list, truncated at the same cutoff
        ideal = ideal[:cutoff]
    denom = dcg(ideal)
    if denom == 0.0:
        raise UndefinedMetricError(
            "nDCG is undefined: no anomaly inside the evaluated prefix universe"
        )
    return dcg(rel) / denom


def median_lower(values) -> float:
    """Median that takes the lower-middle element for even lengths."""
    ordered = sorted(values)
    if not ordered:
        raise ValueError("median of an empty sequence is undefined")
    return float(ordered[(len(ordered) - 1) // 2])


def series_stats(values) -> dict[str, float]:
    values = list(values)
    if not values:
        raise ValueError("empty metric series")
    return {
        "max": float(max(values)),
        "mean": float(statistics.fmean(values)),
        "median": median_lower(values),
    }


def summarize(series_by_strategy: dict[str, list[float]]) -> dict[str, float]:
    """(best max, best mean, best median) across the given strategies' series."""
    if not series_by_strategy:
        raise ValueError("no series to summarize")
    per = {name: series_stats(vals) for name, vals in series_by_strategy.items()}
    return {
        "max_max": max(s["max"] for s in per.values()),
        "max_mean": max(s["mean"] for s in per.values()),
        "max_median": max(s["median"] for s in per.values()),
    }


def average_ranks(table: dict[str, dict[str, float]]) -> dict[str, float]:
    """Mean rank of each method across datasets (rank 1 = best score).

    ``table[method][dataset]`` must be complete over the union of
    datasets; ties within a dataset share the mean of their rank range.
    """
    methods = sorted(table)
    if not methods:
        raise ValueError("empty score table")
    datasets = sorted({ds for scores in table.values() for ds in scores})
    for m in methods:
        missing = [ds for ds in datasets if ds not in table[m]]
        if missing:
            raise ValueError(f"method {m!r} is missing datasets: {missing}")
    ranks = np.zeros(len(methods))
    for ds in datasets:
        scores = np.array([table[m][ds] for m in methods])
        ranks += rankdata(-scores, method="average")
    return {m: float(r / len(datasets)) for m, r in zip(methods, ranks)}


# ---------------------------------------------------------------------------
# run reports
# ---------------------------------------------------------------------------


@dataclass
class SeriesPoint:
    iteration: int
    ndcg: float | None
    tau: float | None
    queried: int
    wall_clock_s: float = 0.0


@dataclass
class RunReport:
    """A completed session (or several, for multi-strategy runs)."""

    config: dict
    series: dict[str, list[SeriesPoint]] = field(default_factory=dict)
    dataset_fingerprint: str = ""
    dataset_name: str = ""
    generated_at: str = ""

    def ndcg_series(self, strategy: str) -> list[float]:
        return [p.ndcg for p in self.series[strategy] if p.ndcg is not None]

    def strategy_stats(self) -> dict[str, dict[str, float]]:
        out = {}
        for name in self.series:
            vals = self.ndcg_series(name)
            if vals:
                out[name] = series_stats(vals)
        return out

    def summary(self) -> dict[str, float] | None:
        """Best-of summary over whichever strategies the report holds."""
        per = {name: self.ndcg_series(name) for name in self.series}
        per = {k: v for k, v in per.items() if v}
        return summarize(per) if per else None


def format_report(report: RunReport) -> str:
    """Human-readable structured text.

    Lines starting with ``#`` carry timestamps and timing and are the only
    non-deterministic content; everything else is byte-stable for a fixed
    seed and configuration.
    """
    lines: list[str] = []
    lines.append("# winnow run report")
    if report.generated_at:
        lines.append(f"# generated: {report.generated_at}")
    lines.append("[config]")
    for key in sorted(report.config):
        lines.append(f"{key} = {report.config[key]}")
    if report.dataset_name:
        lines.append(f"dataset = {report.dataset_name}")
    if report.dataset_fingerprint:
        lines.append(f"dataset_sha256 = {report.dataset_fingerprint}")
    lines.append("[series]")
    lines.append("iteration,strategy,ndcg,tau,queried_count")
    for strategy in sorted(report.series):
        for p in report.series[strategy]:
            ndcg_cell = f"{p.ndcg:.10f}" if p.ndcg is not None else ""
            tau_cell = f"{p.tau:.10f}" if p.tau is not None else ""
            lines.append(f"{p.iteration},{strategy},{ndcg_cell},{tau_cell},{p.queried}")
    for strategy in sorted(report.series):
        timings = ",".join(f"{p.wall_clock_s:.3f}" for p in report.series[strategy])
        lines.append(f"# timing_s {strategy}: {timings}")
    stats = report.strategy_stats()
    if stats:
        lines.append("[strategy_stats]")
        for name in sorted(stats):
            s = stats[name]
            lines.append(
                f"{name}: max={s['max']:.10f} mean={s['mean']:.10f} median={s['median']:.10f}"
            )
        summary = report.summary()
        lines.append("[summary]")
        lines.append(f"max_max = {summary['max_max']:.10f}")
        lines.append(f"max_mean = {summary['max_mean']:.10f}")
        lines.append(f"max_median = {summary['max_median']:.10f}")
    return "\n".join(lines) + "\n"


def write_report(report: RunReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_report(report))


def write_series_csv(report: RunReport, path) -> None:
    """Flat per-iteration table for external plotting."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,strategy,ndcg,tau,queried_count\n")
        for strategy in sorted(report.series):
            for p in report.series[strategy]:
                ndcg_cell = f"{p.ndcg:.10f}" if p.ndcg is not None else ""
                tau_cell = f"{p.tau:.10f}" if p.tau is not None else ""
                fh.write(f"{p.iteration},{strategy},{ndcg_cell},{tau_cell},{p.queried}\n")


def parse_report(text: str) -> RunReport:
    """Inverse of `format_report` (ignores ``#`` comment lines)."""
    config: dict = {}
    series: dict[str, list[SeriesPoint]] = {}
    dataset_name = ""
    fingerprint = ""
    section = None
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            section = line.strip("[]")
            continue
        if section == "config":
            key, _, value = line.partition(" = ")
            if key == "dataset":
                dataset_name = value
            elif key == "dataset_sha256":
                fingerprint = value
            else:
                config[key] = value
        elif section == "series":
            if line.startswith("iteration,"):
                continue
            it, strategy, ndcg_cell, tau_cell, queried = line.split(",")
            series.setdefault(strategy, []).append(
                SeriesPoint(
                    iteration=int(it),
                    ndcg=float(ndcg_cell) if ndcg_cell else None,
                    tau=float(tau_cell) if tau_cell else None,
                    queried=int(queried),
                )
            )
    return RunReport(
        config=config,
        series=series,
        dataset_name=dataset_name,
        dataset_fingerprint=fingerprint,
    )
