"""Ranking metrics: DCG, nDCG, summaries, average ranks, report round trips."""

import itertools
import math

import numpy as np
import pytest

from winnow.ranking import (
    RunReport,
    SeriesPoint,
    UndefinedMetricError,
    average_ranks,
    dcg,
    format_report,
    median_lower,
    ndcg,
    parse_report,
    summarize,
)


def reference_ndcg(ranking, anomalies, cutoff=None):
    """Direct formula evaluation, independent of the library path."""
    rel = [1 if r in anomalies else 0 for r in ranking]
    ideal = sorted(rel, reverse=True)
    if cutoff is not None:
        rel, ideal = rel[:cutoff], ideal[:cutoff]

    def score(values):
        return sum((2**v - 1) / math.log2(i + 2) for i, v in enumerate(values))

    return score(rel) / score(ideal)


class TestDcg:
    def test_all_zeros(self):
        assert dcg([0, 0, 0]) == 0.0

    def test_single_anomaly_on_top(self):
        assert dcg([1]) == pytest.approx(1.0)

    def test_positions_one_and_three(self):
        assert dcg([1, 0, 1]) == pytest.approx(1.0 + 1.0 / math.log2(4))
        assert dcg([1, 0, 1]) == pytest.approx(1.5)

    def test_rejects_graded_relevance(self):
        with pytest.raises(ValueError):
            dcg([0, 2])


class TestNdcg:
    def test_perfect_ranking(self):
        assert ndcg(["a", "b", "c"], {"a"}) == pytest.approx(1.0)
        assert ndcg(["a", "b", "c"], {"a", "b"}) == pytest.approx(1.0)

    def test_single_anomaly_ranked_last_of_two(self):
        value = ndcg(["n", "a"], {"a"})
        assert value == pytest.approx(1.0 / math.log2(3), abs=1e-9)
        assert value == pytest.approx(0.6309, abs=1e-4)

    def test_zero_anomalies_is_an_error(self):
        with pytest.raises(UndefinedMetricError):
            ndcg(["a", "b"], set())

    def test_matches_reference_on_all_permutations(self):
        ids = list("abcdefgh")
        for n_anom in (1, 2, 3):
            anomalies = set(ids[:n_anom])
            for perm in itertools.permutations(ids):
                assert ndcg(list(perm), anomalies) == pytest.approx(
                    reference_ndcg(perm, anomalies), abs=1e-12
                )

    def test_cutoff(self):
        ranking = ["n1", "a1", "n2", "a2"]
        assert ndcg(ranking, {"a1", "a2"}, cutoff=2) == pytest.approx(
            reference_ndcg(ranking, {"a1", "a2"}, cutoff=2)
        )

    def test_swap_monotonicity(self):
        rng = np.random.default_rng(0)
        ids = [f"r{i}" for i in range(12)]
        anomalies = {"r0", "r5", "r9"}
        for _ in range(100):
            ranking = list(rng.permutation(ids))
            pos = [i for i, r in enumerate(ranking) if r in anomalies]
            movable = [i for i in pos if i > 0 and ranking[i - 1] not in anomalies]
            if not movable:
                continue
            i = movable[0]
            improved = ranking.copy()
            improved[i - 1], improved[i] = improved[i], improved[i - 1]
            assert ndcg(improved, anomalies) >= ndcg(ranking, anomalies) - 1e-12

    def test_bounds(self):
        rng = np.random.default_rng(1)
        ids = [f"r{i}" for i in range(10)]
        for _ in range(200):
            ranking = list(rng.permutation(ids))
            v = ndcg(ranking, {"r3", "r7"})
            assert 0.0 <= v <= 1.0


class TestSummaries:
    def test_median_lower_even_length(self):
        assert median_lower([1.0, 2.0, 3.0, 4.0]) == 2.0
        assert median_lower([3.0, 1.0]) == 1.0

    def test_median_odd(self):
        assert median_lower([5.0, 1.0, 3.0]) == 3.0

    def test_constant_series(self):
        out = summarize({"s1": [0.5, 0.5], "s2": [0.5], "hybrid": [0.5, 0.5, 0.5]})
        assert out == {"max_max": 0.5, "max_mean": 0.5, "max_median": 0.5}

    def test_max_max_definition(self):
        out = summarize({"s1": [0.2, 0.9], "s2": [0.6, 0.6], "hybrid": [0.1, 0.8]})
        assert out["max_max"] == pytest.approx(0.9)

    def test_seeded_triple_matches_recomputation(self):
        rng = np.random.default_rng(7)
        series = {k: list(rng.random(9)) for k in ("s1", "s2", "hybrid")}
        out = summarize(series)
        assert out["max_mean"] == pytest.approx(max(np.mean(v) for v in series.values()))
        assert out["max_median"] == pytest.approx(
            max(sorted(v)[(len(v) - 1) // 2] for v in series.values())
        )

    def test_empty_series_rejected(self):
        with pytest.raises(ValueError):
            summarize({})
        with pytest.raises(ValueError):
            summarize({"s1": []})


class TestAverageRanks:
    def test_dominant_method_ranks_first(self):
        table = {
            "ours": {"d1": 0.9, "d2": 0.8},
            "base": {"d1": 0.5, "d2": 0.6},
            "weak": {"d1": 0.1, "d2": 0.2},
        }
        ranks = average_ranks(table)
        assert ranks["ours"] == 1.0
        assert ranks["weak"] == 3.0

    def test_ties_share_mean_rank(self):
        table = {"a": {"d1": 0.5}, "b": {"d1": 0.5}, "c": {"d1": 0.1}}
        ranks = average_ranks(table)
        assert ranks["a"] == ranks["b"] == 1.5
        assert ranks["c"] == 3.0

    def test_ranks_sum_invariant(self):
        rng = np.random.default_rng(3)
        table = {m: {f"d{j}": float(rng.random()) for j in range(4)} for m in "abc"}
        ranks = average_ranks(table)
        assert sum(ranks.values()) == pytest.approx(6.0)  # 1+2+3 per dataset

    def test_hand_computed_3x4(self):
        table = {
            "m1": {"d1": 0.9, "d2": 0.2, "d3": 0.7, "d4": 0.5},
            "m2": {"d1": 0.8, "d2": 0.3, "d3": 0.9, "d4": 0.5},
            "m3": {"d1": 0.1, "d2": 0.1, "d3": 0.8, "d4": 0.9},
        }
        ranks = average_ranks(table)
        assert ranks["m1"] == pytest.approx((1 + 2 + 3 + 2.5) / 4)
        assert ranks["m2"] == pytest.approx((2 + 1 + 1 + 2.5) / 4)
        assert ranks["m3"] == pytest.approx((3 + 3 + 2 + 1) / 4)

    def test_missing_cell_rejected(self):
        with pytest.raises(ValueError, match="missing"):
            average_ranks({"a": {"d1": 1.0}, "b": {}})


class TestReportSerialization:
    def make_report(self):
        return RunReport(
            config={"strategy": "hybrid", "budget": 10, "seed": 42},
            series={
                "hybrid": [
                    SeriesPoint(0, 0.41, None, 0, 1.25),
                    SeriesPoint(1, 0.83, 2.5, 10, 3.5),
                ]
            },
            dataset_fingerprint="abc123",
            dataset_name="canonical.csv",
            generated_at="2026-01-01T00:00:00",
        )

    def test_round_trip(self):
        report = self.make_report()
        parsed = parse_report(format_report(report))
        assert parsed.series["hybrid"][0].ndcg == pytest.approx(0.41)
        assert parsed.series["hybrid"][1].tau == pytest.approx(2.5)
        assert parsed.series["hybrid"][1].queried == 10
        assert parsed.dataset_fingerprint == "abc123"
        assert parsed.dataset_name == "canonical.csv"

    def test_timestamps_confined_to_comment_lines(self):
        text = format_report(self.make_report())
        for line in text.splitlines():
            if "2026-01-01" in line or "timing" in line:
                assert line.startswith("#")

    def test_summary_section_present(self):
        text = format_report(self.make_report())
        assert "[summary]" in text
        assert "max_median = " in text
