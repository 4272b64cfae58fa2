"""Bit-packed similarity: metrics, conventions, thresholding, retrieval."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from winnow.similarity import (
    METRICS,
    BitMatrix,
    BitVector,
    WidthMismatchError,
    percentile_threshold,
    sim_metric,
    sim_nm1,
    similar_above,
    similarities,
    topk_similar,
)


def brute_force(a_bits, b_bits, metric):
    """Set-based reference implementation over unpacked bit arrays."""
    a = {i for i, v in enumerate(a_bits) if v}
    b = {i for i, v in enumerate(b_bits) if v}
    d = len(a_bits)
    inter = len(a & b)
    if metric == "nm1":
        if not a and not b:
            return 1.0
        return inter / max(len(a), len(b)) if (a or b) else 1.0
    if metric == "jaccard":
        union = len(a | b)
        return inter / union if union else 1.0
    if metric == "dice":
        return 2 * inter / (len(a) + len(b)) if (a or b) else 1.0
    if metric == "hamming":
        agree = sum(1 for i in range(d) if (i in a) == (i in b))
        return agree / d
    if metric == "cosine":
        if not a and not b:
            return 1.0
        if not a or not b:
            return 0.0
        return inter / np.sqrt(len(a) * len(b))
    raise AssertionError(metric)


class TestWorkedExample:
    """Rows with active features {1,3,4} and {1,2,3} (1-indexed), width 5."""

    ROW1 = BitVector([1, 0, 1, 1, 0])
    ROW3 = BitVector([1, 1, 1, 0, 0])

    def test_nm1_is_two_thirds(self):
        assert sim_nm1(self.ROW1, self.ROW3) == pytest.approx(2.0 / 3.0)

    def test_jaccard(self):
        assert sim_metric(self.ROW1, self.ROW3, "jaccard") == pytest.approx(0.5)

    def test_dice(self):
        assert sim_metric(self.ROW1, self.ROW3, "dice") == pytest.approx(4.0 / 6.0)

    def test_cosine(self):
        assert sim_metric(self.ROW1, self.ROW3, "cosine") == pytest.approx(2.0 / 3.0)

    def test_hamming(self):
        assert sim_metric(self.ROW1, self.ROW3, "hamming") == pytest.approx(3.0 / 5.0)


class TestConventions:
    def test_self_similarity_is_one(self):
        v = BitVector([1, 0, 1, 0, 0, 1, 1])
        for metric in METRICS:
            assert sim_metric(v, v, metric) == 1.0

    def test_disjoint_supports_nm1_zero(self):
        assert sim_nm1(BitVector([1, 1, 0, 0]), BitVector([0, 0, 1, 1])) == 0.0

    def test_both_empty(self):
        a, b = BitVector([0, 0, 0]), BitVector([0, 0, 0])
        for metric in METRICS:
            assert sim_metric(a, b, metric) == 1.0

    def test_one_empty(self):
        a, b = BitVector([0, 0, 0]), BitVector([1, 0, 1])
        for metric in ("nm1", "jaccard", "dice", "cosine"):
            assert sim_metric(a, b, metric) == 0.0

    def test_width_mismatch(self):
        with pytest.raises(WidthMismatchError):
            sim_nm1(BitVector([1, 0]), BitVector([1, 0, 0]))

    def test_unknown_metric(self):
        with pytest.raises(ValueError):
            sim_metric(BitVector([1]), BitVector([1]), "euclid")


class TestBitVector:
    def test_popcount_cached_correctly(self):
        v = BitVector([1, 0, 1, 1, 0, 0, 0, 1, 1])
        assert v.popcount == 5
        assert v.popcount == int(v.to_bits().sum())

    def test_padding_bits_zero(self):
        v = BitVector([1] * 9)
        assert v.words[-1] == 0b10000000

    def test_from_indices(self):
        v = BitVector.from_indices(5, [0, 2, 3])
        np.testing.assert_array_equal(v.to_bits(), [1, 0, 1, 1, 0])
        np.testing.assert_array_equal(v.active_indices(), [0, 2, 3])

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            BitVector([0, 2, 1])


@settings(max_examples=300, deadline=None)
@given(
    st.integers(min_value=1, max_value=128),
    st.integers(0, 2**31 - 1),
    st.sampled_from(METRICS),
)
def test_packed_equals_brute_force(width, seed, metric):
    rng = np.random.default_rng(seed)
    a_bits = (rng.random(width) < rng.random()).astype(np.uint8)
    b_bits = (rng.random(width) < rng.random()).astype(np.uint8)
    packed = sim_metric(BitVector(a_bits), BitVector(b_bits), metric)
    assert packed == pytest.approx(brute_force(a_bits, b_bits, metric), abs=1e-12)
    assert 0.0 <= packed <= 1.0


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=1, max_value=64), st.integers(0, 2**31 - 1))
def test_symmetry_and_nm1_dominates_jaccard(width, seed):
    rng = np.random.default_rng(seed)
    a = BitVector((rng.random(width) < 0.4).astype(np.uint8))
    b = BitVector((rng.random(width) < 0.4).astype(np.uint8))
    for metric in METRICS:
        assert sim_metric(a, b, metric) == sim_metric(b, a, metric)
    assert sim_nm1(a, b) >= sim_metric(a, b, "jaccard") - 1e-12


class TestBatchSimilarities:
    def test_matches_pairwise(self):
        rng = np.random.default_rng(5)
        bits = (rng.random((50, 33)) < 0.3).astype(np.uint8)
        rows = BitMatrix(bits)
        q = BitVector(bits[7])
        for metric in METRICS:
            batch = similarities(q, rows, metric)
            pair = [sim_metric(q, rows.row(i), metric) for i in range(50)]
            np.testing.assert_allclose(batch, pair, atol=1e-12)

    def test_row_accessor_round_trips(self):
        bits = np.array([[1, 0, 1], [0, 1, 1]], dtype=np.uint8)
        rows = BitMatrix(bits)
        np.testing.assert_array_equal(rows.row(1).to_bits(), [0, 1, 1])
        assert rows.row(0).popcount == 2


class TestPercentile:
    def test_nearest_rank_80_of_1_to_10(self):
        assert percentile_threshold(list(range(1, 11)), 80) == 8.0

    def test_single_value(self):
        assert percentile_threshold([3.5], 80) == 3.5
        assert percentile_threshold([3.5], 1) == 3.5

    def test_matches_full_sort_oracle(self):
        rng = np.random.default_rng(17)
        values = rng.random(1000)
        expected = np.sort(values)[int(np.ceil(0.8 * 1000)) - 1]
        assert percentile_threshold(values, 80) == expected

    def test_always_a_realized_value(self):
        rng = np.random.default_rng(2)
        values = rng.random(37)
        for p in (1, 25, 50, 80, 99):
            assert percentile_threshold(values, p) in values

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            percentile_threshold([], 80)


class TestRetrieval:
    def setup_method(self):
        rng = np.random.default_rng(23)
        self.bits = (rng.random((200, 40)) < 0.25).astype(np.uint8)
        self.rows = BitMatrix(self.bits)
        self.query = BitVector(self.bits[3])

    def test_threshold_zero_returns_all(self):
        idx, _ = similar_above(self.query, self.rows, "nm1", 0.0)
        assert len(idx) == 200

    def test_threshold_above_one_returns_none(self):
        idx, _ = similar_above(self.query, self.rows, "nm1", 1.0001)
        assert len(idx) == 0

    def test_percentile_threshold_matches_brute_force(self):
        sims = np.array(
            [brute_force(self.bits[3], self.bits[i], "nm1") for i in range(200)]
        )
        theta = percentile_threshold(sims, 80)
        expected = {i for i in range(200) if sims[i] >= theta}
        idx, scores = similar_above(self.query, self.rows, "nm1", theta)
        assert set(idx.tolist()) == expected
        np.testing.assert_allclose(scores, sims[sorted(expected)], atol=1e-12)

    def test_topk_zero(self):
        idx, _ = topk_similar(self.query, self.rows, "nm1", 0)
        assert len(idx) == 0

    def test_topk_self_first(self):
        idx, scores = topk_similar(self.query, self.rows, "nm1", 5)
        assert idx[0] == 3 or scores[0] == 1.0
        # row 3 is the query itself; it must appear among the 1.0 scores first
        assert scores[0] == 1.0

    def test_topk_matches_full_sort(self):
        sims = similarities(self.query, self.rows, "nm1")
        order = sorted(range(200), key=lambda i: (-sims[i], i))[:5]
        idx, _ = topk_similar(self.query, self.rows, "nm1", 5)
        assert idx.tolist() == order

    def test_topk_beyond_n_returns_n(self):
        idx, _ = topk_similar(self.query, self.rows, "nm1", 999)
        assert len(idx) == 200

    def test_tie_break_ascending_index(self):
        bits = np.array([[1, 0], [1, 0], [1, 0]], dtype=np.uint8)
        idx, _ = topk_similar(BitVector([1, 0]), BitMatrix(bits), "nm1", 3)
        assert idx.tolist() == [0, 1, 2]
