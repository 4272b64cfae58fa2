"""Bit-packed binary vectors and similarity search over them.

Rows are packed eight features per byte (big-endian within each byte,
matching ``np.packbits``), with population counts precomputed, so a
similarity scan over the whole dataset is a few vectorized byte ops and
one table lookup per byte: cost linear in the feature count.

The headline metric is normalized matching 1s: the number of positions
active in both vectors divided by the larger active count. Jaccard,
Dice, Hamming and binary cosine are provided for comparison. All
metrics are symmetric and live in [0, 1]; conventions for empty vectors
(which the raw formulas leave 0/0) are: two all-zero vectors are
identical (1.0), an all-zero vs a non-empty vector shares nothing (0.0).
"""

from __future__ import annotations

import numpy as np

METRICS = ("nm1", "jaccard", "dice", "hamming", "cosine")

# popcount per byte value
_POP = np.array([bin(v).count("1") for v in range(256)], dtype=np.int64)


class WidthMismatchError(ValueError):
    """Two vectors of different widths were compared."""


def _check_bits(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.dtype != np.uint8:
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("bit vectors may contain only 0 and 1")
        bits = bits.astype(np.uint8)
    return bits


class BitVector:
    """A fixed-width binary feature vector packed into bytes.

    Bits beyond ``width`` in the last byte are always zero, and the
    population count is cached at construction.
    """

    __slots__ = ("width", "words", "popcount")

    def __init__(self, bits) -> None:
        bits = _check_bits(np.atleast_1d(bits))
        if bits.ndim != 1:
            raise ValueError(f"expected a 1-d bit sequence, got shape {bits.shape}")
        self.width = int(bits.size)
        self.words = np.packbits(bits)
        self.popcount = int(bits.sum())

    @classmethod
    def from_indices(cls, width: int, active) -> "BitVector":
        bits = np.zeros(width, dtype=np.uint8)
        bits[list(active)] = 1
        return cls(bits)

    @classmethod
    def _from_packed(cls, words: np.ndarray, width: int, popcount: int) -> "BitVector":
        vec = cls.__new__(cls)
        vec.width = width
        vec.words = words
        vec.popcount = popcount
        return vec

    def to_bits(self) -> np.ndarray:
        return np.unpackbits(self.words)[: self.width]

    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.to_bits())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitVector)
            and self.width == other.width
            and np.array_equal(self.words, other.words)
        )

    def __repr__(self) -> str:
        return f"BitVector(width={self.width}, popcount={self.popcount})"


class BitMatrix:
    """An indexed collection of equal-width bit vectors, packed row-wise."""

    def __init__(self, bits_matrix) -> None:
        bits = _check_bits(np.atleast_2d(bits_matrix))
        self.width = int(bits.shape[1])
        self.packed = np.packbits(bits, axis=1)
        self.popcounts = bits.sum(axis=1).astype(np.int64)

    @classmethod
    def from_vectors(cls, vectors: list[BitVector]) -> "BitMatrix":
        if not vectors:
            raise ValueError("cannot build an empty BitMatrix without a width")
        widths = {v.width for v in vectors}
        if len(widths) != 1:
            raise WidthMismatchError(f"mixed widths in collection: {sorted(widths)}")
        mat = cls.__new__(cls)
        mat.width = vectors[0].width
        mat.packed = np.stack([v.words for v in vectors])
        mat.popcounts = np.array([v.popcount for v in vectors], dtype=np.int64)
        return mat

    def __len__(self) -> int:
        return self.packed.shape[0]

    def row(self, i: int) -> BitVector:
        return BitVector._from_packed(
            self.packed[i], self.width, int(self.popcounts[i])
        )


def _check_widths(a_width: int, b_width: int) -> None:
    if a_width != b_width:
        raise WidthMismatchError(f"width mismatch: {a_width} vs {b_width}")


def _pairwise(metric: str, inter, pa, pb, xor_pop, width: int):
    """Vectorized metric evaluation from intersection/pop counts."""
    pa = np.asarray(pa, dtype=np.float64)
    pb = float(pb)
    inter = np.asarray(inter, dtype=np.float64)
    both_empty = (pa == 0) & (pb == 0)
    if metric == "nm1":
        denom = np.maximum(pa, pb)
        out = np.divide(inter, denom, out=np.zeros_like(inter), where=denom > 0)
    elif metric == "jaccard":
        union = pa + pb - inter
        out = np.divide(inter, union, out=np.zeros_like(inter), where=union > 0)
    elif metric == "dice":
        denom = pa + pb
        out = np.divide(2.0 * inter, denom, out=np.zeros_like(inter), where=denom > 0)
    elif metric == "hamming":
        out = (width - np.asarray(xor_pop, dtype=np.float64)) / width
    elif metric == "cosine":
        denom = np.sqrt(pa * pb)
        out = np.divide(inter, denom, out=np.zeros_like(inter), where=denom > 0)
    else:
        raise ValueError(f"unknown similarity metric: {metric!r}")
    if metric != "hamming":
        out = np.where(both_empty, 1.0, out)
    return out


def sim_metric(a: BitVector, b: BitVector, metric: str = "nm1") -> float:
    """Similarity of two equal-width vectors under the named metric."""
    _check_widths(a.width, b.width)
    inter = int(_POP[a.words & b.words].sum())
    xor_pop = int(_POP[a.words ^ b.words].sum())
    return float(
        _pairwise(metric, np.array([inter]), np.array([a.popcount]), b.popcount,
                  np.array([xor_pop]), a.width)[0]
    )


def sim_nm1(a: BitVector, b: BitVector) -> float:
    """Normalized matching 1s: ``|A & B| / max(|A|, |B|)``."""
    return sim_metric(a, b, "nm1")


def similarities(query: BitVector, rows: BitMatrix, metric: str = "nm1") -> np.ndarray:
    """Similarity of ``query`` against every row, in row order."""
    _check_widths(query.width, rows.width)
    inter = _POP[rows.packed & query.words].sum(axis=1)
    xor_pop = _POP[rows.packed ^ query.words].sum(axis=1)
    return _pairwise(metric, inter, rows.popcounts, query.popcount, xor_pop, rows.width)


def percentile_threshold(values, p: float) -> float:
    """Nearest-rank percentile: sorted ascending, element ceil(p/100*n)-1.

    No interpolation, so the returned threshold is always a realized value.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("percentile of an empty sequence is undefined")
    if not (0.0 <= p <= 100.0):
        raise ValueError(f"percentile must lie in [0, 100], got {p}")
    ordered = np.sort(values)
    index = int(np.ceil(p / 100.0 * values.size)) - 1
    return float(ordered[min(max(index, 0), values.size - 1)])


def similar_above(
    query: BitVector, rows: BitMatrix, metric: str, threshold: float
) -> tuple[np.ndarray, np.ndarray]:
    """Indices (ascending) and scores of rows with similarity >= threshold."""
    sims = similarities(query, rows, metric)
    idx = np.flatnonzero(sims >= threshold)
    return idx, sims[idx]


def topk_similar(
    query: BitVector, rows: BitMatrix, metric: str, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Top-``k`` row indices by descending similarity, ties by ascending index."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    sims = similarities(query, rows, metric)
    k = min(k, len(rows))
    if k == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    # stable sort on ascending index within equal scores
    order = np.lexsort((np.arange(len(rows)), -sims))[:k]
    return order, sims[order]
