"""Loading, saving, and synthesizing boolean feature tables.

File formats
------------
Dataset: UTF-8 CSV, header ``id,<f1>,...,<fd>``, one row per record,
cells strictly ``0`` or ``1``. Label file: CSV with header ``id,label``
and ``label`` one of ``normal`` / ``anomaly``.

All randomness goes through numpy's PCG64 generator seeded via
``SeedSequence``, a documented, portable 64-bit algorithm whose streams
are identical across platforms; derived seeds (for example per-iteration
retraining seeds) come from ``SeedSequence`` entropy tuples, so they are
well-defined functions of (seed, index).
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass

import numpy as np

from .similarity import BitMatrix, BitVector

NORMAL = "normal"
ANOMALY = "anomaly"


class DataError(ValueError):
    """A data file violates the expected format."""


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def derive_seed(seed: int, index: int) -> int:
    """Deterministic child seed for (seed, index), e.g. per-iteration retrains."""
    return int(np.random.SeedSequence((seed, index)).generate_state(1)[0])


class BinaryDataset:
    """Ordered rows of equal-width binary features with unique string ids."""

    def __init__(self, ids: list[str], bits, feature_names: list[str] | None = None):
        bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
        if len(ids) != bits.shape[0]:
            raise DataError(f"{len(ids)} ids for {bits.shape[0]} rows")
        if len(set(ids)) != len(ids):
            raise DataError("duplicate row ids")
        self.ids = list(ids)
        self.rows = BitMatrix(bits) if len(ids) else None
        self._bits = bits
        self.d = int(bits.shape[1])
        if feature_names is None:
            feature_names = [f"f{j + 1}" for j in range(self.d)]
        if len(feature_names) != self.d:
            raise DataError(
                f"{len(feature_names)} feature names for {self.d} features"
            )
        self.feature_names = list(feature_names)
        self._index = {rid: i for i, rid in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def index_of(self, row_id: str) -> int:
        try:
            return self._index[row_id]
        except KeyError:
            raise KeyError(f"unknown row id: {row_id!r}") from None

    def row_vector(self, row_id: str) -> BitVector:
        return self.rows.row(self.index_of(row_id))

    def to_array(self) -> np.ndarray:
        """Rows as a float64 (n, d) matrix for model consumption."""
        return self._bits.astype(np.float64)

    def subset(self, row_ids: list[str]) -> "BinaryDataset":
        idx = [self.index_of(r) for r in row_ids]
        return BinaryDataset(list(row_ids), self._bits[idx], self.feature_names)

    def fingerprint(self) -> str:
        """Content hash over ids, feature names, and bits."""
        h = hashlib.sha256()
        h.update("\x1f".join(self.ids).encode())
        h.update("\x1f".join(self.feature_names).encode())
        h.update(self._bits.tobytes())
        return h.hexdigest()


def load_dataset_csv(path) -> BinaryDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_dataset_csv(fh, origin=str(path))


def parse_dataset_csv(lines, origin: str = "<input>") -> BinaryDataset:
    """Parse dataset CSV from any iterable of lines (file, upload body)."""
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError(f"{origin}: empty file") from None
    if not header or header[0] != "id":
        raise DataError(f"{origin}: first header column must be 'id', got {header[:1]}")
    feature_names = header[1:]
    if not feature_names:
        raise DataError(f"{origin}: no feature columns")
    ids: list[str] = []
    seen: set[str] = set()
    rows: list[list[int]] = []
    for lineno, record in enumerate(reader, start=2):
        if not record:
            continue
        if len(record) != len(header):
            raise DataError(
                f"{origin}:{lineno}: expected {len(header)} cells, got {len(record)}"
            )
        rid = record[0]
        if rid in seen:
            raise DataError(f"{origin}:{lineno}: duplicate id {rid!r}")
        seen.add(rid)
        bits = []
        for col, cell in enumerate(record[1:], start=2):
            if cell == "0":
                bits.append(0)
            elif cell == "1":
                bits.append(1)
            else:
                raise DataError(
                    f"{origin}:{lineno}: column {col}: cell must be 0 or 1, got {cell!r}"
                )
        ids.append(rid)
        rows.append(bits)
    if not ids:
        raise DataError(f"{origin}: no data rows")
    return BinaryDataset(ids, np.array(rows, dtype=np.uint8), feature_names)


def save_dataset_csv(dataset: BinaryDataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", *dataset.feature_names])
        bits = dataset._bits
        for i, rid in enumerate(dataset.ids):
            writer.writerow([rid, *(str(int(v)) for v in bits[i])])


def load_labels(path, dataset: BinaryDataset, missing_as_normal: bool = False) -> dict[str, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_labels_csv(fh, dataset, missing_as_normal, origin=str(path))


def parse_labels_csv(
    lines,
    dataset: BinaryDataset,
    missing_as_normal: bool = False,
    origin: str = "<input>",
) -> dict[str, str]:
    """Parse ``id,label`` rows; every label id must exist in the dataset.

    Dataset ids absent from the input are an error unless
    ``missing_as_normal`` explicitly maps them to ``normal``.
    """
    labels: dict[str, str] = {}
    reader = csv.reader(lines)
    header = next(reader, None)
    if header != ["id", "label"]:
        raise DataError(f"{origin}: expected header 'id,label', got {header}")
    for lineno, record in enumerate(reader, start=2):
        if not record:
            continue
        if len(record) != 2:
            raise DataError(f"{origin}:{lineno}: expected 2 cells, got {len(record)}")
        rid, label = record
        if rid not in dataset._index:
            raise DataError(f"{origin}:{lineno}: label for unknown id {rid!r}")
        if rid in labels:
            raise DataError(f"{origin}:{lineno}: duplicate label for id {rid!r}")
        if label not in (NORMAL, ANOMALY):
            raise DataError(
                f"{origin}:{lineno}: label must be {NORMAL!r} or {ANOMALY!r}, got {label!r}"
            )
        labels[rid] = label
    missing = [rid for rid in dataset.ids if rid not in labels]
    if missing:
        if not missing_as_normal:
            raise DataError(
                f"{origin}: {len(missing)} dataset ids have no label "
                f"(first: {missing[0]!r}); pass missing_as_normal to default them"
            )
        for rid in missing:
            labels[rid] = NORMAL
    return labels


def save_labels(labels: dict[str, str], ids: list[str], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "label"])
        for rid in ids:
            writer.writerow([rid, labels[rid]])


def anomaly_ids(labels: dict[str, str]) -> set[str]:
    return {rid for rid, lab in labels.items() if lab == ANOMALY}


# ---------------------------------------------------------------------------
# synthetic generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a seeded imbalanced binary dataset.

    Rows follow a sparse dictionary model: the generator draws
    ``n_clusters`` prototype bit patterns, and each normal row is the
    union of the prototypes independently present in it (each with
    probability ``proto_presence``), plus per-bit flip noise. Most rows
    therefore contain zero or one prototype, a realistic regime for
    process/event tables and the generative counterpart of a sparse
    code. Anomalies either share one novel prototype built from bit
    positions unused by normal prototypes (``cluster-shifted``: mutually
    similar, structurally unlike normals) or are structureless random
    rows (``uniform-rare``).
    """

    n: int = 2000
    d: int = 64
    anomaly_fraction: float = 0.01
    n_clusters: int = 8
    proto_presence: float = 0.1
    proto_density: float = 0.15
    flip_noise: float = 0.02
    anomaly_mode: str = "cluster-shifted"
    seed: int = 0

    def validate(self) -> None:
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.d < 2:
            raise ValueError(f"d must be >= 2, got {self.d}")
        if not (0.0 < self.anomaly_fraction < 0.5):
            raise ValueError(
                f"anomaly_fraction must lie in (0, 0.5), got {self.anomaly_fraction}"
            )
        if self.n_clusters < 1:
            raise ValueError(f"n_clusters must be >= 1, got {self.n_clusters}")
        if not (0.0 < self.proto_presence < 1.0):
            raise ValueError(
                f"proto_presence must lie in (0, 1), got {self.proto_presence}"
            )
        if not (0.0 < self.proto_density < 1.0):
            raise ValueError(f"proto_density must lie in (0, 1), got {self.proto_density}")
        if not (0.0 <= self.flip_noise < 0.5):
            raise ValueError(f"flip_noise must lie in [0, 0.5), got {self.flip_noise}")
        if self.anomaly_mode not in ("cluster-shifted", "uniform-rare"):
            raise ValueError(f"unknown anomaly_mode: {self.anomaly_mode!r}")
        if round(self.n * self.anomaly_fraction) >= self.n:
            raise ValueError("anomaly count must be smaller than n")


def generate_synthetic(spec: SyntheticSpec) -> tuple[BinaryDataset, dict[str, str]]:
    """Deterministically generate (dataset, labels) from a spec.

    The anomaly count is ``round(n * anomaly_fraction)``, at least 1.
    Rows are shuffled so anomalies are interleaved; ids are positional
    after the shuffle.
    """
    spec.validate()
    rng = make_rng(spec.seed)
    n_anom = max(1, int(round(spec.n * spec.anomaly_fraction)))
    n_norm = spec.n - n_anom
    active_per_proto = max(1, int(round(spec.d * spec.proto_density)))

    protos = np.zeros((spec.n_clusters, spec.d), dtype=np.uint8)
    for c in range(spec.n_clusters):
        protos[c, rng.choice(spec.d, size=active_per_proto, replace=False)] = 1

    def compose_rows(count: int, extra: np.ndarray | None) -> np.ndarray:
        rows_ = np.empty((count, spec.d), dtype=np.uint8)
        for i in range(count):
            present = rng.random(spec.n_clusters) < spec.proto_presence
            base = protos[present].any(axis=0).astype(np.uint8) if present.any() else np.zeros(spec.d, np.uint8)
            if extra is not None:
                base = base | extra
            flips = (rng.random(spec.d) < spec.flip_noise).astype(np.uint8)
            rows_[i] = base ^ flips
        return rows_

    normal = compose_rows(n_norm, None)

    if spec.anomaly_mode == "cluster-shifted":
        # One novel prototype drawn preferentially from bit positions no
        # normal prototype uses: anomalies share structure with each other
        # but not with normal rows.
        unused = np.flatnonzero(protos.sum(axis=0) == 0)
        pool = unused if unused.size >= active_per_proto else np.arange(spec.d)
        novel = np.zeros(spec.d, dtype=np.uint8)
        novel[rng.choice(pool, size=active_per_proto, replace=False)] = 1
        anom = compose_rows(n_anom, novel)
    else:
        anom = (rng.random((n_anom, spec.d)) < spec.proto_density).astype(np.uint8)

    bits = np.concatenate([normal, anom], axis=0)
    is_anom = np.concatenate([np.zeros(n_norm, bool), np.ones(n_anom, bool)])
    order = rng.permutation(spec.n)
    bits = bits[order]
    is_anom = is_anom[order]

    width = max(5, len(str(spec.n)))
    ids = [f"r{i:0{width}d}" for i in range(spec.n)]
    dataset = BinaryDataset(ids, bits)
    labels = {rid: (ANOMALY if flag else NORMAL) for rid, flag in zip(ids, is_anom)}
    return dataset, labels


def split_dataset(
    dataset: BinaryDataset,
    fraction: float,
    seed: int,
    labels: dict[str, str] | None = None,
    stratify: bool = False,
) -> tuple[BinaryDataset, BinaryDataset]:
    """Seeded shuffle split into (first, second) parts; both nonempty.

    ``fraction`` is the share of rows in the first part. With
    ``stratify`` the anomaly share of each part matches the whole within
    one row.
    """
    if not (0.0 < fraction < 1.0):
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    n = len(dataset)
    if n < 2:
        raise ValueError("cannot split a dataset with fewer than 2 rows")
    rng = make_rng(seed)
    if stratify:
        if labels is None:
            raise ValueError("stratified split requires labels")
        first_idx: list[int] = []
        second_idx: list[int] = []
        for group_flag in (NORMAL, ANOMALY):
            members = [i for i, rid in enumerate(dataset.ids) if labels[rid] == group_flag]
            members = list(rng.permutation(members)) if members else []
            cut = int(round(len(members) * fraction))
            first_idx.extend(members[:cut])
            second_idx.extend(members[cut:])
        first_idx.sort()
        second_idx.sort()
    else:
        order = rng.permutation(n)
        cut = int(round(n * fraction))
        cut = min(max(cut, 1), n - 1)
        first_idx = sorted(order[:cut].tolist())
        second_idx = sorted(order[cut:].tolist())
    if not first_idx or not second_idx:
        raise ValueError("split produced an empty part; adjust fraction")
    first_ids = [dataset.ids[i] for i in first_idx]
    second_ids = [dataset.ids[i] for i in second_idx]
    return dataset.subset(first_ids), dataset.subset(second_ids)


def summarize(dataset: BinaryDataset, labels: dict[str, str] | None = None) -> dict:
    """Row/feature counts plus anomaly count and percentage (2 decimals)."""
    n_anom = len(anomaly_ids(labels)) if labels else 0
    pct = 100.0 * n_anom / len(dataset) if len(dataset) else 0.0
    return {
        "rows": len(dataset),
        "features": dataset.d,
        "anomalies": n_anom,
        "anomaly_pct": f"{pct:.2f}",
    }
