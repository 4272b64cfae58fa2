"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with ``pytest -s tests/test_acceptance.py`` to see the verdict lines.
The canonical configurations and tolerances are fixed here; nothing is
tuned at test time.
"""

import itertools
import math
import time

import numpy as np
import pytest

from winnow.active import SessionConfig, run_session
from winnow.data import (
    ANOMALY,
    NORMAL,
    SyntheticSpec,
    generate_synthetic,
    split_dataset,
)
from winnow.model import (
    DualAttentionAutoencoder,
    ModelConfig,
    backward_discriminator,
    backward_generator,
    compute_losses,
    indicator_activation,
    train_model,
)
from winnow.nnet import finite_difference_grad, gradient_relative_error, zero_grads
from winnow.ranking import format_report, median_lower, ndcg
from winnow.similarity import BitVector, sim_metric, sim_nm1

import _verdicts

CANONICAL_SPEC = SyntheticSpec(n=2000, d=64, anomaly_fraction=0.01, seed=42)


def verdict(number: int, name: str, ok: bool, detail: str) -> None:
    print("\n" + _verdicts.record(number, name, ok, detail))
    assert ok, f"criterion {number} failed: {detail}"


# ---------------------------------------------------------------------------
# 1. gradient correctness
# ---------------------------------------------------------------------------


def test_criterion_1_gradient_correctness():
    t0 = time.time()
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(6, 17))
        k = int(rng.integers(2, 5))
        b = int(rng.integers(2, 9))
        cfg = ModelConfig(input_dim=d, latent_dim=k, seed=seed).resolve()
        model = DualAttentionAutoencoder(cfg)
        x = (rng.random((b, d)) < 0.3).astype(float)

        trace = model.forward_trace(x)
        zero_grads(model.gen_params + model.attn_params + model.disc_params)
        backward_generator(model, trace, cfg)
        gen_side = model.gen_params + model.attn_params
        numeric = finite_difference_grad(
            lambda: compute_losses(model.forward_trace(x), cfg).total_g, gen_side, 1e-6
        )
        for p, n in zip(gen_side, numeric):
            worst = max(worst, gradient_relative_error(p.grad, n))

        zero_grads(model.disc_params)
        backward_discriminator(model, trace, cfg)
        numeric = finite_difference_grad(
            lambda: compute_losses(model.forward_trace(x), cfg).total_d,
            model.disc_params,
            1e-6,
        )
        for p, n in zip(model.disc_params, numeric):
            worst = max(worst, gradient_relative_error(p.grad, n))
    elapsed = time.time() - t0
    verdict(
        1,
        "gradient correctness",
        worst <= 1e-4 and elapsed < 30,
        f"max relative error {worst:.2e} over 10 seeds in {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 2. sparsity convergence
# ---------------------------------------------------------------------------


def test_criterion_2_sparsity_convergence():
    t0 = time.time()
    spec = SyntheticSpec(n=505, d=32, anomaly_fraction=0.01, seed=1)
    ds, labels = generate_synthetic(spec)
    normal_ids = [r for r in ds.ids if labels[r] == NORMAL][:500]
    rows = ds.subset(normal_ids).to_array()
    assert rows.shape == (500, 32)
    cfg = ModelConfig(input_dim=32, latent_dim=8, sparsity_target=0.1, epochs=100, seed=1)
    model, _ = train_model(rows, cfg)
    mask, _ = model.attention.forward(rows)
    latents, _, _ = model.generator.forward(rows * mask)
    mean_freq = float(indicator_activation(latents).mean())
    elapsed = time.time() - t0
    verdict(
        2,
        "sparsity convergence",
        0.05 <= mean_freq <= 0.15 and elapsed < 120,
        f"mean indicator activation {mean_freq:.4f} in [0.05, 0.15], {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 3. worked similarity example
# ---------------------------------------------------------------------------


def test_criterion_3_nm1_worked_example():
    row1 = BitVector.from_indices(5, [0, 2, 3])  # active features 1, 3, 4
    row3 = BitVector.from_indices(5, [0, 1, 2])  # active features 1, 2, 3
    value = sim_nm1(row1, row3)
    verdict(3, "worked example", value == 2.0 / 3.0, f"similarity {value!r} == 2/3")


# ---------------------------------------------------------------------------
# 4. packed vs set-based equivalence
# ---------------------------------------------------------------------------


def _brute_force(a_bits, b_bits, metric):
    a = {i for i, v in enumerate(a_bits) if v}
    b = {i for i, v in enumerate(b_bits) if v}
    d = len(a_bits)
    inter = len(a & b)
    if metric == "nm1":
        return inter / max(len(a), len(b)) if (a or b) else 1.0
    if metric == "jaccard":
        union = len(a | b)
        return inter / union if union else 1.0
    if metric == "dice":
        return 2 * inter / (len(a) + len(b)) if (a or b) else 1.0
    if metric == "hamming":
        return sum(1 for i in range(d) if (i in a) == (i in b)) / d
    if metric == "cosine":
        if not a and not b:
            return 1.0
        if not a or not b:
            return 0.0
        return inter / np.sqrt(len(a) * len(b))
    raise AssertionError(metric)


def test_criterion_4_similarity_oracle_equivalence():
    t0 = time.time()
    rng = np.random.default_rng(2024)
    metrics = ("nm1", "jaccard", "dice", "hamming", "cosine")
    pairs = 10_000
    for i in range(pairs):
        width = int(rng.integers(1, 129))
        density = rng.random()
        a_bits = (rng.random(width) < density).astype(np.uint8)
        b_bits = (rng.random(width) < rng.random()).astype(np.uint8)
        va, vb = BitVector(a_bits), BitVector(b_bits)
        metric = metrics[i % len(metrics)]
        packed = sim_metric(va, vb, metric)
        assert packed == _brute_force(a_bits, b_bits, metric), (i, metric)
    elapsed = time.time() - t0
    verdict(
        4,
        "similarity equivalence",
        elapsed < 30,
        f"{pairs} random pairs, widths 1-128, exact equality, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 5. nDCG correctness
# ---------------------------------------------------------------------------


def _reference_ndcg(ranking, anomalies):
    rel = [1 if r in anomalies else 0 for r in ranking]
    ideal = sorted(rel, reverse=True)

    def score(values):
        # term-by-term from the formula, then a correctly-rounded sum
        return math.fsum((2.0**v - 1.0) / math.log2(i + 2) for i, v in enumerate(values))

    return score(rel) / score(ideal)


def test_criterion_5_ndcg_correctness():
    t0 = time.time()
    checked = 0
    for n in range(2, 9):
        ids = [f"r{i}" for i in range(n)]
        for n_anom in (1, 2, 3):
            if n_anom >= n:
                continue
            anomalies = set(ids[:n_anom])
            for perm in itertools.permutations(ids):
                got = ndcg(list(perm), anomalies)
                want = _reference_ndcg(perm, anomalies)
                assert got == want, (perm, anomalies)
                checked += 1
    # perfect ranking is exactly 1.0
    assert ndcg(["a", "b", "c"], {"a"}) == 1.0
    elapsed = time.time() - t0
    verdict(
        5,
        "nDCG correctness",
        elapsed < 30,
        f"{checked} permutations match the exhaustive reference exactly, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 6-8. active-learning efficacy, loop contracts, determinism
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def canonical_runs():
    ds, labels = generate_synthetic(CANONICAL_SPEC)
    model_cfg = ModelConfig(input_dim=64, seed=42)
    session = lambda strategy: SessionConfig(
        strategy=strategy, iterations=20, budget=10, seed=42
    )
    t0 = time.time()
    hybrid = run_session(ds, labels, session("hybrid"), model_cfg)
    passive = run_session(ds, labels, session("passive"), model_cfg)
    elapsed = time.time() - t0
    return ds, labels, hybrid, passive, elapsed


def test_criterion_6_active_learning_efficacy(canonical_runs):
    _, _, hybrid, passive, elapsed = canonical_runs
    h_series = [r.ndcg for r in hybrid.records]
    p_series = [r.ndcg for r in passive.records]
    h_median = median_lower(h_series)
    p_median = median_lower(p_series)
    ok_a = h_median >= 0.90
    ok_b = h_median - p_median >= 0.15
    ok_c = h_series[0] < h_series[-1]
    ok_time = elapsed < 600
    verdict(
        6,
        "active-learning efficacy",
        ok_a and ok_b and ok_c and ok_time,
        f"hybrid median {h_median:.4f} (>=0.90), margin over passive "
        f"{h_median - p_median:.4f} (>=0.15), iteration-0 {h_series[0]:.4f} < "
        f"final {h_series[-1]:.4f}, {elapsed:.0f}s",
    )


def test_criterion_7_budget_and_loop_contracts(canonical_runs):
    ds, labels, hybrid, passive, _ = canonical_runs
    all_ids = sorted(ds.ids)
    problems = []
    for session in (hybrid, passive):
        total = 0
        for rec in session.records:
            total += len(rec.queried)
            if len(rec.queried) > session.config.budget:
                problems.append(f"iteration {rec.iteration} exceeded budget")
        if total > session.config.iterations * session.config.budget:
            problems.append("total queries exceeded T*Q")
        if total != session.oracle_calls:
            problems.append("oracle call accounting mismatch")
        if sorted(session.ranking) != all_ids:
            problems.append("final ranking is not a permutation")
    # confirmed anomalies lead the hybrid ranking
    found = hybrid.labeled.anomalous
    head = set(hybrid.ranking[: len(found)])
    if head != found:
        problems.append("confirmed anomalies do not lead the hybrid ranking")
    verdict(
        7,
        "budget and loop contracts",
        not problems,
        "; ".join(problems) if problems else
        f"budget respected, rankings are permutations, {len(found)} confirmed anomalies lead",
    )


def test_criterion_8_determinism(canonical_runs):
    ds, labels, hybrid, _, _ = canonical_runs
    repeat = run_session(
        ds,
        labels,
        SessionConfig(strategy="hybrid", iterations=20, budget=10, seed=42),
        ModelConfig(input_dim=64, seed=42),
    )
    text_a = format_report(hybrid.report(dataset_name="canonical"))
    text_b = format_report(repeat.report(dataset_name="canonical"))
    strip = lambda text: "\n".join(l for l in text.splitlines() if not l.startswith("#"))
    same = strip(text_a) == strip(text_b)
    verdict(
        8,
        "determinism",
        same,
        "repeated canonical run reproduces the report series byte-for-byte",
    )


# ---------------------------------------------------------------------------
# 9. training sanity
# ---------------------------------------------------------------------------


def test_criterion_9_training_sanity():
    t0 = time.time()
    ds, _ = generate_synthetic(CANONICAL_SPEC)
    train_part, holdout = split_dataset(ds, 0.8, seed=42)
    model, history = train_model(
        train_part.to_array(),
        ModelConfig(input_dim=64, epochs=100, seed=42),
        eval_rows=holdout.to_array(),
    )
    for rec in history:
        assert all(np.isfinite(v) for v in rec.losses.as_dict().values())
    mses = [rec.holdout_mse for rec in history]
    # trailing 5-epoch smoothing: at epoch 1 only itself is available
    smoothed_first = float(np.mean(mses[:1]))
    smoothed_last = float(np.mean(mses[-5:]))
    reduction = 1.0 - smoothed_last / smoothed_first
    elapsed = time.time() - t0
    verdict(
        9,
        "training sanity",
        reduction >= 0.5 and elapsed < 120,
        f"finite losses; smoothed holdout MSE {smoothed_first:.2f} -> "
        f"{smoothed_last:.2f} ({reduction * 100:.0f}% reduction), {elapsed:.0f}s",
    )
