"""Dual adversarial attention autoencoder for binary tabular rows.

Two autoencoders are trained against each other on normal rows. The
generator reconstructs attention-gated inputs; the discriminator is an
energy model that reconstructs real rows well and is pushed, through a
margin hinge, to reconstruct generator output badly. A feature-wise
attention gate ``a = sigmoid(W x + b)`` modulates every input before
encoding, and Bernoulli-KL penalties keep both latent codes sparse.

The anomaly score of a row is the squared reconstruction error of the
generator on its attention-gated form: rows unlike the training data
reconstruct badly and score high.

Training follows an alternating scheme per mini-batch: all losses and
all gradients are evaluated at the current parameters from one shared
forward pass, then the discriminator, generator, and attention
parameters are stepped with their own optimizers. The sparsity penalty
trains through a smooth activation surrogate ``g(z) = 1 - exp(-z/c)``
because the exact indicator has zero gradient almost everywhere; the
exact indicator frequency is still exposed for reporting.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from . import nnet
from .nnet import (
    Affine,
    DimensionError,
    Param,
    Relu,
    Sigmoid,
    Stack,
    TrainingError,
    make_affine,
    make_optimizer,
    require_finite,
    zero_grads,
)

# Empirical activation frequencies are clamped to this interval so the KL
# term and its gradient stay finite when a unit is always-off or always-on.
RHO_CLAMP = 1e-4

# Above this input width a dense (d x d) attention map becomes the memory
# bottleneck, so the gate switches to a rank-limited factorization.
DENSE_ATTENTION_LIMIT = 2048

CHECKPOINT_FORMAT = "winnow-model-v1"


def default_latent_dim(input_dim: int) -> int:
    """ceil(d/8), clamped to [2, 64]."""
    return int(min(64, max(2, math.ceil(input_dim / 8))))


def default_hidden_layers(input_dim: int, latent_dim: int) -> tuple[int, ...]:
    return (max(latent_dim, math.ceil(input_dim / 2)),)


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters of the dual model.

    ``None`` for `latent_dim` / `hidden_layers` / `attention_mode` means
    "derive from `input_dim`" (see `resolve`).
    """

    input_dim: int
    latent_dim: int | None = None
    hidden_layers: tuple[int, ...] | None = None
    adv_weight: float = 1.0  # generator adversarial term
    sparsity_weight: float = 0.1  # generator KL term
    attn_weight: float = 0.01  # attention regularizer in the generator total
    disc_sparsity_weight: float = 0.1  # discriminator KL term
    margin: float = 1.0  # hinge margin on fake reconstruction energy
    sparsity_target: float = 0.1  # target activation probability per latent unit
    attn_l1: float = 0.01  # L1 coefficient inside the attention penalty
    lr_gen: float = 1e-3
    lr_disc: float = 1e-3
    lr_attn: float = 1e-3
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0
    attention_mode: str | None = None  # "dense" | "lowrank"
    attention_rank: int = 64
    sparsity_sharpness: float = 0.1  # c in the smooth activation surrogate
    optimizer: str = "adam"  # "adam" | "sgd"
    freq_projection_rate: float = 0.5  # bottleneck quantile tracking; 0 disables

    def resolve(self) -> "ModelConfig":
        """Fill derived defaults and validate every invariant."""
        d = self.input_dim
        k = self.latent_dim if self.latent_dim is not None else default_latent_dim(d)
        hidden = (
            self.hidden_layers
            if self.hidden_layers is not None
            else default_hidden_layers(d, k)
        )
        mode = self.attention_mode
        if mode is None:
            mode = "lowrank" if d > DENSE_ATTENTION_LIMIT else "dense"
            if d > DENSE_ATTENTION_LIMIT:
                warnings.warn(
                    f"input width {d} exceeds {DENSE_ATTENTION_LIMIT}; using "
                    f"rank-{self.attention_rank} attention instead of a dense map"
                )
        cfg = replace(
            self,
            latent_dim=int(k),
            hidden_layers=tuple(int(h) for h in hidden),
            attention_mode=mode,
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        d, k = self.input_dim, self.latent_dim
        if d < 2:
            raise ValueError(f"input_dim must be >= 2, got {d}")
        if not (0 < k < d):
            raise ValueError(f"latent_dim must satisfy 0 < k < input_dim, got k={k}, d={d}")
        if not (0.0 < self.sparsity_target < 1.0):
            raise ValueError(f"sparsity_target must lie in (0, 1), got {self.sparsity_target}")
        if self.margin <= 0:
            raise ValueError(f"margin must be positive, got {self.margin}")
        for name in ("adv_weight", "sparsity_weight", "attn_weight", "disc_sparsity_weight", "attn_l1"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("lr_gen", "lr_disc", "lr_attn"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.attention_mode not in ("dense", "lowrank"):
            raise ValueError(f"unknown attention_mode: {self.attention_mode!r}")
        if self.attention_mode == "lowrank" and self.attention_rank < 1:
            raise ValueError(f"attention_rank must be >= 1, got {self.attention_rank}")
        if self.sparsity_sharpness <= 0:
            raise ValueError(f"sparsity_sharpness must be positive, got {self.sparsity_sharpness}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer: {self.optimizer!r}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if not (0.0 <= self.freq_projection_rate <= 1.0):
            raise ValueError(
                f"freq_projection_rate must lie in [0, 1], got {self.freq_projection_rate}"
            )
        if any(h < 1 for h in self.hidden_layers):
            raise ValueError(f"hidden layer widths must be >= 1, got {self.hidden_layers}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        raw = json.loads(text)
        if raw.get("hidden_layers") is not None:
            raw["hidden_layers"] = tuple(raw["hidden_layers"])
        return cls(**raw)


# ---------------------------------------------------------------------------
# components
# ---------------------------------------------------------------------------


class AttentionGate:
    """Feature-wise gate ``a = sigmoid(W x + b)`` with entries in (0, 1).

    In low-rank mode the map is factored as ``W = U V^T`` with
    ``U, V in R^{d x r}``; the same parameters gate both real inputs and
    generator reconstructions.
    """

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        d = cfg.input_dim
        self.mode = cfg.attention_mode
        self.sig = Sigmoid()
        if self.mode == "dense":
            self.map = Stack([make_affine("attn", rng, d, d)])
        else:
            r = cfg.attention_rank
            self.map = Stack(
                [
                    make_affine("attn.v", rng, r, d, bias=False),
                    make_affine("attn.u", rng, d, r),
                ]
            )

    @property
    def params(self) -> list[Param]:
        return self.map.params

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        pre, map_cache = self.map.forward(x)
        a, sig_cache = self.sig.forward(pre)
        return a, (map_cache, sig_cache)

    def backward(self, da: np.ndarray, cache: tuple, accumulate: bool = True) -> np.ndarray:
        map_cache, sig_cache = cache
        dpre = self.sig.backward(da, sig_cache)
        return self.map.backward(dpre, map_cache, accumulate=accumulate)


class Autoencoder:
    """Affine/ReLU encoder into a nonnegative bottleneck, mirrored decoder.

    The bottleneck uses ReLU (latents are nonnegative, as the sparsity
    penalty requires); the output layer uses a sigmoid because inputs are
    binary and reconstructions must stay in (0, 1).
    """

    def __init__(self, name: str, cfg: ModelConfig, rng: np.random.Generator):
        d, k = cfg.input_dim, cfg.latent_dim
        widths = [d, *cfg.hidden_layers, k]
        enc_layers: list = []
        for i in range(len(widths) - 1):
            enc_layers.append(make_affine(f"{name}.enc{i}", rng, widths[i + 1], widths[i]))
            enc_layers.append(Relu())
        self.encoder = Stack(enc_layers)
        dec_widths = list(reversed(widths))
        dec_layers: list = []
        for i in range(len(dec_widths) - 1):
            dec_layers.append(make_affine(f"{name}.dec{i}", rng, dec_widths[i + 1], dec_widths[i]))
            dec_layers.append(Relu() if i < len(dec_widths) - 2 else Sigmoid())
        self.decoder = Stack(dec_layers)

    @property
    def params(self) -> list[Param]:
        return self.encoder.params + self.decoder.params

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, tuple]:
        z, enc_cache = self.encoder.forward(x)
        out, dec_cache = self.decoder.forward(z)
        return z, out, (enc_cache, dec_cache)

    def backward(
        self,
        dout: np.ndarray,
        dz_extra: np.ndarray | None,
        cache: tuple,
        accumulate: bool = True,
    ) -> np.ndarray:
        """Backprop ``dout`` through the decoder, add ``dz_extra`` at the
        bottleneck (sparsity-penalty path), then continue through the encoder."""
        enc_cache, dec_cache = cache
        dz = self.decoder.backward(dout, dec_cache, accumulate=accumulate)
        if dz_extra is not None:
            dz = dz + dz_extra
        return self.encoder.backward(dz, enc_cache, accumulate=accumulate)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def kl_sparsity(rho_hat: np.ndarray, rho: float) -> float:
    """Sum over units of the Bernoulli KL divergence KL(rho_hat_j || rho).

    Natural logarithm. Nonnegative; zero iff every unit's empirical
    frequency equals the target.
    """
    rho_hat = np.asarray(rho_hat, dtype=np.float64)
    if not (0.0 < rho < 1.0):
        raise ValueError(f"sparsity target must lie in (0, 1), got {rho}")
    if np.any(rho_hat <= 0.0) or np.any(rho_hat >= 1.0):
        raise ValueError("empirical frequencies must lie strictly inside (0, 1)")
    return float(
        np.sum(
            rho_hat * np.log(rho_hat / rho)
            + (1.0 - rho_hat) * np.log((1.0 - rho_hat) / (1.0 - rho))
        )
    )


def _kl_grad(rho_hat: np.ndarray, rho: float) -> np.ndarray:
    return np.log(rho_hat / rho) - np.log((1.0 - rho_hat) / (1.0 - rho))


def empirical_activation(z: np.ndarray, sharpness: float) -> np.ndarray:
    """Per-unit mean of the smooth activation surrogate ``1 - exp(-z/c)``.

    ``z`` is a (B, k) batch of nonnegative latents. The result is clamped
    to [1e-4, 1 - 1e-4] so the KL term stays finite. As ``c -> 0`` the
    surrogate approaches the exact on/off indicator.
    """
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if z.shape[0] < 1:
        raise ValueError("activation estimate needs at least one sample")
    if np.any(z < 0):
        raise ValueError("latents must be nonnegative (post-ReLU)")
    if sharpness <= 0:
        raise ValueError(f"sharpness must be positive, got {sharpness}")
    g = 1.0 - np.exp(-z / sharpness)
    return np.clip(g.mean(axis=0), RHO_CLAMP, 1.0 - RHO_CLAMP)


def indicator_activation(z: np.ndarray) -> np.ndarray:
    """Exact per-unit activation frequency ``mean(z > 0)`` (reporting only)."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    return (z > 0).mean(axis=0)


@dataclass
class LossBreakdown:
    recon_g: float
    adv_g: float
    sparse_g: float
    attn: float
    total_g: float
    adv_d: float
    sparse_d: float
    total_d: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass
class ForwardTrace:
    """Every intermediate tensor of one batch pass, plus backward caches."""

    x: np.ndarray  # (B, d) input
    attn_mask: np.ndarray  # a = A(x)
    gated_input: np.ndarray  # x * a
    gen_latent: np.ndarray  # z_G
    recon: np.ndarray  # x_hat
    recon_attn_mask: np.ndarray  # a_hat = A(x_hat)
    gated_recon: np.ndarray  # x_hat * a_hat
    disc_latent_real: np.ndarray
    disc_latent_fake: np.ndarray
    disc_out_real: np.ndarray
    disc_out_fake: np.ndarray
    e_real: np.ndarray  # (B,)
    e_fake: np.ndarray  # (B,)
    caches: dict = field(repr=False, default_factory=dict)


class DualAttentionAutoencoder:
    """The trained artifact: attention gate + generator + discriminator.

    Instances are mutable during training and treated as immutable
    afterwards; scoring methods only read parameters.
    """

    def __init__(self, config: ModelConfig, rng: np.random.Generator | None = None):
        self.config = config.resolve()
        if rng is None:
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.config.seed)))
        self.attention = AttentionGate(self.config, rng)
        self.generator = Autoencoder("gen", self.config, rng)
        self.discriminator = Autoencoder("disc", self.config, rng)

    # -- parameter groups ---------------------------------------------------

    @property
    def gen_params(self) -> list[Param]:
        return self.generator.params

    @property
    def disc_params(self) -> list[Param]:
        return self.discriminator.params

    @property
    def attn_params(self) -> list[Param]:
        return self.attention.params

    # -- forward ------------------------------------------------------------

    def _check_width(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.config.input_dim:
            raise DimensionError(
                f"row width {x.shape[1]} does not match model input_dim "
                f"{self.config.input_dim}"
            )
        return x

    def attention_mask(self, x: np.ndarray) -> np.ndarray:
        """Gate values in (0, 1) for each feature of each row."""
        squeeze = np.asarray(x).ndim == 1
        a, _ = self.attention.forward(self._check_width(x))
        return a[0] if squeeze else a

    def forward_trace(self, x: np.ndarray) -> ForwardTrace:
        x = self._check_width(x)
        a, attn_cache = self.attention.forward(x)
        xs = x * a
        z_g, x_hat, gen_cache = self.generator.forward(xs)
        a_hat, attn_hat_cache = self.attention.forward(x_hat)
        xs_hat = x_hat * a_hat
        z_d_real, out_real, disc_real_cache = self.discriminator.forward(xs)
        z_d_fake, out_fake, disc_fake_cache = self.discriminator.forward(xs_hat)
        e_real = np.sum((x - out_real) ** 2, axis=1)
        e_fake = np.sum((x_hat - out_fake) ** 2, axis=1)
        return ForwardTrace(
            x=x,
            attn_mask=a,
            gated_input=xs,
            gen_latent=z_g,
            recon=x_hat,
            recon_attn_mask=a_hat,
            gated_recon=xs_hat,
            disc_latent_real=z_d_real,
            disc_latent_fake=z_d_fake,
            disc_out_real=out_real,
            disc_out_fake=out_fake,
            e_real=e_real,
            e_fake=e_fake,
            caches={
                "attn": attn_cache,
                "attn_hat": attn_hat_cache,
                "gen": gen_cache,
                "disc_real": disc_real_cache,
                "disc_fake": disc_fake_cache,
            },
        )

    # -- scoring ------------------------------------------------------------

    def score_all(self, x: np.ndarray) -> np.ndarray:
        """Squared generator reconstruction error per row, in row order."""
        x = np.asarray(x, dtype=np.float64)
        if x.size == 0:
            return np.zeros(0)
        x = self._check_width(x)
        a, _ = self.attention.forward(x)
        _, x_hat, _ = self.generator.forward(x * a)
        scores = np.sum((x - x_hat) ** 2, axis=1)
        require_finite("anomaly scores", scores)
        return scores

    def anomaly_score(self, x: np.ndarray) -> float:
        return float(self.score_all(np.atleast_2d(x))[0])

    def discriminator_energies(self, x: np.ndarray, x_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(E_real, E_fake) for given rows and reconstructions."""
        x = self._check_width(x)
        x_hat = self._check_width(x_hat)
        a, _ = self.attention.forward(x)
        a_hat, _ = self.attention.forward(x_hat)
        _, out_real, _ = self.discriminator.forward(x * a)
        _, out_fake, _ = self.discriminator.forward(x_hat * a_hat)
        return (
            np.sum((x - out_real) ** 2, axis=1),
            np.sum((x_hat - out_fake) ** 2, axis=1),
        )


# ---------------------------------------------------------------------------
# loss evaluation and hand-derived backward passes
# ---------------------------------------------------------------------------


def compute_losses(trace: ForwardTrace, cfg: ModelConfig) -> LossBreakdown:
    b = trace.x.shape[0]
    recon_g = float(np.sum((trace.x - trace.recon) ** 2) / b)
    adv_g = float(np.sum(trace.e_fake) / b)
    rho_hat_g = empirical_activation(trace.gen_latent, cfg.sparsity_sharpness)
    sparse_g = kl_sparsity(rho_hat_g, cfg.sparsity_target)
    attn = float(cfg.attn_l1 * np.sum(trace.attn_mask) / b)
    total_g = (
        recon_g
        + cfg.adv_weight * adv_g
        + cfg.sparsity_weight * sparse_g
        + cfg.attn_weight * attn
    )
    hinge = np.maximum(0.0, cfg.margin - trace.e_fake)
    adv_d = float(np.sum(trace.e_real + hinge) / b)
    z_pool = np.concatenate([trace.disc_latent_real, trace.disc_latent_fake], axis=0)
    rho_hat_d = empirical_activation(z_pool, cfg.sparsity_sharpness)
    sparse_d = kl_sparsity(rho_hat_d, cfg.sparsity_target)
    total_d = adv_d + cfg.disc_sparsity_weight * sparse_d
    return LossBreakdown(
        recon_g=recon_g,
        adv_g=adv_g,
        sparse_g=sparse_g,
        attn=attn,
        total_g=total_g,
        adv_d=adv_d,
        sparse_d=sparse_d,
        total_d=total_d,
    )


def _surrogate_latent_grad(
    z: np.ndarray, weight: float, rho: float, sharpness: float
) -> np.ndarray:
    """d(weight * KL(mean g(z) || rho)) / dz for the smooth surrogate."""
    n = z.shape[0]
    g = 1.0 - np.exp(-z / sharpness)
    raw = g.mean(axis=0)
    inside = (raw > RHO_CLAMP) & (raw < 1.0 - RHO_CLAMP)
    rho_hat = np.clip(raw, RHO_CLAMP, 1.0 - RHO_CLAMP)
    dkl = _kl_grad(rho_hat, rho) * inside
    return weight * dkl[None, :] * np.exp(-z / sharpness) / (sharpness * n)


def backward_generator(model: DualAttentionAutoencoder, trace: ForwardTrace, cfg: ModelConfig) -> None:
    """Accumulate d(total_G)/d(theta_G) and d(total_G)/d(theta_A).

    The discriminator is frozen: gradient flows through its layers to
    reach the generator output, but its parameters accumulate nothing.
    """
    b = trace.x.shape[0]
    c = trace.caches

    # Reconstruction and the direct part of the fake energy.
    d_recon = 2.0 * (trace.recon - trace.x) / b
    d_xhat = d_recon + cfg.adv_weight * 2.0 * (trace.recon - trace.disc_out_fake) / b

    # Fake energy through the frozen discriminator.
    d_out_fake = cfg.adv_weight * (-2.0) * (trace.recon - trace.disc_out_fake) / b
    d_xs_hat = model.discriminator.backward(d_out_fake, None, c["disc_fake"], accumulate=False)
    d_xhat = d_xhat + d_xs_hat * trace.recon_attn_mask

    # Gate on the reconstruction: parameters accumulate, and the map input
    # is the reconstruction itself, so gradient also returns into x_hat.
    d_a_hat = d_xs_hat * trace.recon
    d_xhat = d_xhat + model.attention.backward(d_a_hat, c["attn_hat"], accumulate=True)

    # Through the generator, injecting the sparsity-surrogate gradient at
    # the bottleneck.
    dz_sparse = _surrogate_latent_grad(
        trace.gen_latent, cfg.sparsity_weight, cfg.sparsity_target, cfg.sparsity_sharpness
    )
    d_xs = model.generator.backward(d_xhat, dz_sparse, c["gen"], accumulate=True)

    # Gate on the input: the encoder path plus the L1 attention penalty.
    d_a = d_xs * trace.x + cfg.attn_weight * cfg.attn_l1 / b
    model.attention.backward(d_a, c["attn"], accumulate=True)


def backward_discriminator(model: DualAttentionAutoencoder, trace: ForwardTrace, cfg: ModelConfig) -> None:
    """Accumulate d(total_D)/d(theta_D); generator and gate are frozen."""
    b = trace.x.shape[0]
    c = trace.caches
    dz_pool = _surrogate_latent_grad(
        np.concatenate([trace.disc_latent_real, trace.disc_latent_fake], axis=0),
        cfg.disc_sparsity_weight,
        cfg.sparsity_target,
        cfg.sparsity_sharpness,
    )
    dz_real, dz_fake = dz_pool[:b], dz_pool[b:]

    d_out_real = -2.0 * (trace.x - trace.disc_out_real) / b
    model.discriminator.backward(d_out_real, dz_real, c["disc_real"], accumulate=True)

    hinge_active = (trace.e_fake < cfg.margin).astype(np.float64)
    d_out_fake = (2.0 * hinge_active[:, None] / b) * (trace.recon - trace.disc_out_fake)
    model.discriminator.backward(d_out_fake, dz_fake, c["disc_fake"], accumulate=True)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass
class EpochRecord:
    epoch: int
    losses: LossBreakdown
    holdout_mse: float | None = None


def _project_activation_frequency(
    ae: Autoencoder, pre: np.ndarray, rho: float, rate: float
) -> None:
    """Track each latent unit's firing rate toward ``rho`` via its bias.

    Moves the bottleneck bias so the per-unit ``(1 - rho)`` quantile of
    pre-activations heads to zero, i.e. each unit fires for roughly a
    ``rho`` fraction of rows. A projection step like this is needed
    because the KL penalty's gradient cannot outweigh reconstruction
    pressure sample-by-sample at the published loss weights; ``rate``
    damps per-batch quantile noise. Leaves the loss and its gradients
    untouched.
    """
    affines = [l for l in ae.encoder.layers if isinstance(l, Affine)]
    idx = max(int(np.ceil((1.0 - rho) * pre.shape[0])) - 1, 0)
    quantile = np.sort(pre, axis=0)[idx]
    affines[-1].b.value -= rate * quantile


def train_model(
    rows: np.ndarray,
    config: ModelConfig,
    eval_rows: np.ndarray | None = None,
    init_from: DualAttentionAutoencoder | None = None,
) -> tuple[DualAttentionAutoencoder, list[EpochRecord]]:
    """Train on ``rows`` (one row per presumed-normal sample).

    Per mini-batch: one forward pass, then discriminator/generator/gate
    gradients all evaluated at the current parameters and applied with
    their own optimizers. Returns the model and one aggregated loss
    record per epoch (mean over batches, plus holdout reconstruction MSE
    when ``eval_rows`` is given).

    ``init_from`` warm-starts from an existing model's parameters instead
    of a fresh seeded initialization.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.size == 0:
        raise ValueError("training requires at least one row")
    cfg = config.resolve()
    if rows.shape[1] != cfg.input_dim:
        raise DimensionError(
            f"dataset width {rows.shape[1]} does not match input_dim {cfg.input_dim}"
        )

    seq = np.random.SeedSequence(cfg.seed)
    init_seq, shuffle_seq = seq.spawn(2)
    if init_from is None:
        model = DualAttentionAutoencoder(cfg, np.random.Generator(np.random.PCG64(init_seq)))
    else:
        model = clone_model(init_from)
        model.config = cfg
    shuffle_rng = np.random.Generator(np.random.PCG64(shuffle_seq))

    opt_d = make_optimizer(cfg.optimizer, model.disc_params, cfg.lr_disc)
    opt_g = make_optimizer(cfg.optimizer, model.gen_params, cfg.lr_gen)
    opt_a = make_optimizer(cfg.optimizer, model.attn_params, cfg.lr_attn)

    n = rows.shape[0]
    history: list[EpochRecord] = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        sums = np.zeros(8)
        batches = 0
        for start in range(0, n, cfg.batch_size):
            batch = rows[order[start : start + cfg.batch_size]]
            trace = model.forward_trace(batch)
            losses = compute_losses(trace, cfg)
            values = np.array(list(losses.as_dict().values()))
            if not np.all(np.isfinite(values)):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {batches}: {losses}"
                )
            zero_grads(model.disc_params)
            backward_discriminator(model, trace, cfg)
            zero_grads(model.gen_params)
            zero_grads(model.attn_params)
            backward_generator(model, trace, cfg)
            opt_d.step()
            opt_g.step()
            opt_a.step()
            if cfg.freq_projection_rate > 0:
                # the final encoder Relu cache holds the bottleneck pre-activations
                _project_activation_frequency(
                    model.generator,
                    trace.caches["gen"][0][-1],
                    cfg.sparsity_target,
                    cfg.freq_projection_rate,
                )
                _project_activation_frequency(
                    model.discriminator,
                    np.concatenate(
                        [trace.caches["disc_real"][0][-1], trace.caches["disc_fake"][0][-1]]
                    ),
                    cfg.sparsity_target,
                    cfg.freq_projection_rate,
                )
            sums += values
            batches += 1
        mean = sums / max(batches, 1)
        record = EpochRecord(epoch=epoch, losses=LossBreakdown(*mean))
        if eval_rows is not None and len(eval_rows):
            record.holdout_mse = float(np.mean(model.score_all(eval_rows)))
        history.append(record)
    return model, history


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def _param_dict(model: DualAttentionAutoencoder) -> dict[str, np.ndarray]:
    out = {}
    for group, params in (
        ("gen", model.gen_params),
        ("disc", model.disc_params),
        ("attn", model.attn_params),
    ):
        for i, p in enumerate(params):
            out[f"{group}.{i}.{p.name}"] = p.value
    return out


def clone_model(model: DualAttentionAutoencoder) -> DualAttentionAutoencoder:
    clone = DualAttentionAutoencoder(model.config)
    for dst, src in zip(
        clone.gen_params + clone.disc_params + clone.attn_params,
        model.gen_params + model.disc_params + model.attn_params,
    ):
        dst.value[...] = src.value
    return clone


def save_model(model: DualAttentionAutoencoder, path) -> None:
    """Write a versioned checkpoint (config JSON + exact parameter tensors)."""
    arrays = _param_dict(model)
    meta = np.frombuffer(
        json.dumps(
            {"format": CHECKPOINT_FORMAT, "config": json.loads(model.config.to_json())}
        ).encode("utf-8"),
        dtype=np.uint8,
    )
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=meta, **arrays)


def load_model(path) -> DualAttentionAutoencoder:
    with np.load(path) as bundle:
        meta = json.loads(bytes(bundle["__meta__"]).decode("utf-8"))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unrecognized checkpoint format: {meta.get('format')!r}")
        config = ModelConfig.from_json(json.dumps(meta["config"]))
        model = DualAttentionAutoencoder(config)
        for group, params in (
            ("gen", model.gen_params),
            ("disc", model.disc_params),
            ("attn", model.attn_params),
        ):
            for i, p in enumerate(params):
                p.value[...] = bundle[f"{group}.{i}.{p.name}"]
    return model
