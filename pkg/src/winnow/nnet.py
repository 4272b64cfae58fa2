"""Minimal dense neural-network kernels with hand-derived gradients.

Everything operates on float64 numpy arrays in batch-first layout: an
input batch is ``(B, d)`` and a single sample is a length-``d`` vector.
Layers are stateless; ``forward`` returns ``(output, cache)`` and
``backward`` consumes the cache, so the same layer instance can be run
several times inside one computation graph (the dual model passes two
different tensors through the same attention gate and discriminator).

Gradient accumulation is additive: ``backward`` adds into ``Param.grad``
and the training driver zeroes grads at batch boundaries. A central
finite-difference oracle (`finite_difference_grad`) is provided for
testing the analytic gradients.

Only the fixed computation graph of the dual autoencoder is supported;
this is deliberately not a general autodiff engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Sigmoid outputs are clamped to this open interval so that downstream
# logarithms and divisions stay finite even at saturation.
SIGMOID_CLAMP = 1e-7


class DimensionError(ValueError):
    """Shapes passed to an operation do not conform."""


class TrainingError(RuntimeError):
    """A non-finite value appeared during training."""


def require_shape(name: str, arr: np.ndarray, expected_last: int) -> None:
    if arr.shape[-1] != expected_last:
        raise DimensionError(
            f"{name}: expected trailing dimension {expected_last}, "
            f"got shape {arr.shape}"
        )


def require_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise TrainingError(f"non-finite values in {name}")


@dataclass
class Param:
    """A named parameter tensor with an accumulated gradient of equal shape."""

    name: str
    value: np.ndarray
    grad: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.value = np.asarray(self.value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape


def zero_grads(params: list[Param]) -> None:
    for p in params:
        p.zero_grad()


# ---------------------------------------------------------------------------
# functional ops (contract-level API, used directly by tests and by layers)
# ---------------------------------------------------------------------------


def affine_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``y = W x + b`` for a single vector or a batch of row vectors.

    ``w`` has shape ``(d_out, d_in)``; a batch ``x`` of shape ``(B, d_in)``
    yields ``(B, d_out)``.
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if w.ndim != 2:
        raise DimensionError(f"weight must be 2-d, got shape {w.shape}")
    if x.shape[-1] != w.shape[1] or b.shape[-1] != w.shape[0]:
        raise DimensionError(
            f"affine shapes do not conform: x {x.shape}, W {w.shape}, b {b.shape}"
        )
    return x @ w.T + b


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, np.asarray(x, dtype=np.float64))


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically safe logistic function, clamped away from {0, 1}."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return np.clip(out, SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)


def activation(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation kind: {kind!r}")


def mse(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Squared L2 distance ``sum_i (x_i - x_hat_i)^2`` of two vectors."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise DimensionError(f"length mismatch: {x.shape} vs {x_hat.shape}")
    diff = x - x_hat
    return float(np.dot(diff.ravel(), diff.ravel()))


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------


class Affine:
    """``y = x W^T + b`` with parameters ``W (d_out, d_in)`` and ``b (d_out,)``."""

    def __init__(self, name: str, w: np.ndarray, b: np.ndarray | None):
        self.w = Param(f"{name}.w", w)
        self.b = Param(f"{name}.b", b) if b is not None else None

    @property
    def params(self) -> list[Param]:
        return [self.w] if self.b is None else [self.w, self.b]

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        b = self.b.value if self.b is not None else np.zeros(self.w.value.shape[0])
        return affine_forward(x, self.w.value, b), x

    def backward(
        self, dy: np.ndarray, cache: np.ndarray, accumulate: bool = True
    ) -> np.ndarray:
        x = cache
        if dy.shape[-1] != self.w.value.shape[0]:
            raise DimensionError(
                f"upstream gradient {dy.shape} does not match layer output "
                f"width {self.w.value.shape[0]}"
            )
        if accumulate:
            self.w.grad += dy.T @ x if dy.ndim == 2 else np.outer(dy, x)
            if self.b is not None:
                self.b.grad += dy.sum(axis=0) if dy.ndim == 2 else dy
        return dy @ self.w.value


class Relu:
    """Elementwise ``max(0, x)``.  The subgradient at exactly 0 is 0."""

    params: list[Param] = []

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return relu(x), x

    def backward(
        self, dy: np.ndarray, cache: np.ndarray, accumulate: bool = True
    ) -> np.ndarray:
        return dy * (cache > 0)


class Sigmoid:
    """Clamped logistic activation.

    The cache records where the clamp engaged; the gradient is zero there,
    matching the derivative of the actual (clamped) forward function.
    """

    params: list[Param] = []

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        y = sigmoid(x)
        open_region = (y > SIGMOID_CLAMP) & (y < 1.0 - SIGMOID_CLAMP)
        return y, (y, open_region)

    def backward(
        self, dy: np.ndarray, cache: tuple, accumulate: bool = True
    ) -> np.ndarray:
        y, open_region = cache
        return dy * y * (1.0 - y) * open_region


class Stack:
    """A fixed sequence of layers run front to back."""

    def __init__(self, layers: list):
        self.layers = layers

    @property
    def params(self) -> list[Param]:
        out: list[Param] = []
        for layer in self.layers:
            out.extend(layer.params)
        return out

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def backward(
        self, dy: np.ndarray, caches: list, accumulate: bool = True
    ) -> np.ndarray:
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            dy = layer.backward(dy, cache, accumulate=accumulate)
        return dy


def glorot_uniform(
    rng: np.random.Generator, d_out: int, d_in: int
) -> np.ndarray:
    """Uniform init in +-sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-limit, limit, size=(d_out, d_in))


def make_affine(
    name: str, rng: np.random.Generator, d_out: int, d_in: int, bias: bool = True
) -> Affine:
    # Biases start small-random rather than zero: all-zero rows (common in
    # sparse binary data) otherwise park pre-activations exactly on the
    # ReLU kink, where gradients are ill-defined.
    return Affine(
        name,
        glorot_uniform(rng, d_out, d_in),
        rng.uniform(-0.01, 0.01, size=d_out) if bias else None,
    )


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------


class Sgd:
    """Plain gradient step ``theta <- theta - lr * grad``."""

    kind = "plain-sgd"

    def __init__(self, params: list[Param], lr: float):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params = params
        self.lr = lr
        self.step_count = 0

    def step(self) -> None:
        self.step_count += 1
        for p in self.params:
            require_finite(f"grad({p.name})", p.grad)
            p.value -= self.lr * p.grad


class Adam:
    """Bias-corrected adaptive-moment update (beta1=0.9, beta2=0.999, eps=1e-8)."""

    kind = "adaptive-moment"

    def __init__(
        self,
        params: list[Param],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        for p, m, v in zip(self.params, self.m, self.v):
            require_finite(f"grad({p.name})", p.grad)
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad**2
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            p.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(kind: str, params: list[Param], lr: float):
    if kind == "sgd":
        return Sgd(params, lr)
    if kind == "adam":
        return Adam(params, lr)
    raise ValueError(f"unknown optimizer kind: {kind!r}")


# ---------------------------------------------------------------------------
# finite-difference gradient oracle
# ---------------------------------------------------------------------------


def finite_difference_grad(
    loss_fn, params: list[Param], eps: float = 1e-4
) -> list[np.ndarray]:
    """Central differences ``(f(p+eps) - f(p-eps)) / (2 eps)`` per scalar.

    ``loss_fn`` takes no arguments and must be a deterministic function of
    the current parameter values. Parameters are restored exactly.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    grads = []
    for p in params:
        g = np.zeros_like(p.value)
        flat_value = p.value.ravel()
        flat_grad = g.ravel()
        for i in range(flat_value.size):
            original = flat_value[i]
            flat_value[i] = original + eps
            f_plus = float(loss_fn())
            flat_value[i] = original - eps
            f_minus = float(loss_fn())
            flat_value[i] = original
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise TrainingError(
                    f"non-finite loss while differencing {p.name}[{i}]"
                )
            flat_grad[i] = (f_plus - f_minus) / (2.0 * eps)
        grads.append(g)
    return grads


def gradient_relative_error(
    analytic: np.ndarray, numeric: np.ndarray
) -> float:
    """Max elementwise ``|a - n| / max(|a|, |n|, 1)`` between two gradients.

    The unit floor makes the comparison relative for large entries and
    absolute for near-zero ones, where pure relative error is dominated by
    floating-point noise.
    """
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0
