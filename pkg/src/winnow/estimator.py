"""scikit-learn compatible wrapper around the dual autoencoder.

`DualAttentionAnomalyDetector` follows the familiar outlier-detector
shape: ``fit(X)`` on (presumed) normal rows, ``decision_function(X)``
for anomaly scores where higher means more anomalous, ``predict(X)``
for 0/1 flags against the threshold learned from the training score
distribution, and ``score_samples(X)`` with the sklearn sign convention
(higher = more normal) so the estimator composes with the wider
ecosystem. ``get_params`` / ``set_params`` come from ``BaseEstimator``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .model import ModelConfig, train_model
from .similarity import percentile_threshold


class DualAttentionAnomalyDetector(BaseEstimator):
    """Anomaly detector for binary tabular rows.

    Parameters mirror `ModelConfig`; ``None`` keeps the derived default.
    ``threshold_percentile`` sets the training-score percentile used by
    ``predict`` (the common top-20% triage convention by default).

    Attributes set by ``fit``: ``model_`` (the trained dual autoencoder),
    ``threshold_``, ``train_scores_``, ``n_features_in_``.
    """

    def __init__(
        self,
        latent_dim: int | None = None,
        hidden_layers: tuple[int, ...] | None = None,
        adv_weight: float = 1.0,
        sparsity_weight: float = 0.1,
        attn_weight: float = 0.01,
        disc_sparsity_weight: float = 0.1,
        margin: float = 1.0,
        sparsity_target: float = 0.1,
        attn_l1: float = 0.01,
        lr_gen: float = 1e-3,
        lr_disc: float = 1e-3,
        lr_attn: float = 1e-3,
        batch_size: int = 32,
        epochs: int = 100,
        seed: int = 0,
        attention_mode: str | None = None,
        attention_rank: int = 64,
        sparsity_sharpness: float = 0.1,
        optimizer: str = "adam",
        threshold_percentile: float = 80.0,
    ):
        self.latent_dim = latent_dim
        self.hidden_layers = hidden_layers
        self.adv_weight = adv_weight
        self.sparsity_weight = sparsity_weight
        self.attn_weight = attn_weight
        self.disc_sparsity_weight = disc_sparsity_weight
        self.margin = margin
        self.sparsity_target = sparsity_target
        self.attn_l1 = attn_l1
        self.lr_gen = lr_gen
        self.lr_disc = lr_disc
        self.lr_attn = lr_attn
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.attention_mode = attention_mode
        self.attention_rank = attention_rank
        self.sparsity_sharpness = sparsity_sharpness
        self.optimizer = optimizer
        self.threshold_percentile = threshold_percentile

    def _config(self, n_features: int) -> ModelConfig:
        return ModelConfig(
            input_dim=n_features,
            latent_dim=self.latent_dim,
            hidden_layers=self.hidden_layers,
            adv_weight=self.adv_weight,
            sparsity_weight=self.sparsity_weight,
            attn_weight=self.attn_weight,
            disc_sparsity_weight=self.disc_sparsity_weight,
            margin=self.margin,
            sparsity_target=self.sparsity_target,
            attn_l1=self.attn_l1,
            lr_gen=self.lr_gen,
            lr_disc=self.lr_disc,
            lr_attn=self.lr_attn,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            attention_mode=self.attention_mode,
            attention_rank=self.attention_rank,
            sparsity_sharpness=self.sparsity_sharpness,
            optimizer=self.optimizer,
        ).resolve()

    def _validate(self, X) -> np.ndarray:
        X = check_array(X, dtype=np.float64)
        if np.any((X < 0) | (X > 1)):
            raise ValueError("features must lie in [0, 1] (binary rows expected)")
        return X

    def fit(self, X, y=None) -> "DualAttentionAnomalyDetector":
        """Train on rows assumed normal; ``y`` is ignored."""
        X = self._validate(X)
        config = self._config(X.shape[1])
        self.model_, self.history_ = train_model(X, config)
        self.train_scores_ = self.model_.score_all(X)
        self.threshold_ = percentile_threshold(self.train_scores_, self.threshold_percentile)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X) -> np.ndarray:
        """Anomaly scores; higher means more anomalous."""
        check_is_fitted(self, "model_")
        X = self._validate(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return self.model_.score_all(X)

    def score_samples(self, X) -> np.ndarray:
        """Negated anomaly scores (sklearn convention: higher = more normal)."""
        return -self.decision_function(X)

    def predict(self, X) -> np.ndarray:
        """1 for rows scoring strictly above the learned threshold, else 0."""
        return (self.decision_function(X) > self.threshold_).astype(int)

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X).predict(X)
