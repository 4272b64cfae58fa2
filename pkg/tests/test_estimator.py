"""sklearn-style estimator wrapper."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from winnow.data import SyntheticSpec, generate_synthetic, anomaly_ids
from winnow.estimator import DualAttentionAnomalyDetector


@pytest.fixture(scope="module")
def fitted():
    ds, labels = generate_synthetic(
        SyntheticSpec(n=300, d=24, anomaly_fraction=0.05, seed=9)
    )
    X = ds.to_array()
    y = np.array([1 if r in anomaly_ids(labels) else 0 for r in ds.ids])
    normals = X[y == 0]
    det = DualAttentionAnomalyDetector(latent_dim=4, epochs=20, seed=0).fit(normals)
    return det, X, y


class TestEstimatorApi:
    def test_get_params_round_trip(self):
        det = DualAttentionAnomalyDetector(latent_dim=5, epochs=7)
        params = det.get_params()
        assert params["latent_dim"] == 5
        cloned = clone(det)
        assert cloned.get_params() == params

    def test_unfitted_raises(self):
        with pytest.raises(NotFittedError):
            DualAttentionAnomalyDetector().decision_function(np.zeros((1, 4)))

    def test_fit_sets_attributes(self, fitted):
        det, X, _ = fitted
        assert det.n_features_in_ == 24
        assert det.threshold_ > 0
        assert len(det.train_scores_) > 0

    def test_decision_function_shape_and_sign(self, fitted):
        det, X, y = fitted
        scores = det.decision_function(X)
        assert scores.shape == (300,)
        np.testing.assert_allclose(det.score_samples(X), -scores)

    def test_predict_uses_threshold(self, fitted):
        det, X, _ = fitted
        pred = det.predict(X)
        scores = det.decision_function(X)
        np.testing.assert_array_equal(pred, (scores > det.threshold_).astype(int))

    def test_anomalies_score_above_normals_on_average(self, fitted):
        det, X, y = fitted
        scores = det.decision_function(X)
        assert scores[y == 1].mean() > scores[y == 0].mean()

    def test_feature_count_mismatch(self, fitted):
        det, _, _ = fitted
        with pytest.raises(ValueError, match="features"):
            det.decision_function(np.zeros((2, 5)))

    def test_rejects_out_of_range_values(self, fitted):
        det, _, _ = fitted
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            det.decision_function(np.full((1, 24), 2.0))

    def test_fit_predict(self):
        rng = np.random.default_rng(0)
        X = (rng.random((40, 12)) < 0.3).astype(float)
        flags = DualAttentionAnomalyDetector(latent_dim=3, epochs=2, seed=1).fit_predict(X)
        assert set(np.unique(flags)) <= {0, 1}
