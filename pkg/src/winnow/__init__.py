"""winnow: anomaly triage for imbalanced binary tabular data.

A dual adversarial attention autoencoder scores rows by reconstruction
error; a similarity-guided active-learning loop spends a small oracle
budget per iteration to sharpen both the model and the ranking.
"""

from .data import BinaryDataset, SyntheticSpec, generate_synthetic, load_dataset_csv, load_labels
from .estimator import DualAttentionAnomalyDetector
from .model import DualAttentionAutoencoder, ModelConfig, load_model, save_model, train_model
from .active import ActiveSession, SessionConfig, SimulatedOracle, run_session
from .ranking import dcg, ndcg, summarize
from .similarity import BitVector, sim_metric, sim_nm1

__version__ = "0.1.0"

__all__ = [
    "ActiveSession",
    "BinaryDataset",
    "BitVector",
    "DualAttentionAnomalyDetector",
    "DualAttentionAutoencoder",
    "ModelConfig",
    "SessionConfig",
    "SimulatedOracle",
    "SyntheticSpec",
    "dcg",
    "generate_synthetic",
    "load_dataset_csv",
    "load_labels",
    "load_model",
    "ndcg",
    "run_session",
    "save_model",
    "sim_metric",
    "sim_nm1",
    "summarize",
    "train_model",
    "__version__",
]
