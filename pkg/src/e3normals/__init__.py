"""Unoriented point-cloud normal estimation with E(3) frame averaging."""

__version__ = "0.1.0"

from .data import PointCloud, SynthSpec, read_xyz, synthesize
from .estimators import JetEstimator, NeuralEstimator, PCAEstimator, make_estimator
from .frames import build_frame_set, frame_average
from .metrics import MetricReport, pgp, rmse
from .pipeline import InferenceConfig, TrainConfig, infer, train

__all__ = [
    "PointCloud",
    "SynthSpec",
    "read_xyz",
    "synthesize",
    "JetEstimator",
    "NeuralEstimator",
    "PCAEstimator",
    "make_estimator",
    "build_frame_set",
    "frame_average",
    "MetricReport",
    "pgp",
    "rmse",
    "InferenceConfig",
    "TrainConfig",
    "infer",
    "train",
]
