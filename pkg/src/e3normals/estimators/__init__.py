from ..errors import ConfigError
from .base import Estimator
from .classical import (
    JetCoefficients,
    JetEstimator,
    PCAEstimator,
    fit_jet,
    jet_estimate,
    pca_estimate,
)
from .neural import (
    NetConfig,
    NetworkParams,
    NeuralEstimator,
    init_params,
    load_params,
    neural_estimate,
    save_params,
)


def make_estimator(name: str, jet_order: int = 2, params_path=None) -> Estimator:
    if name == "pca":
        return PCAEstimator()
    if name == "jet":
        return JetEstimator(jet_order)
    if name == "neural":
        if params_path is None:
            raise ConfigError("the neural estimator needs a parameter file")
        return NeuralEstimator(load_params(params_path))
    raise ConfigError(f"unknown estimator {name!r}")


__all__ = [
    "Estimator",
    "JetCoefficients",
    "JetEstimator",
    "PCAEstimator",
    "fit_jet",
    "jet_estimate",
    "pca_estimate",
    "NetConfig",
    "NetworkParams",
    "NeuralEstimator",
    "init_params",
    "load_params",
    "neural_estimate",
    "save_params",
    "make_estimator",
]
