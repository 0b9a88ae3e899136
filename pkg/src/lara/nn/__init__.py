"""The 1-D SE-residual CNN, its autodiff engine, training and weight I/O."""

from .gradcheck import grad_check
from .model import FEATURE_DIM, Model, ModelConfig, build_model, extract_features, forward, predict
from .serialize import load_weights, save_weights
from .training import TrainConfig, train

__all__ = [
    "FEATURE_DIM",
    "Model",
    "ModelConfig",
    "TrainConfig",
    "build_model",
    "extract_features",
    "forward",
    "grad_check",
    "load_weights",
    "predict",
    "save_weights",
    "train",
]
