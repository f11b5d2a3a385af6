from .mlp import MlpPredictor
from .gru import GruPredictor
from .training import (
    TrainConfig,
    bce_grad,
    l1_penalty,
    predict,
    predict_proba,
    train,
    weighted_bce,
    weighted_bce_batch,
)
from .serialize import load_model, save_model

__all__ = [
    "MlpPredictor",
    "GruPredictor",
    "TrainConfig",
    "train",
    "predict",
    "predict_proba",
    "weighted_bce",
    "weighted_bce_batch",
    "bce_grad",
    "l1_penalty",
    "save_model",
    "load_model",
]
