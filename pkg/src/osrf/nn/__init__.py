"""Minimal forward/backward engine for the 1D CNN classifier."""

from .functional import (
    LOSSES,
    bce_sigmoid,
    categorical_cross_entropy,
    cce_sigmoid,
    cce_sigmoid_normalized,
    one_hot,
    relu,
    sigmoid,
    softmax,
)
from .layers import Conv1d, Dense, Flatten, MaxPool1d, ReLU, Sigmoid, layer_from_dict
from .model import (
    Activations,
    Model,
    TrainConfig,
    TrainResult,
    default_architecture,
    load_model,
    model_checksum,
    model_from_bytes,
    model_to_bytes,
    save_model,
    train,
)
from .optim import AdamState, adam_step

__all__ = [
    "LOSSES", "Activations", "AdamState", "Conv1d", "Dense", "Flatten", "MaxPool1d",
    "Model", "ReLU", "Sigmoid", "TrainConfig", "TrainResult", "adam_step",
    "bce_sigmoid", "categorical_cross_entropy", "cce_sigmoid", "cce_sigmoid_normalized",
    "default_architecture", "layer_from_dict", "load_model", "model_checksum", "model_from_bytes",
    "model_to_bytes", "one_hot", "relu", "save_model", "sigmoid", "softmax", "train",
]
