"""Shallow and deep complex-valued RBF networks with variance-matched initialization."""

from .errors import (
    CheckpointError,
    ConfigError,
    CRBFError,
    InvalidArgumentError,
    NumericOverflowError,
    StateError,
    UnsupportedSchemeError,
)
from .initialization import InitConfig, NetShape, NormStats, Scheme, initialize
from .network import Layer, Network, cost, network_forward, predict
from .training import TrainConfig, backward_and_update, fit, train_epoch

__all__ = [
    "CRBFError",
    "CheckpointError",
    "ConfigError",
    "InvalidArgumentError",
    "NumericOverflowError",
    "StateError",
    "UnsupportedSchemeError",
    "InitConfig",
    "NetShape",
    "NormStats",
    "Scheme",
    "initialize",
    "Layer",
    "Network",
    "cost",
    "network_forward",
    "predict",
    "TrainConfig",
    "backward_and_update",
    "fit",
    "train_epoch",
]
