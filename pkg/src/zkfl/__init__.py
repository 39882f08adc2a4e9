"""Federated learning with verifiable fixed-point training steps.

Simulated learning nodes train a small fixed-point feedforward model,
prove each training step in a rank-1 constraint system, and submit the
updated model to a deterministic ledger emulation that verifies the
proof before aggregating under fairness and liveness rules.
"""

from .fixedpoint import FxConfig, FxNum, decode, encode, fx_add, fx_cmp, fx_mul, fx_neg, fx_sub
from .nn import Batch, Hyperparams, Model, accuracy, forward, loss, predict, train_step

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "FxConfig",
    "FxNum",
    "Hyperparams",
    "Model",
    "accuracy",
    "decode",
    "encode",
    "forward",
    "fx_add",
    "fx_cmp",
    "fx_mul",
    "fx_neg",
    "fx_sub",
    "loss",
    "predict",
    "train_step",
]
