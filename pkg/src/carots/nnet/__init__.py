"""Minimal reverse-mode engine, reference layers, optimizer, and checkpoints."""

from . import tape as ops
from .checkpoint import load_params, save_params
from .layers import GRU, MLP, gru_forward, uniform_init
from .optim import OptimizerConfig, OptimizerState, adam_step, clip_global_grad_norm, lr_at
from .tape import Node, ParamSet, Tape, forward_backward

__all__ = [
    "GRU",
    "MLP",
    "Node",
    "OptimizerConfig",
    "OptimizerState",
    "ParamSet",
    "Tape",
    "adam_step",
    "clip_global_grad_norm",
    "forward_backward",
    "gru_forward",
    "load_params",
    "lr_at",
    "ops",
    "save_params",
    "uniform_init",
]
