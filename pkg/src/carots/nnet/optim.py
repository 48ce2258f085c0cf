"""Adam with decoupled weight decay, global-norm gradient clipping, and a
linear-warmup / cosine-decay learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError
from .tape import ParamSet


@dataclass
class OptimizerConfig:
    lr: float = 1e-4
    weight_decay: float = 0.0
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    clip_norm: float = 1.0
    warmup_epochs: float = 5.0
    total_epochs: float = 30.0


class OptimizerState:
    """Per-parameter first/second moment estimates plus the step counter."""

    def __init__(self, pset: ParamSet, cfg: OptimizerConfig) -> None:
        self.cfg = cfg
        self.step_count = 0
        self.m = {name: np.zeros_like(p) for name, p in pset.params.items()}
        self.v = {name: np.zeros_like(p) for name, p in pset.params.items()}


def lr_at(cfg: OptimizerConfig, epoch_fraction: float) -> float:
    """Learning rate at a fractional epoch: 0 -> lr over the warmup, then
    cosine decay from lr down to 0 at ``total_epochs``."""
    if epoch_fraction < 0:
        raise ValueError("epoch_fraction must be non-negative")
    e = min(epoch_fraction, cfg.total_epochs)
    if cfg.warmup_epochs > 0 and e < cfg.warmup_epochs:
        return cfg.lr * e / cfg.warmup_epochs
    span = cfg.total_epochs - cfg.warmup_epochs
    if span <= 0:
        return cfg.lr
    progress = (e - cfg.warmup_epochs) / span
    return cfg.lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def clip_global_grad_norm(pset: ParamSet, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most ``max_norm``.

    Returns the pre-clip norm."""
    norm = pset.global_grad_norm()
    if norm > max_norm:
        scale = max_norm / norm
        for g in pset.grads.values():
            g *= scale
    return norm


def adam_step(pset: ParamSet, state: OptimizerState, epoch_fraction: float) -> float:
    """One scheduled Adam update from the gradients currently in ``pset``.

    Gradients are clipped to the configured global norm before the moment
    update; weight decay is decoupled from the adaptive step. Returns the
    learning rate that was applied.
    """
    cfg = state.cfg
    for name, g in pset.grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in parameter {name!r}")
    clip_global_grad_norm(pset, cfg.clip_norm)
    lr = lr_at(cfg, epoch_fraction)
    state.step_count += 1
    t = state.step_count
    b1, b2 = cfg.betas
    for name, p in pset.params.items():
        g = pset.grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        if cfg.weight_decay:
            p -= lr * cfg.weight_decay * p
        p -= lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return lr
