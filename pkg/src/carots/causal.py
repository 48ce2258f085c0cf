"""Forecasting-based causal discovery with sparse sigmoid input gates.

Each variable has its own forecaster reading the gated history of all
variables; the shared gate matrix doubles as a soft causality structure.
Training minimizes one-step forecast MSE plus an L1 penalty on the gates.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .dataio import WindowSet
from .errors import ConfigError, NumericalError
from .nnet import MLP, OptimizerConfig, OptimizerState, ParamSet, Tape, adam_step, forward_backward, ops

GATE_PARAM = "gate_logits"
L1_SMOOTHING = 1e-12


@dataclass
class CausalConfig:
    n_vars: int
    window: int
    hidden: int | None = 32          # None -> linear forecasters
    lambda_sparse: float = 0.01
    gate_threshold: float = 0.5
    gate_logit_init: float = 2.0     # start with open gates, let the penalty prune
    seed: int = 0

    def __post_init__(self) -> None:
        if self.window < 2:
            raise ConfigError("causal window must be >= 2")
        if self.n_vars < 1:
            raise ConfigError("need at least one variable")
        if not 0.0 < self.gate_threshold < 1.0:
            raise ConfigError("gate_threshold must be in (0, 1)")


class CausalModel:
    """Gate matrix plus per-variable forecasters over the gated flattened history.

    Gate convention: ``gates()[i, j]`` scales variable i's history in the
    forecaster for variable j, so entry (i, j) means "i causes j". A trained
    model is immutable in practice and safe to share across scorers.
    """

    def __init__(self, cfg: CausalConfig) -> None:
        self.cfg = cfg
        self.pset = ParamSet()
        rng = np.random.default_rng(cfg.seed)
        self.pset.add(GATE_PARAM, np.full((cfg.n_vars, cfg.n_vars), cfg.gate_logit_init))
        n_in = (cfg.window - 1) * cfg.n_vars
        self._nets = [
            MLP(self.pset, f"f{j}.", n_in, cfg.hidden, 1, rng) for j in range(cfg.n_vars)
        ]

    # -- structure queries -------------------------------------------------

    def gates(self) -> np.ndarray:
        from .nnet.tape import sigmoid_values

        return sigmoid_values(self.pset.params[GATE_PARAM])

    def binary_matrix(self, threshold: float | None = None) -> np.ndarray:
        thr = self.cfg.gate_threshold if threshold is None else threshold
        return (self.gates() >= thr).astype(np.int8)

    def parents(self, j: int, threshold: float | None = None) -> np.ndarray:
        """Variables whose gate into j is open (causes of j)."""
        return np.flatnonzero(self.binary_matrix(threshold)[:, j])

    def children(self, i: int, threshold: float | None = None) -> np.ndarray:
        """Variables whose forecaster has an open gate from i (effects of i)."""
        return np.flatnonzero(self.binary_matrix(threshold)[i, :])

    # -- forecasting -------------------------------------------------------

    def _check_histories(self, histories: np.ndarray) -> np.ndarray:
        histories = np.asarray(histories, dtype=np.float64)
        if histories.ndim == 2:
            histories = histories[None, :, :]
        if histories.ndim != 3 or histories.shape[1:] != (self.cfg.window - 1, self.cfg.n_vars):
            raise ConfigError(
                f"history shape {histories.shape} does not match "
                f"(batch, {self.cfg.window - 1}, {self.cfg.n_vars})"
            )
        return histories

    def forward_nodes(self, tape: Tape, histories: np.ndarray) -> list:
        """One (batch, 1) prediction node per variable, from gated histories."""
        histories = self._check_histories(histories)
        batch = histories.shape[0]
        n = self.cfg.n_vars
        flat_dim = (self.cfg.window - 1) * n
        gates = ops.sigmoid(tape.param(self.pset, GATE_PARAM))
        hist_node = tape.constant(histories)
        preds = []
        for j in range(n):
            col = ops.reshape(ops.narrow(gates, 1, j, j + 1), (n,))
            gated = ops.mul(hist_node, col)
            flat = ops.reshape(gated, (batch, flat_dim))
            preds.append(self._nets[j].forward(tape, flat))
        return preds

    def forecast(self, histories: np.ndarray) -> np.ndarray:
        """One-step forecast; (w-1, N) -> (N,) or (batch, w-1, N) -> (batch, N)."""
        single = np.asarray(histories).ndim == 2
        tape = Tape()
        preds = self.forward_nodes(tape, histories)
        out = np.concatenate([p.value for p in preds], axis=1)
        return out[0] if single else out

    # -- persistence -------------------------------------------------------

    def meta(self) -> dict:
        return {"kind": "causal", **vars(self.cfg)}

    @staticmethod
    def from_params(pset: ParamSet, meta: dict) -> "CausalModel":
        cfg = CausalConfig(**{k: v for k, v in meta.items() if k != "kind"})
        model = CausalModel(cfg)
        model.pset.load(pset)
        return model


def causal_objective(model: CausalModel, tape: Tape, histories: np.ndarray,
                     targets: np.ndarray):
    """Mean squared one-step forecast error plus the smoothed-L1 gate penalty."""
    targets = np.asarray(targets, dtype=np.float64)
    preds = model.forward_nodes(tape, histories)
    n = model.cfg.n_vars
    total = None
    for j, pred in enumerate(preds):
        err = pred - tape.constant(targets[:, j : j + 1])
        se = ops.mean(ops.square(err))
        total = se if total is None else total + se
    mse = total / float(n)
    gates = ops.sigmoid(tape.param(model.pset, GATE_PARAM))
    penalty = ops.sum_(ops.smooth_abs(gates, L1_SMOOTHING)) * model.cfg.lambda_sparse
    return mse + penalty


def evaluate_objective(model: CausalModel, windows: WindowSet, idx=None) -> float:
    tape = Tape()
    loss = causal_objective(model, tape, windows.histories(idx), windows.targets(idx))
    return float(loss.value)


@dataclass
class CausalTrainLog:
    epochs: list[dict] = field(default_factory=list)

    def row(self, **kwargs) -> None:
        self.epochs.append(kwargs)


def train_causal_discoverer(
    train_windows: WindowSet,
    val_windows: WindowSet,
    cfg: CausalConfig,
    opt_cfg: OptimizerConfig,
    batch_size: int = 256,
    seed: int = 0,
) -> tuple[CausalModel, CausalTrainLog]:
    """Mini-batch training of the gated forecaster; returns the parameters
    from the epoch with the lowest validation objective."""
    if len(train_windows) < 1 or len(val_windows) < 1:
        raise ConfigError("need at least one training and one validation window")
    model = CausalModel(cfg)
    state = OptimizerState(model.pset, opt_cfg)
    log = CausalTrainLog()
    n = len(train_windows)
    epochs = int(opt_cfg.total_epochs)
    best_val = np.inf
    best_params = model.pset.copy()
    for epoch in range(epochs):
        rng = np.random.default_rng([seed, epoch])
        order = rng.permutation(n)
        batches = [order[k : k + batch_size] for k in range(0, n, batch_size)]
        epoch_loss = 0.0
        for b, idx in enumerate(batches):
            model.pset.zero_grad()
            tape = Tape()
            loss = causal_objective(model, tape, train_windows.histories(idx), train_windows.targets(idx))
            if not np.isfinite(loss.value):
                raise NumericalError(f"divergent causal objective at epoch {epoch}, step {b}")
            forward_backward(tape, loss)
            adam_step(model.pset, state, epoch + b / len(batches))
            epoch_loss += float(loss.value)
        val_loss = evaluate_objective(model, val_windows)
        log.row(epoch=epoch, train_loss=epoch_loss / len(batches), val_loss=val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_params = model.pset.copy()
    model.pset.load(best_params)
    return model, log
