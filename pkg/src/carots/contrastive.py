"""Window encoder and the similarity-filtered one-class contrastive loss.

The loss treats the first half of an augmented batch (originals plus
preserving augmentations) as anchors and positives, and pairs every positive
with its causality-disturbed counterpart as the negative. Positives whose
scaled cosine similarity to the anchor falls below a threshold that rises
over training are excluded, together with their counterparts.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .augment import AugmentedBatch, CdaConfig, CpaConfig, build_batch
from .causal import CausalModel
from .dataio import WindowSet
from .errors import ConfigError, NumericalError
from .nnet import GRU, MLP, OptimizerConfig, OptimizerState, ParamSet, Tape, adam_step, forward_backward, ops

NORM_EPS = 1e-12


@dataclass
class EncoderConfig:
    n_vars: int
    window: int
    hidden: int = 64
    embed_dim: int = 32
    unit_norm: bool = True
    arch: str = "gru"            # "gru" | "mlp"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.arch not in ("gru", "mlp"):
            raise ConfigError(f"unknown encoder arch {self.arch!r}")
        if self.window < 1 or self.hidden < 1 or self.embed_dim < 1:
            raise ConfigError("window, hidden, and embed_dim must be positive")


class EncoderModel:
    """Recurrent (or MLP) encoder with a linear projection to the embedding space."""

    def __init__(self, cfg: EncoderConfig) -> None:
        self.cfg = cfg
        self.pset = ParamSet()
        rng = np.random.default_rng(cfg.seed)
        if cfg.arch == "gru":
            self._gru = GRU(self.pset, "enc.", cfg.n_vars, cfg.hidden, rng)
            self._mlp = None
        else:
            self._gru = None
            self._mlp = MLP(self.pset, "enc.", cfg.window * cfg.n_vars, cfg.hidden, cfg.hidden, rng)
        from .nnet.layers import uniform_init

        # The projection starts at a common center: early embeddings then have
        # similarities inside the filter's pass band, so the clustering term is
        # active from the first epochs instead of every pair being filtered out.
        self.pset.add("proj.W", uniform_init(rng, (cfg.hidden, cfg.embed_dim), cfg.hidden))
        self.pset.add("proj.b", np.full(cfg.embed_dim, 1.0 / np.sqrt(cfg.embed_dim)))

    def forward(self, tape: Tape, windows: np.ndarray):
        """(batch, w, N) -> embedding node (batch, D), unit-normalized when configured."""
        windows = np.asarray(windows, dtype=np.float64)
        if windows.ndim == 2:
            windows = windows[None, :, :]
        if windows.ndim != 3 or windows.shape[1] != self.cfg.window or windows.shape[2] != self.cfg.n_vars:
            raise ConfigError(
                f"window shape {windows.shape} does not match "
                f"(batch, {self.cfg.window}, {self.cfg.n_vars})"
            )
        if self._gru is not None:
            h = self._gru.forward(tape, windows)
        else:
            flat = windows.reshape(windows.shape[0], -1)
            h = ops.tanh(self._mlp.forward(tape, flat))
        emb = ops.matmul(h, tape.param(self.pset, "proj.W")) + tape.param(self.pset, "proj.b")
        if self.cfg.unit_norm:
            norms = ops.l2_norm(emb, axis=1, keepdims=True)
            emb = emb / (norms + NORM_EPS)
        return emb

    def encode(self, windows: np.ndarray) -> np.ndarray:
        """Deterministic embedding values; accepts one window or a stack."""
        single = np.asarray(windows).ndim == 2
        tape = Tape()
        emb = self.forward(tape, windows)
        return emb.value[0] if single else emb.value

    def meta(self) -> dict:
        return {"kind": "encoder", **vars(self.cfg)}

    @staticmethod
    def from_params(pset: ParamSet, meta: dict) -> "EncoderModel":
        cfg = EncoderConfig(**{k: v for k, v in meta.items() if k != "kind"})
        model = EncoderModel(cfg)
        model.pset.load(pset)
        return model


@dataclass
class SocConfig:
    temperature: float = 0.1
    alpha_start: float = 0.5
    alpha_end: float = 0.9
    epochs: int = 30
    include_self: bool = True

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if not self.alpha_start <= self.alpha_end <= 1.0:
            raise ConfigError("need alpha_start <= alpha_end <= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")


def alpha_at(cfg: SocConfig, epoch: int) -> float:
    """Similarity threshold at an epoch: linear from alpha_start to alpha_end."""
    if not 0 <= epoch < cfg.epochs:
        raise ConfigError(f"epoch {epoch} outside [0, {cfg.epochs})")
    if cfg.epochs == 1:
        return cfg.alpha_start
    frac = epoch / (cfg.epochs - 1)
    return cfg.alpha_start + (cfg.alpha_end - cfg.alpha_start) * frac


def scaled_similarities(tape: Tape, emb, tau: float, n_anchors: int):
    """Cosine similarities (rows: first ``n_anchors`` samples, columns: all
    samples) divided by the temperature. Embeddings are row-normalized here,
    so the result is cosine regardless of the encoder's normalization flag."""
    norms = ops.l2_norm(emb, axis=1, keepdims=True)
    unit = emb / (norms + NORM_EPS)
    anchors = ops.narrow(unit, 0, 0, n_anchors)
    return ops.matmul(anchors, ops.transpose(unit)) / tau


def soc_filter(sim_values: np.ndarray, alpha: float, tau: float,
               include_self: bool = True) -> np.ndarray:
    """Boolean (2B, 2B) mask of surviving positives: similarity >= alpha/tau.

    With ``include_self`` the diagonal is always kept, so every anchor retains
    at least itself and the loss is defined for any alpha <= 1.
    """
    two_b = sim_values.shape[0]
    mask = sim_values[:, :two_b] >= alpha / tau
    idx = np.arange(two_b)
    if include_self:
        mask[idx, idx] = True
    else:
        mask[idx, idx] = False
    return mask


@dataclass
class SocResult:
    loss: object                  # scalar Node
    pos_mask: np.ndarray          # (2B, 2B) surviving positives per anchor
    unfiltered_ratio: float


def soc_loss(tape: Tape, emb, alpha: float, tau: float,
             include_self: bool = True, pos_mask: np.ndarray | None = None) -> SocResult:
    """Similarity-filtered one-class contrastive loss over a 4B-sample batch.

    For each anchor i among the 2B positives, the surviving positive set is
    P_i = {j : S_ij >= alpha/tau}; the negatives are exactly the disturbed
    counterparts of P_i. Each surviving pair contributes
    -log(exp(S_ij) / (exp(S_ij) + sum_k in N_i exp(S_ik))), averaged by
    1/|P_i| per anchor and 1/(2B) overall. The filter sets are recomputed
    from the forward pass and treated as constants: no gradient flows
    through set membership. Pass ``pos_mask`` to pin the sets externally.
    """
    n = emb.value.shape[0]
    if n % 4 != 0:
        raise ConfigError(f"batch of {n} samples is not divisible into four groups")
    b = n // 4
    two_b = 2 * b
    sims = scaled_similarities(tape, emb, tau, two_b)
    if pos_mask is None:
        pos_mask = soc_filter(sims.value, alpha, tau, include_self)
    counts = pos_mask.sum(axis=1)
    # anchors whose filter removed everything (possible only without self) drop out
    anchor_w = np.where(counts > 0, 1.0 / np.maximum(counts, 1), 0.0)
    weights = pos_mask * anchor_w[:, None] / two_b

    es = ops.exp(sims)
    neg_mask = np.concatenate([np.zeros((two_b, two_b)), pos_mask.astype(np.float64)], axis=1)
    neg_sum = ops.sum_(ops.mul(es, neg_mask), axis=1, keepdims=True)
    es_pos = ops.narrow(es, 1, 0, two_b)
    s_pos = ops.narrow(sims, 1, 0, two_b)
    terms = ops.log(es_pos + neg_sum) - s_pos
    loss = ops.sum_(ops.mul(terms, weights))
    ratio = float(pos_mask.sum()) / float(two_b * two_b)
    return SocResult(loss=loss, pos_mask=pos_mask, unfiltered_ratio=ratio)


def unfiltered_ratio(embeddings: np.ndarray, alpha: float, tau: float,
                     include_self: bool = True) -> float:
    """Fraction of positive pairs surviving the similarity filter: sum_i |P_i| / (2B)^2."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    n = embeddings.shape[0]
    if n % 4 != 0:
        raise ConfigError(f"batch of {n} samples is not divisible into four groups")
    two_b = n // 2
    norms = np.linalg.norm(embeddings, axis=1, keepdims=True)
    unit = embeddings / (norms + NORM_EPS)
    sims = (unit[:two_b] @ unit.T) / tau
    mask = soc_filter(sims, alpha, tau, include_self)
    return float(mask.sum()) / float(two_b * two_b)


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_loss: float
    alpha: float
    unfiltered_ratio: float


def train_encoder(
    train_windows: WindowSet,
    val_windows: WindowSet,
    causal_model: CausalModel,
    cpa_cfg: CpaConfig,
    cda_cfg: CdaConfig,
    soc_cfg: SocConfig,
    enc_cfg: EncoderConfig,
    opt_cfg: OptimizerConfig,
    batch_size: int = 256,
    seed: int = 0,
) -> tuple[EncoderModel, list[EpochLog]]:
    """Contrastive training over augmented batches.

    Per epoch: shuffle windows, build a four-group batch per mini-batch,
    embed all samples, apply the filtered loss at that epoch's threshold,
    and step the optimizer. Validation batches are fixed (augmented once)
    and scored with the filter disabled, so every epoch is judged on the
    same pair population; the parameters with the lowest validation loss
    are returned. A filtered validation loss would shrink whenever the
    filter empties, which rewards exactly the degenerate embeddings the
    filter is meant to avoid.
    """
    if len(train_windows) < 1 or len(val_windows) < 1:
        raise ConfigError("need at least one training and one validation window")
    model = EncoderModel(enc_cfg)
    # the schedule must end when training ends
    opt_cfg = replace(opt_cfg, total_epochs=float(soc_cfg.epochs))
    state = OptimizerState(model.pset, opt_cfg)
    n = len(train_windows)
    bsz = min(batch_size, n)

    val_stack = val_windows.stack()
    val_batches: list[AugmentedBatch] = []
    for k in range(0, len(val_windows), bsz):
        chunk = val_stack[k : k + bsz]
        val_batches.append(build_batch(chunk, causal_model, cpa_cfg, cda_cfg, seed=[seed, 7700, k]))

    logs: list[EpochLog] = []
    best_val = np.inf
    best_params = model.pset.copy()
    for epoch in range(soc_cfg.epochs):
        alpha = alpha_at(soc_cfg, epoch)
        rng = np.random.default_rng([seed, 1 + epoch])
        order = rng.permutation(n)
        batches = [order[k : k + bsz] for k in range(0, n, bsz)]
        epoch_loss = 0.0
        epoch_ratio = 0.0
        for b_idx, idx in enumerate(batches):
            batch = build_batch(
                train_windows.stack(idx), causal_model, cpa_cfg, cda_cfg,
                seed=[seed, 2 + epoch, b_idx],
            )
            model.pset.zero_grad()
            tape = Tape()
            emb = model.forward(tape, batch.samples)
            result = soc_loss(tape, emb, alpha, soc_cfg.temperature, soc_cfg.include_self)
            if not np.isfinite(result.loss.value):
                raise NumericalError(f"divergent contrastive loss at epoch {epoch}, step {b_idx}")
            forward_backward(tape, result.loss)
            adam_step(model.pset, state, epoch + b_idx / len(batches))
            epoch_loss += float(result.loss.value)
            epoch_ratio += result.unfiltered_ratio
        val_loss = _validation_loss(model, val_batches, soc_cfg)
        logs.append(EpochLog(
            epoch=epoch,
            train_loss=epoch_loss / len(batches),
            val_loss=val_loss,
            alpha=alpha,
            unfiltered_ratio=epoch_ratio / len(batches),
        ))
        if val_loss < best_val:
            best_val = val_loss
            best_params = model.pset.copy()
    model.pset.load(best_params)
    return model, logs


VALIDATION_ALPHA = -1.0  # no filtering: every epoch sees the same pair population


def _validation_loss(model: EncoderModel, val_batches: list[AugmentedBatch],
                     soc_cfg: SocConfig) -> float:
    total = 0.0
    for batch in val_batches:
        tape = Tape()
        emb = model.forward(tape, batch.samples)
        result = soc_loss(tape, emb, VALIDATION_ALPHA, soc_cfg.temperature, soc_cfg.include_self)
        total += float(result.loss.value)
    return total / len(val_batches)
