"""Causality-preserving (CPA) and causality-disturbing (CDA) augmentors, plus
the four-group mini-batch builder used for contrastive training.

CPA nudges randomly chosen causing variables at the last history step and
re-forecasts their direct effects, producing realistic normal variants. CDA
walks a random causal subgraph depth-first and biases the visited variables,
producing samples whose inter-variable relationships no longer hold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .causal import CausalModel
from .errors import ConfigError

DEFAULT_BIAS_PALETTE = (-0.5, -0.4, -0.3, -0.2, -0.1, 0.1, 0.2, 0.3, 0.4, 0.5)


@dataclass
class CpaConfig:
    m_causing: int = 1
    sigma_noise: float = 0.2

    def validate(self, n_vars: int) -> None:
        if not 1 <= self.m_causing < max(n_vars, 2):
            raise ConfigError(f"m_causing must satisfy 1 <= M < N (M={self.m_causing}, N={n_vars})")
        if self.sigma_noise < 0:
            raise ConfigError("sigma_noise must be non-negative")


@dataclass
class CdaConfig:
    cutoff_p: float = 0.1
    bias_palette: tuple[float, ...] = DEFAULT_BIAS_PALETTE
    step_fraction: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.cutoff_p <= 1.0:
            raise ConfigError("cutoff_p must be in [0, 1]")
        if not self.bias_palette or any(b == 0.0 for b in self.bias_palette):
            raise ConfigError("bias palette must be non-empty and exclude 0")
        if not 0.0 < self.step_fraction <= 1.0:
            raise ConfigError("step_fraction must be in (0, 1]")


@dataclass
class CpaTrace:
    causing: list[int]
    effects: list[int]
    noise: dict[int, float]


@dataclass
class CdaTrace:
    seed_var: int
    visited: list[int]
    biases: dict[int, float]
    steps: dict[int, list[int]]


def cpa(window: np.ndarray, model: CausalModel, cfg: CpaConfig,
        rng: np.random.Generator) -> tuple[np.ndarray, CpaTrace]:
    """Perturb M causing variables at the last history step, then replace the
    final-row entries of their direct effects with fresh forecasts."""
    outs, traces = cpa_many(window[None, :, :], model, cfg, rng_list=[rng])
    return outs[0], traces[0]


def cpa_many(windows: np.ndarray, model: CausalModel, cfg: CpaConfig,
             seed: int | list | None = None,
             rng_list: list[np.random.Generator] | None = None) -> tuple[np.ndarray, list[CpaTrace]]:
    """Vectorized CPA over a stack of windows; one forecast pass for the batch.

    Per-window randomness comes from generators derived from (seed, index),
    so results do not depend on processing order.
    """
    windows = np.asarray(windows, dtype=np.float64)
    b, w, n = windows.shape
    if w < 2:
        raise ConfigError("CPA needs windows of width >= 2")
    cfg.validate(n)
    if rng_list is None:
        rng_list = [np.random.default_rng(_child_seed(seed, i)) for i in range(b)]

    out = windows.copy()
    traces: list[CpaTrace] = []
    effect_mask = np.zeros((b, n), dtype=bool)
    for i in range(b):
        rng = rng_list[i]
        causing = np.sort(rng.choice(n, size=cfg.m_causing, replace=False))
        noise = rng.normal(0.0, cfg.sigma_noise, size=cfg.m_causing) if cfg.sigma_noise > 0 else np.zeros(cfg.m_causing)
        out[i, w - 2, causing] += noise
        effects = sorted({int(c) for j in causing for c in model.children(int(j))})
        effect_mask[i, effects] = True
        traces.append(CpaTrace(
            causing=[int(j) for j in causing],
            effects=effects,
            noise={int(j): float(z) for j, z in zip(causing, noise)},
        ))
    preds = model.forecast(out[:, : w - 1, :])
    out[:, w - 1, :] = np.where(effect_mask, preds, out[:, w - 1, :])
    return out, traces


def dfs_subgraph(a_bin: np.ndarray, seed_var: int, cutoff_p: float,
                 rng: np.random.Generator) -> list[int]:
    """Depth-first walk over directed cause->effect edges, starting at
    ``seed_var``. Each expansion across an edge is independently abandoned
    with probability ``cutoff_p``. Returns variables in visit order."""
    visited = [int(seed_var)]
    seen = {int(seed_var)}

    def visit(v: int) -> None:
        children = np.flatnonzero(a_bin[v]).tolist()
        rng.shuffle(children)
        for c in children:
            if c in seen:
                continue
            if rng.random() < cutoff_p:
                continue
            seen.add(c)
            visited.append(int(c))
            visit(int(c))

    visit(int(seed_var))
    return visited


def cda(window: np.ndarray, a_bin: np.ndarray, cfg: CdaConfig,
        rng: np.random.Generator) -> tuple[np.ndarray, CdaTrace]:
    """Bias a DFS-sampled causal subgraph: every visited variable gets one
    random palette bias added at a random half of the window's timesteps."""
    window = np.asarray(window, dtype=np.float64)
    w, n = window.shape
    seed_var = int(rng.integers(n))
    visited = dfs_subgraph(a_bin, seed_var, cfg.cutoff_p, rng)
    out = window.copy()
    n_steps = max(1, int(round(w * cfg.step_fraction)))
    biases: dict[int, float] = {}
    steps: dict[int, list[int]] = {}
    palette = np.asarray(cfg.bias_palette, dtype=np.float64)
    for v in visited:
        bias = float(rng.choice(palette))
        chosen = np.sort(rng.choice(w, size=n_steps, replace=False))
        out[chosen, v] += bias
        biases[v] = bias
        steps[v] = [int(t) for t in chosen]
    return out, CdaTrace(seed_var=seed_var, visited=visited, biases=biases, steps=steps)


@dataclass
class AugmentedBatch:
    """Concatenated sample groups [originals | preserving | disturbed(G1) | disturbed(G2)].

    With B originals the batch holds 4B samples; sample j < 2B (a positive)
    has its causality-disturbed counterpart at j + 2B.
    """

    samples: np.ndarray          # (4B, w, N)
    group_tags: np.ndarray       # (4B,) values 1..4
    batch_size: int
    traces: dict = field(default_factory=dict)

    def counterpart(self, j: int) -> int:
        if not 0 <= j < 2 * self.batch_size:
            raise IndexError(f"positive index {j} out of range for B={self.batch_size}")
        return j + 2 * self.batch_size

    @property
    def positives(self) -> np.ndarray:
        return self.samples[: 2 * self.batch_size]

    @property
    def negatives(self) -> np.ndarray:
        return self.samples[2 * self.batch_size :]


def build_batch(windows: np.ndarray, model: CausalModel, cpa_cfg: CpaConfig,
                cda_cfg: CdaConfig, seed: int | list = 0) -> AugmentedBatch:
    """G1 = originals, G2 = CPA(G1), G3 = CDA(G1), G4 = CDA(G2)."""
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 3:
        raise ConfigError(f"expected (B, w, N) windows, got shape {windows.shape}")
    b = windows.shape[0]
    if b < 1:
        raise ConfigError("need at least one window")
    a_bin = model.binary_matrix()

    g2, cpa_traces = cpa_many(windows, model, cpa_cfg, seed=_role_seed(seed, 0))
    g3 = np.empty_like(windows)
    g4 = np.empty_like(windows)
    g3_traces, g4_traces = [], []
    for i in range(b):
        g3[i], tr3 = cda(windows[i], a_bin, cda_cfg, np.random.default_rng(_child_seed(_role_seed(seed, 1), i)))
        g3_traces.append(tr3)
        g4[i], tr4 = cda(g2[i], a_bin, cda_cfg, np.random.default_rng(_child_seed(_role_seed(seed, 2), i)))
        g4_traces.append(tr4)

    samples = np.concatenate([windows, g2, g3, g4], axis=0)
    tags = np.repeat(np.arange(1, 5), b)
    return AugmentedBatch(
        samples=samples,
        group_tags=tags,
        batch_size=b,
        traces={"cpa": cpa_traces, "cda_g3": g3_traces, "cda_g4": g4_traces},
    )


def _role_seed(seed, role: int) -> list:
    base = list(seed) if isinstance(seed, (list, tuple)) else [seed]
    return base + [role]


def _child_seed(seed, index: int) -> list:
    base = list(seed) if isinstance(seed, (list, tuple)) else [0 if seed is None else seed]
    return base + [index]
