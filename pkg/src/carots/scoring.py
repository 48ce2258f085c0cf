"""Per-window anomaly scores and their z-normalized ensemble.

Two complementary signals: the embedding distance to the centroid of
positive training samples (score_cl), and the one-step forecast error of
the causal model (score_cd). Each is z-normalized against training-window
statistics; the ensemble is the sum of the two z-scores.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .augment import CpaConfig, cpa_many
from .causal import CausalModel
from .contrastive import EncoderModel
from .dataio import WindowSet
from .errors import ConfigError

STD_FLOOR = 1e-8
DISTANCES = ("l2", "cosine")
SCORE_MODES = ("ensemble", "cl-only", "cd-only")


@dataclass
class Centroid:
    """Embedding-space mean over all positive training samples (originals + CPA)."""

    mu: np.ndarray


def positive_embeddings(windows: WindowSet, encoder: EncoderModel, model: CausalModel,
                        cpa_cfg: CpaConfig, seed: int = 0) -> np.ndarray:
    """Embeddings of every training window plus one seeded CPA sample per window."""
    stack = windows.stack()
    augmented, _ = cpa_many(stack, model, cpa_cfg, seed=[seed, 3300])
    return np.concatenate([encoder.encode(stack), encoder.encode(augmented)], axis=0)


def fit_centroid(windows: WindowSet, encoder: EncoderModel, model: CausalModel,
                 cpa_cfg: CpaConfig, seed: int = 0) -> Centroid:
    return Centroid(positive_embeddings(windows, encoder, model, cpa_cfg, seed).mean(axis=0))


def score_cl(encoder: EncoderModel, centroid: Centroid, windows: np.ndarray,
             distance: str = "l2") -> np.ndarray:
    """Distance between each window's embedding and the positive centroid;
    larger means more anomalous."""
    if distance not in DISTANCES:
        raise ConfigError(f"unknown distance {distance!r}; expected one of {DISTANCES}")
    emb = encoder.encode(windows)
    if emb.ndim == 1:
        emb = emb[None, :]
    diff = emb - centroid.mu
    if distance == "l2":
        return np.sqrt(np.sum(diff * diff, axis=1))
    denom = np.linalg.norm(emb, axis=1) * np.linalg.norm(centroid.mu)
    cos = (emb @ centroid.mu) / np.where(denom > 0, denom, 1.0)
    return 1.0 - cos


def score_cd(model: CausalModel, windows: np.ndarray) -> np.ndarray:
    """Mean squared one-step forecast error at each window's final step."""
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim == 2:
        windows = windows[None, :, :]
    preds = model.forecast(windows[:, :-1, :])
    err = preds - windows[:, -1, :]
    return np.mean(err * err, axis=1)


@dataclass
class ScoreStats:
    """Training-window mean/std of both scores; stds floored at 1e-8."""

    cl_mean: float
    cl_std: float
    cd_mean: float
    cd_std: float

    def __post_init__(self) -> None:
        self.cl_std = max(float(self.cl_std), STD_FLOOR)
        self.cd_std = max(float(self.cd_std), STD_FLOOR)

    @staticmethod
    def fit(a_cl: np.ndarray, a_cd: np.ndarray) -> "ScoreStats":
        if len(a_cl) < 2 or len(a_cd) < 2:
            raise ConfigError("need at least two training windows to fit score statistics")
        return ScoreStats(float(np.mean(a_cl)), float(np.std(a_cl)),
                          float(np.mean(a_cd)), float(np.std(a_cd)))

    def z_cl(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.cl_mean) / self.cl_std

    def z_cd(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.cd_mean) / self.cd_std

    def to_dict(self) -> dict:
        return {"cl_mean": self.cl_mean, "cl_std": self.cl_std,
                "cd_mean": self.cd_mean, "cd_std": self.cd_std}


def fit_score_stats(train_windows: WindowSet, encoder: EncoderModel, centroid: Centroid,
                    model: CausalModel, distance: str = "l2") -> ScoreStats:
    if len(train_windows) < 2:
        raise ConfigError("need at least two training windows to fit score statistics")
    stack = train_windows.stack()
    return ScoreStats.fit(score_cl(encoder, centroid, stack, distance), score_cd(model, stack))


def ensemble(stats: ScoreStats, a_cl, a_cd) -> np.ndarray:
    """Sum of the two z-scores."""
    return stats.z_cl(a_cl) + stats.z_cd(a_cd)


@dataclass
class ScoreSeries:
    """Per-window scores for one evaluated series, aligned by window end index."""

    end_index: np.ndarray
    labels: np.ndarray
    a_cl: np.ndarray
    a_cd: np.ndarray
    a_cl_norm: np.ndarray
    a_cd_norm: np.ndarray
    ensemble: np.ndarray

    def final(self, mode: str = "ensemble") -> np.ndarray:
        if mode == "ensemble":
            return self.ensemble
        if mode == "cl-only":
            return self.a_cl_norm
        if mode == "cd-only":
            return self.a_cd_norm
        raise ConfigError(f"unknown score mode {mode!r}; expected one of {SCORE_MODES}")

    def to_csv(self, path, comment: str | None = None) -> None:
        lines = []
        if comment:
            lines.append(f"# {comment}")
        lines.append("end_index,a_cl,a_cd,a_cl_norm,a_cd_norm,ensemble,label")
        for k in range(len(self.end_index)):
            lines.append(",".join([
                str(int(self.end_index[k])),
                repr(float(self.a_cl[k])),
                repr(float(self.a_cd[k])),
                repr(float(self.a_cl_norm[k])),
                repr(float(self.a_cd_norm[k])),
                repr(float(self.ensemble[k])),
                str(int(self.labels[k])),
            ]))
        Path(path).write_text("\n".join(lines) + "\n")

    @staticmethod
    def from_csv(path) -> "ScoreSeries":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        if not rows or rows[0] != ["end_index", "a_cl", "a_cd", "a_cl_norm", "a_cd_norm", "ensemble", "label"]:
            raise ConfigError(f"{path}: not a score CSV")
        body = rows[1:]
        cols = list(zip(*body))
        return ScoreSeries(
            end_index=np.array([int(x) for x in cols[0]]),
            labels=np.array([int(x) for x in cols[6]], dtype=np.int8),
            a_cl=np.array([float(x) for x in cols[1]]),
            a_cd=np.array([float(x) for x in cols[2]]),
            a_cl_norm=np.array([float(x) for x in cols[3]]),
            a_cd_norm=np.array([float(x) for x in cols[4]]),
            ensemble=np.array([float(x) for x in cols[5]]),
        )


def score_dataset(test_windows: WindowSet, encoder: EncoderModel, centroid: Centroid,
                  model: CausalModel, stats: ScoreStats, distance: str = "l2") -> ScoreSeries:
    """Score every window of a test set; all columns are always populated, and
    the mode (ensemble / cl-only / cd-only) picks the final score downstream."""
    if test_windows.window != encoder.cfg.window or test_windows.window != model.cfg.window:
        raise ConfigError(
            f"window width {test_windows.window} does not match the trained models "
            f"(encoder {encoder.cfg.window}, causal {model.cfg.window})"
        )
    stack = test_windows.stack()
    a_cl = score_cl(encoder, centroid, stack, distance)
    a_cd = score_cd(model, stack)
    a_cl_norm = stats.z_cl(a_cl)
    a_cd_norm = stats.z_cd(a_cd)
    return ScoreSeries(
        end_index=test_windows.end_indices.copy(),
        labels=test_windows.labels.copy(),
        a_cl=a_cl,
        a_cd=a_cd,
        a_cl_norm=a_cl_norm,
        a_cd_norm=a_cd_norm,
        ensemble=a_cl_norm + a_cd_norm,
    )
