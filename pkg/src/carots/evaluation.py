"""Detection metrics (AUROC, average precision, best F1 without point
adjustment), per-anomaly-type reports, and the causal-stability analysis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .causal import CausalConfig, train_causal_discoverer
from .dataio import LabeledSeries, make_windows, split_train_val
from .errors import ConfigError
from .nnet import OptimizerConfig


def _check_scores_labels(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be matching 1-D arrays")
    return scores, labels


def auroc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative; tied
    pairs count 0.5 (rank-sum formulation with midranks)."""
    scores, labels = _check_scores_labels(scores, labels)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC undefined: labels must contain both classes")
    ranks = _midranks(scores)
    r_pos = ranks[labels == 1].sum()
    return float((r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _midranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auprc(scores, labels) -> float:
    """Average precision: step-wise sum of precision x recall increments over
    descending unique score thresholds."""
    scores, labels = _check_scores_labels(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("AUPRC undefined: no positive labels")
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    # evaluate only at the last index of each tied block (one point per threshold)
    boundary = np.append(s[1:] != s[:-1], True)
    tp_b = tp[boundary]
    fp_b = fp[boundary]
    precision = tp_b / (tp_b + fp_b)
    recall = tp_b / n_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def best_f1(scores, labels) -> tuple[float, float]:
    """Maximum F1 over thresholds at unique score values (predict positive when
    score >= threshold); ties break toward the lower threshold. Window-level
    labels, no point adjustment."""
    scores, labels = _check_scores_labels(scores, labels)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("best F1 undefined: labels must contain both classes")
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = labels[order]
    tp = np.cumsum(y)
    boundary = np.append(s[1:] != s[:-1], True)
    ks = np.flatnonzero(boundary)
    tp_b = tp[ks].astype(np.float64)
    pred_pos = (ks + 1).astype(np.float64)
    precision = np.where(pred_pos > 0, tp_b / pred_pos, 0.0)
    recall = tp_b / n_pos
    denom = precision + recall
    f1 = np.where(denom > 0, 2.0 * precision * recall / np.where(denom > 0, denom, 1.0), 0.0)
    # thresholds descend with k; the last argmax is the lowest threshold
    best_idx = len(f1) - 1 - int(np.argmax(f1[::-1]))
    return float(f1[best_idx]), float(s[ks[best_idx]])


@dataclass
class TypeMetrics:
    auroc: float
    auprc: float
    best_f1: float
    best_threshold: float

    def to_dict(self) -> dict:
        return {"auroc": self.auroc, "auprc": self.auprc,
                "best_f1": self.best_f1, "best_threshold": self.best_threshold}


def compute_metrics(scores, labels) -> TypeMetrics:
    f1, thr = best_f1(scores, labels)
    return TypeMetrics(auroc(scores, labels), auprc(scores, labels), f1, thr)


@dataclass
class MetricsReport:
    """Per-anomaly-type metrics aggregated over seeds, plus the cross-type average."""

    kinds: list[str]
    seeds: list[int]
    per_type: dict = field(default_factory=dict)
    avg: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kinds": self.kinds, "seeds": self.seeds,
                "per_type": self.per_type, "avg": self.avg}


def per_type_report(per_seed: dict[int, dict[str, tuple]],
                    kinds=("pg", "pc", "ct", "cg")) -> MetricsReport:
    """Aggregate (scores, labels) pairs per seed and anomaly kind.

    Missing variants are marked absent, never fabricated. The AVG column is
    the arithmetic mean of the per-kind AUROC means over present kinds.
    """
    seeds = sorted(per_seed)
    report = MetricsReport(kinds=list(kinds), seeds=seeds)
    present_means = []
    for kind in kinds:
        rows = {}
        for seed in seeds:
            pair = per_seed[seed].get(kind)
            if pair is not None:
                rows[seed] = compute_metrics(*pair)
        if not rows:
            report.per_type[kind] = {"absent": True}
            continue
        entry = {"absent": False, "per_seed": {str(s): m.to_dict() for s, m in rows.items()}}
        for metric in ("auroc", "auprc", "best_f1"):
            vals = np.array([getattr(m, metric) for m in rows.values()])
            entry[f"{metric}_mean"] = float(vals.mean())
            entry[f"{metric}_std"] = float(vals.std())
        report.per_type[kind] = entry
        present_means.append(entry["auroc_mean"])
    if present_means:
        report.avg = {"auroc_mean": float(np.mean(present_means))}
    return report


@dataclass
class StabilityPair:
    pair: str
    cosine: float


def matrix_cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity between two matrices flattened to vectors."""
    av = np.asarray(a, dtype=np.float64).ravel()
    bv = np.asarray(b, dtype=np.float64).ravel()
    denom = np.linalg.norm(av) * np.linalg.norm(bv)
    if denom == 0:
        raise ValueError("cannot compare all-zero matrices")
    return float(av @ bv / denom)


def causal_stability_report(
    series: LabeledSeries,
    causal_cfg: CausalConfig,
    opt_cfg: OptimizerConfig,
    batch_size: int = 256,
    val_fraction: float = 0.2,
    seed: int = 0,
) -> list[StabilityPair]:
    """Train one causal model per chronological quarter of the series and
    report the cosine similarity of the learned gate matrices for all six
    quarter pairs."""
    quarter_len = series.length // 4
    min_len = max(causal_cfg.window * 2 + 2, 10)
    if quarter_len < min_len:
        raise ConfigError(
            f"series of length {series.length} is too short for four quarters supporting discovery"
        )
    gates = []
    for q in range(4):
        chunk = series.slice(q * quarter_len, (q + 1) * quarter_len)
        train, val = split_train_val(chunk, val_fraction)
        model, _ = train_causal_discoverer(
            make_windows(train, causal_cfg.window),
            make_windows(val, causal_cfg.window),
            causal_cfg, opt_cfg, batch_size=batch_size, seed=seed,
        )
        gates.append(model.gates())
    pairs = []
    for a in range(4):
        for b in range(a + 1, 4):
            pairs.append(StabilityPair(f"q{a + 1}_vs_q{b + 1}", matrix_cosine(gates[a], gates[b])))
    return pairs
