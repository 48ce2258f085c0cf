"""Series containers, CSV IO, normalization, windowing, splitting, downsampling."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError

STD_FLOOR = 1e-8


@dataclass
class LabeledSeries:
    """A (T, N) value matrix with per-timestep binary anomaly labels and variable names."""

    values: np.ndarray
    labels: np.ndarray
    names: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ConfigError(f"series values must be 2-D, got shape {self.values.shape}")
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if self.labels.shape != (self.values.shape[0],):
            raise ConfigError("labels must be one per timestep")
        if not self.names:
            self.names = [f"x{i}" for i in range(self.values.shape[1])]
        if len(self.names) != self.values.shape[1]:
            raise ConfigError("need one name per variable")

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "LabeledSeries":
        return LabeledSeries(self.values.copy(), self.labels.copy(), list(self.names))

    def slice(self, start: int, stop: int) -> "LabeledSeries":
        return LabeledSeries(self.values[start:stop].copy(), self.labels[start:stop].copy(), list(self.names))

    @staticmethod
    def unlabeled(values: np.ndarray, names: list[str] | None = None) -> "LabeledSeries":
        values = np.asarray(values, dtype=np.float64)
        return LabeledSeries(values, np.zeros(values.shape[0], dtype=np.int8), names or [])


def save_series_csv(path, series: LabeledSeries, comment: str | None = None) -> None:
    """Header row of variable names, then one row of repr-formatted values per timestep."""
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append(",".join(series.names))
    for row in series.values:
        lines.append(",".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def save_labels_csv(path, series: LabeledSeries, comment: str | None = None) -> None:
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append("label")
    lines.extend(str(int(x)) for x in series.labels)
    Path(path).write_text("\n".join(lines) + "\n")


def _read_rows(path) -> list[list[str]]:
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh) if row and not row[0].lstrip().startswith("#")]


def load_csv(values_path, labels_path=None) -> LabeledSeries:
    """Load a series from a header+body CSV, with an optional one-column label file.

    A missing label file yields all-zero labels. Ragged rows and non-numeric
    cells raise ConfigError naming the offending row.
    """
    rows = _read_rows(values_path)
    if not rows:
        raise ConfigError(f"{values_path}: empty file")
    names = [c.strip() for c in rows[0]]
    body = rows[1:]
    if not body:
        raise ConfigError(f"{values_path}: header only, no data rows")
    values = np.empty((len(body), len(names)), dtype=np.float64)
    for i, row in enumerate(body):
        if len(row) != len(names):
            raise ConfigError(
                f"{values_path}: row {i + 2} has {len(row)} columns, expected {len(names)}"
            )
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError as err:
                raise ConfigError(f"{values_path}: row {i + 2}: non-numeric cell {cell!r}") from err

    labels = np.zeros(len(body), dtype=np.int8)
    if labels_path is not None:
        label_rows = _read_rows(labels_path)
        if not label_rows:
            raise ConfigError(f"{labels_path}: empty label file")
        entries = label_rows[1:] if not _is_int(label_rows[0][0]) else label_rows
        if len(entries) != len(body):
            raise ConfigError(
                f"{labels_path}: {len(entries)} labels for {len(body)} timesteps"
            )
        for i, row in enumerate(entries):
            try:
                labels[i] = int(row[0])
            except ValueError as err:
                raise ConfigError(f"{labels_path}: row {i + 1}: non-integer label {row[0]!r}") from err
    return LabeledSeries(values, labels, names)


def _is_int(cell: str) -> bool:
    try:
        int(cell)
        return True
    except ValueError:
        return False


def split_train_val(series: LabeledSeries, val_fraction: float = 0.2) -> tuple[LabeledSeries, LabeledSeries]:
    """Chronological split; validation is the final ``val_fraction`` of the series."""
    if not 0.0 < val_fraction < 1.0:
        raise ConfigError(f"val_fraction must be in (0, 1), got {val_fraction}")
    cut = series.length - int(round(series.length * val_fraction))
    if cut < 1 or cut >= series.length:
        raise ConfigError(f"series of length {series.length} cannot be split at fraction {val_fraction}")
    return series.slice(0, cut), series.slice(cut, series.length)


@dataclass
class NormStats:
    """Per-variable mean/std computed on training data only; std is floored at 1e-8."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.maximum(np.asarray(self.std, dtype=np.float64), STD_FLOOR)

    @staticmethod
    def from_series(train: LabeledSeries) -> "NormStats":
        return NormStats(train.values.mean(axis=0), train.values.std(axis=0))

    def invert(self, values: np.ndarray) -> np.ndarray:
        return values * self.std + self.mean


def znormalize(series: LabeledSeries, stats: NormStats) -> LabeledSeries:
    if stats.mean.shape != (series.n_vars,):
        raise ConfigError(
            f"normalization stats cover {stats.mean.shape[0]} variables, series has {series.n_vars}"
        )
    return LabeledSeries((series.values - stats.mean) / stats.std, series.labels.copy(), list(series.names))


@dataclass
class WindowSet:
    """All stride-1 sliding windows over a series.

    A window is labeled anomalous iff any of its timesteps is. Windows are
    views into the underlying array; ``get``/``stack`` materialize copies.
    """

    values: np.ndarray
    window: int
    end_indices: np.ndarray
    labels: np.ndarray
    names: list[str]

    def __len__(self) -> int:
        return len(self.end_indices)

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    def get(self, i: int) -> np.ndarray:
        t = self.end_indices[i]
        return self.values[t - self.window + 1 : t + 1].copy()

    def stack(self, idx=None) -> np.ndarray:
        """Windows as a (k, window, N) array."""
        if idx is None:
            idx = np.arange(len(self))
        idx = np.asarray(idx)
        offsets = np.arange(-self.window + 1, 1)
        return self.values[self.end_indices[idx][:, None] + offsets]

    def histories(self, idx=None) -> np.ndarray:
        """All but the final row of each window: (k, window-1, N)."""
        return self.stack(idx)[:, :-1, :]

    def targets(self, idx=None) -> np.ndarray:
        """Final row of each window: (k, N)."""
        if idx is None:
            idx = np.arange(len(self))
        return self.values[self.end_indices[np.asarray(idx)]]


def make_windows(series: LabeledSeries, window: int) -> WindowSet:
    if window < 2:
        raise ConfigError(f"window must be >= 2 (got {window}): forecasting needs a preceding step")
    if series.length < window:
        raise ConfigError(f"series of length {series.length} is shorter than window {window}")
    n = series.length - window + 1
    ends = np.arange(window - 1, series.length)
    # window i covers timesteps [i, i + window - 1]; anomalous iff any of them is labeled
    window_labels = np.zeros(n, dtype=np.int8)
    for t in np.flatnonzero(series.labels):
        lo = max(0, t - window + 1)
        hi = min(n, t + 1)
        window_labels[lo:hi] = 1
    return WindowSet(series.values, window, ends, window_labels, list(series.names))


def downsample(series: LabeledSeries, factor: int) -> LabeledSeries:
    """Keep every ``factor``-th timestep; a kept step's label is the OR over its consumed block."""
    if factor <= 0:
        raise ConfigError(f"downsample factor must be >= 1, got {factor}")
    if factor == 1:
        return series.copy()
    kept = series.values[::factor].copy()
    n = kept.shape[0]
    labels = np.zeros(n, dtype=np.int8)
    for k in range(n):
        block = series.labels[k * factor : (k + 1) * factor]
        labels[k] = 1 if block.any() else 0
    return LabeledSeries(kept, labels, list(series.names))
