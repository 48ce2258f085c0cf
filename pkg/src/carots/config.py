"""Experiment configuration: one dataclass covering data generation, windowing,
training, augmentation, and scoring, with JSON round-trip and a stable hash.

The hash covers every field that determines training artifacts; output paths,
seed lists, and presentation-time choices (score mode) are excluded so the
same trained models can be scored in different modes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError

HASH_EXCLUDED = ("out_dir", "score_mode", "seeds")

SYSTEM_WINDOW_DEFAULTS = {"lorenz96": 2, "var": 4, "csv": 10}
SYSTEM_DISTANCE_DEFAULTS = {"lorenz96": "l2", "var": "cosine", "csv": "l2"}


@dataclass
class ExperimentConfig:
    # dataset source
    system: str = "lorenz96"                 # lorenz96 | var | csv
    out_dir: str | None = None
    seeds: tuple[int, ...] = (0, 1, 2)
    # synthetic benchmark
    n_vars: int = 128
    length: int = 40000
    split: tuple[float, float, float] = (0.4, 0.1, 0.5)
    anomaly_ratio: float = 0.01
    n_affected: int = 10
    anomaly_kinds: tuple[str, ...] = ("pg", "pc", "ct", "cg")
    factor: float = 2.0
    radius: int = 5
    cg_amplitude: float = 1.5
    cg_frequency: float = 0.04
    cg_harmonics: int = 5
    # lorenz96 system
    forcing: float = 10.0
    dt: float = 0.05
    burn_in: int = 1000
    sample_stride: int = 1
    init_noise_std: float = 0.1
    # var system
    lag_order: int = 2
    var_density: float = 0.1
    var_noise_std: float = 1.0
    var_spectral_radius: float = 0.8
    # csv source
    train_csv: str | None = None
    test_csv: str | None = None
    test_labels_csv: str | None = None
    # windowing / preprocessing
    window: int | None = None                # None -> per-system default (2 / 4 / 10)
    downsample: int = 1
    val_fraction: float = 0.2
    # optimization (shared defaults; discover_* configure the discovery stage,
    # which stands in for an external algorithm and needs more aggressive steps
    # at small data scales)
    batch_size: int = 256
    epochs: int = 30
    lr: float = 1e-4
    weight_decay: float = 0.0
    warmup_epochs: float = 5.0
    clip_norm: float = 1.0
    discover_epochs: int | None = 60
    discover_lr: float | None = 0.01
    discover_batch_size: int = 256
    # causal discovery
    causal_hidden: int | None = 32
    lambda_sparse: float = 0.01
    gate_threshold: float = 0.5
    # augmentation
    m_causing: int = 1
    sigma_noise: float = 0.2
    cutoff_p: float = 0.1
    bias_palette: tuple[float, ...] = (-0.5, -0.4, -0.3, -0.2, -0.1, 0.1, 0.2, 0.3, 0.4, 0.5)
    step_fraction: float = 0.5
    # contrastive encoder
    enc_hidden: int = 64
    embed_dim: int = 32
    unit_norm: bool = True
    encoder_arch: str = "gru"
    temperature: float = 0.1
    alpha_start: float = 0.5
    alpha_end: float = 0.9
    include_self: bool = True
    # scoring
    distance: str | None = None              # None -> cosine for var, l2 otherwise
    score_mode: str = "ensemble"

    def __post_init__(self) -> None:
        if self.system not in ("lorenz96", "var", "csv"):
            raise ConfigError(f"unknown system {self.system!r}")
        if self.score_mode not in ("ensemble", "cl-only", "cd-only"):
            raise ConfigError(f"unknown score mode {self.score_mode!r}")
        if self.distance is not None and self.distance not in ("l2", "cosine"):
            raise ConfigError(f"unknown distance {self.distance!r}")
        if self.system == "csv" and self.train_csv is None:
            raise ConfigError("csv system requires train_csv")
        if not self.seeds:
            raise ConfigError("need at least one seed")

    # -- resolved defaults ---------------------------------------------------

    def resolved_window(self) -> int:
        return self.window if self.window is not None else SYSTEM_WINDOW_DEFAULTS[self.system]

    def resolved_distance(self) -> str:
        return self.distance if self.distance is not None else SYSTEM_DISTANCE_DEFAULTS[self.system]

    def resolved_discover_epochs(self) -> int:
        return self.discover_epochs if self.discover_epochs is not None else self.epochs

    def resolved_discover_lr(self) -> float:
        return self.discover_lr if self.discover_lr is not None else self.lr

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(ExperimentConfig)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        coerced = dict(data)
        for key in ("seeds", "split", "anomaly_kinds", "bias_palette"):
            if key in coerced and coerced[key] is not None:
                coerced[key] = tuple(coerced[key])
        return ExperimentConfig(**coerced)

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def config_hash(self) -> str:
        doc = self.to_dict()
        for key in HASH_EXCLUDED:
            doc.pop(key, None)
        payload = json.dumps(doc, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, optionally updated from a JSON file, then from override values."""
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError as err:
            raise ConfigError(f"config file not found: {path}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: invalid JSON ({err})") from err
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
    cfg = ExperimentConfig.from_dict(data)
    if overrides:
        cfg = cfg.with_overrides(**overrides)
    return cfg


def save_config(path, cfg: ExperimentConfig) -> None:
    doc = cfg.to_dict()
    doc.pop("out_dir", None)  # paths are runtime parameters, not experiment identity
    doc["config_hash"] = cfg.config_hash()
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
