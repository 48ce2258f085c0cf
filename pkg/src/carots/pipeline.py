"""In-memory orchestration of the full pipeline: benchmark generation,
normalization/windowing, two-stage training, and scoring of all test variants.
The CLI wraps these functions with file IO."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .augment import CdaConfig, CpaConfig
from .causal import CausalConfig, CausalModel, CausalTrainLog, train_causal_discoverer
from .config import ExperimentConfig
from .contrastive import (EncoderConfig, EncoderModel, EpochLog, SocConfig, train_encoder)
from .dataio import LabeledSeries, NormStats, WindowSet, downsample, load_csv, make_windows, split_train_val, znormalize
from .errors import ConfigError
from .nnet import OptimizerConfig
from .scoring import Centroid, ScoreSeries, ScoreStats, fit_centroid, fit_score_stats, score_dataset
from .synthgen import Lorenz96Config, SyntheticBenchmark, VARConfig, build_synthetic_benchmark, random_stable_var_coeffs


def system_config(cfg: ExperimentConfig, seed: int):
    if cfg.system == "lorenz96":
        return Lorenz96Config(
            n_vars=cfg.n_vars, forcing=cfg.forcing, length=cfg.length, dt=cfg.dt,
            sample_stride=cfg.sample_stride, burn_in=cfg.burn_in,
            init_noise_std=cfg.init_noise_std, seed=seed,
        )
    if cfg.system == "var":
        coeffs = random_stable_var_coeffs(
            cfg.n_vars, cfg.lag_order, density=cfg.var_density,
            spectral_radius=cfg.var_spectral_radius, seed=seed,
        )
        return VARConfig(
            n_vars=cfg.n_vars, lag_order=cfg.lag_order, coeffs=coeffs,
            noise_std=cfg.var_noise_std, length=cfg.length, seed=seed,
        )
    raise ConfigError(f"no synthetic system config for {cfg.system!r}")


def build_benchmark(cfg: ExperimentConfig, seed: int) -> SyntheticBenchmark:
    return build_synthetic_benchmark(
        cfg.system, system_config(cfg, seed),
        anomaly_kinds=cfg.anomaly_kinds, anomaly_ratio=cfg.anomaly_ratio,
        n_affected=cfg.n_affected, factor=cfg.factor, radius=cfg.radius, amplitude=cfg.cg_amplitude,
        frequency=cfg.cg_frequency, harmonics=cfg.cg_harmonics,
        split=cfg.split, seed=seed,
    )


def csv_benchmark(cfg: ExperimentConfig) -> SyntheticBenchmark:
    """Wrap externally supplied CSV data in the benchmark container: the train
    file is split chronologically, the test file keeps its own labels."""
    train_full = load_csv(cfg.train_csv)
    if cfg.downsample > 1:
        train_full = downsample(train_full, cfg.downsample)
    train, val = split_train_val(train_full, cfg.val_fraction)
    variants = {}
    if cfg.test_csv is not None:
        test = load_csv(cfg.test_csv, cfg.test_labels_csv)
        if cfg.downsample > 1:
            test = downsample(test, cfg.downsample)
        variants["test"] = test
    return SyntheticBenchmark(
        system="csv", train=train, val=val, test_variants=variants,
        manifest={"system": "csv", "train_csv": cfg.train_csv, "test_csv": cfg.test_csv,
                  "downsample": cfg.downsample, "val_fraction": cfg.val_fraction},
    )


@dataclass
class PreparedData:
    """Normalized, windowed splits. Normalization statistics come from the
    training split only."""

    stats: NormStats
    train: WindowSet
    val: WindowSet
    variants: dict[str, WindowSet]


def prepare_windows(cfg: ExperimentConfig, bench: SyntheticBenchmark) -> PreparedData:
    stats = NormStats.from_series(bench.train)
    w = cfg.resolved_window()
    return PreparedData(
        stats=stats,
        train=make_windows(znormalize(bench.train, stats), w),
        val=make_windows(znormalize(bench.val, stats), w),
        variants={kind: make_windows(znormalize(series, stats), w)
                  for kind, series in bench.test_variants.items()},
    )


def optimizer_config(cfg: ExperimentConfig, stage: str) -> OptimizerConfig:
    if stage == "discover":
        return OptimizerConfig(
            lr=cfg.resolved_discover_lr(), weight_decay=cfg.weight_decay,
            clip_norm=cfg.clip_norm, warmup_epochs=cfg.warmup_epochs,
            total_epochs=float(cfg.resolved_discover_epochs()),
        )
    return OptimizerConfig(
        lr=cfg.lr, weight_decay=cfg.weight_decay, clip_norm=cfg.clip_norm,
        warmup_epochs=cfg.warmup_epochs, total_epochs=float(cfg.epochs),
    )


def augment_configs(cfg: ExperimentConfig) -> tuple[CpaConfig, CdaConfig]:
    return (
        CpaConfig(m_causing=cfg.m_causing, sigma_noise=cfg.sigma_noise),
        CdaConfig(cutoff_p=cfg.cutoff_p, bias_palette=cfg.bias_palette,
                  step_fraction=cfg.step_fraction),
    )


def soc_config(cfg: ExperimentConfig) -> SocConfig:
    return SocConfig(
        temperature=cfg.temperature, alpha_start=cfg.alpha_start,
        alpha_end=cfg.alpha_end, epochs=cfg.epochs, include_self=cfg.include_self,
    )


@dataclass
class TrainedModels:
    causal: CausalModel
    encoder: EncoderModel
    centroid: Centroid
    score_stats: ScoreStats
    causal_log: CausalTrainLog
    encoder_log: list[EpochLog] = field(default_factory=list)


def train_causal_stage(cfg: ExperimentConfig, prepared: PreparedData,
                       seed: int) -> tuple[CausalModel, CausalTrainLog]:
    n_vars = prepared.train.n_vars
    ccfg = CausalConfig(
        n_vars=n_vars, window=cfg.resolved_window(), hidden=cfg.causal_hidden,
        lambda_sparse=cfg.lambda_sparse, gate_threshold=cfg.gate_threshold, seed=seed,
    )
    return train_causal_discoverer(
        prepared.train, prepared.val, ccfg, optimizer_config(cfg, "discover"),
        batch_size=cfg.discover_batch_size, seed=seed,
    )


def train_encoder_stage(cfg: ExperimentConfig, prepared: PreparedData,
                        causal: CausalModel, seed: int) -> tuple[EncoderModel, list[EpochLog]]:
    n_vars = prepared.train.n_vars
    enc_cfg = EncoderConfig(
        n_vars=n_vars, window=cfg.resolved_window(), hidden=cfg.enc_hidden,
        embed_dim=cfg.embed_dim, unit_norm=cfg.unit_norm, arch=cfg.encoder_arch, seed=seed,
    )
    cpa_cfg, cda_cfg = augment_configs(cfg)
    return train_encoder(
        prepared.train, prepared.val, causal, cpa_cfg, cda_cfg, soc_config(cfg),
        enc_cfg, optimizer_config(cfg, "train"), batch_size=cfg.batch_size, seed=seed,
    )


def fit_scoring(cfg: ExperimentConfig, prepared: PreparedData, causal: CausalModel,
                encoder: EncoderModel, seed: int) -> tuple[Centroid, ScoreStats]:
    cpa_cfg, _ = augment_configs(cfg)
    centroid = fit_centroid(prepared.train, encoder, causal, cpa_cfg, seed=seed)
    stats = fit_score_stats(prepared.train, encoder, centroid, causal, cfg.resolved_distance())
    return centroid, stats


def train_models(cfg: ExperimentConfig, prepared: PreparedData, seed: int) -> TrainedModels:
    causal, causal_log = train_causal_stage(cfg, prepared, seed)
    encoder, encoder_log = train_encoder_stage(cfg, prepared, causal, seed)
    centroid, stats = fit_scoring(cfg, prepared, causal, encoder, seed)
    return TrainedModels(causal, encoder, centroid, stats, causal_log, encoder_log)


def score_variants(cfg: ExperimentConfig, models: TrainedModels,
                   prepared: PreparedData) -> dict[str, ScoreSeries]:
    distance = cfg.resolved_distance()
    return {
        kind: score_dataset(ws, models.encoder, models.centroid, models.causal,
                            models.score_stats, distance)
        for kind, ws in prepared.variants.items()
    }


@dataclass
class ExperimentRun:
    seed: int
    benchmark: SyntheticBenchmark
    prepared: PreparedData
    models: TrainedModels
    scores: dict[str, ScoreSeries]


def run_experiment(cfg: ExperimentConfig, seed: int) -> ExperimentRun:
    bench = csv_benchmark(cfg) if cfg.system == "csv" else build_benchmark(cfg, seed)
    prepared = prepare_windows(cfg, bench)
    models = train_models(cfg, prepared, seed)
    scores = score_variants(cfg, models, prepared)
    return ExperimentRun(seed, bench, prepared, models, scores)
