"""Causality-aware contrastive anomaly detection for multivariate time series.

Pipeline: discover a causal structure with a gated forecaster, augment
training windows with causality-preserving and -disturbing variants, train a
window encoder with a similarity-filtered one-class contrastive loss, and
score test windows with the z-normalized ensemble of embedding distance and
forecast error.
"""

from .augment import AugmentedBatch, CdaConfig, CpaConfig, build_batch, cda, cpa
from .causal import CausalConfig, CausalModel, train_causal_discoverer
from .config import ExperimentConfig, load_config
from .contrastive import (EncoderConfig, EncoderModel, SocConfig, alpha_at, soc_loss,
                          train_encoder, unfiltered_ratio)
from .dataio import (LabeledSeries, NormStats, WindowSet, downsample, load_csv,
                     make_windows, split_train_val, znormalize)
from .errors import ConfigError, NumericalError
from .evaluation import auprc, auroc, best_f1, causal_stability_report, per_type_report
from .scoring import (Centroid, ScoreSeries, ScoreStats, ensemble, fit_centroid,
                      fit_score_stats, score_cd, score_cl, score_dataset)
from .synthgen import (AnomalySpec, Lorenz96Config, VARConfig, build_synthetic_benchmark,
                       generate_lorenz96, generate_var, inject)

__version__ = "0.1.0"
