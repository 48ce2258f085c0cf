"""Synthetic benchmarks: Lorenz96 and VAR generators plus four anomaly injectors.

Injectors return the modified series together with an edit record, so every
injection can be undone exactly. Anomalies are only ever written into the
test split of a benchmark.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataio import LabeledSeries
from .errors import ConfigError, NumericalError

ANOMALY_KINDS = ("pg", "pc", "ct", "cg")


# ---------------------------------------------------------------------------
# Lorenz96


@dataclass
class Lorenz96Config:
    n_vars: int = 128
    forcing: float = 10.0
    length: int = 40000
    dt: float = 0.05
    sample_stride: int = 1
    burn_in: int = 1000
    init_noise_std: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_vars < 4:
            raise ConfigError("Lorenz96 needs at least 4 variables for distinct cyclic indices")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.sample_stride < 1:
            raise ConfigError("sample_stride must be >= 1")
        if self.length < 1:
            raise ConfigError("length must be >= 1")


def lorenz96_derivative(state: np.ndarray, forcing: float) -> np.ndarray:
    """dx_i/dt = (x_{i+1} - x_{i-2}) * x_{i-1} - x_i + F with cyclic indices."""
    xp1 = np.roll(state, -1)
    xm1 = np.roll(state, 1)
    xm2 = np.roll(state, 2)
    return (xp1 - xm2) * xm1 - state + forcing


def lorenz96_rk4_step(state: np.ndarray, dt: float, forcing: float) -> np.ndarray:
    """Classical 4th-order Runge-Kutta update."""
    k1 = lorenz96_derivative(state, forcing)
    k2 = lorenz96_derivative(state + 0.5 * dt * k1, forcing)
    k3 = lorenz96_derivative(state + 0.5 * dt * k2, forcing)
    k4 = lorenz96_derivative(state + dt * k3, forcing)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def generate_lorenz96(cfg: Lorenz96Config) -> LabeledSeries:
    """Integrate from a random state near the forcing level, discard the burn-in,
    and return ``length`` sampled steps (all labels zero)."""
    rng = np.random.default_rng(cfg.seed)
    state = cfg.forcing + rng.normal(0.0, cfg.init_noise_std, size=cfg.n_vars)
    total_steps = cfg.burn_in + cfg.length * cfg.sample_stride
    out = np.empty((cfg.length, cfg.n_vars), dtype=np.float64)
    kept = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(total_steps):
            state = lorenz96_rk4_step(state, cfg.dt, cfg.forcing)
            if not np.all(np.isfinite(state)):
                raise NumericalError(f"Lorenz96 integration diverged at step {step}")
            if step >= cfg.burn_in and (step - cfg.burn_in) % cfg.sample_stride == 0:
                out[kept] = state
                kept += 1
                if kept == cfg.length:
                    break
    return LabeledSeries.unlabeled(out)


# ---------------------------------------------------------------------------
# VAR


def companion_spectral_radius(coeffs: np.ndarray) -> float:
    """Spectral radius of the companion matrix of lag matrices (p, N, N)."""
    p, n, _ = coeffs.shape
    comp = np.zeros((p * n, p * n))
    comp[:n, :] = np.concatenate([coeffs[k] for k in range(p)], axis=1)
    if p > 1:
        comp[n:, : n * (p - 1)] = np.eye(n * (p - 1))
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def random_stable_var_coeffs(n_vars: int, lag_order: int, density: float = 0.1,
                             spectral_radius: float = 0.8, seed: int = 0) -> np.ndarray:
    """Seeded sparse random lag matrices rescaled to an exact companion spectral radius.

    Scaling lag k by s**k scales every companion eigenvalue by s, so the
    target radius is hit exactly. Self-lags at lag 1 are always kept so each
    variable has at least one cause.
    """
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(0.0, 1.0, size=(lag_order, n_vars, n_vars))
    mask = rng.random(size=coeffs.shape) < density
    mask[0][np.diag_indices(n_vars)] = True
    coeffs = coeffs * mask
    rho = companion_spectral_radius(coeffs)
    if rho == 0.0:
        raise ConfigError("degenerate all-zero VAR draw; change the seed or density")
    scale = spectral_radius / rho
    for k in range(lag_order):
        coeffs[k] *= scale ** (k + 1)
    return coeffs


@dataclass
class VARConfig:
    n_vars: int
    lag_order: int
    coeffs: np.ndarray
    noise_std: float = 1.0
    length: int = 40000
    seed: int = 0

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.shape != (self.lag_order, self.n_vars, self.n_vars):
            raise ConfigError(
                f"coefficient tensor shape {self.coeffs.shape} does not match "
                f"(lag_order={self.lag_order}, n={self.n_vars})"
            )
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")
        radius = companion_spectral_radius(self.coeffs)
        if radius >= 1.0:
            raise ConfigError(
                f"unstable VAR coefficients: companion spectral radius {radius:.4f} >= 1"
            )


def generate_var(cfg: VARConfig) -> LabeledSeries:
    """Iterate x_t = sum_k A_k x_{t-k} + eps_t from zero initial history."""
    rng = np.random.default_rng(cfg.seed)
    values = np.zeros((cfg.length, cfg.n_vars), dtype=np.float64)
    for t in range(cfg.length):
        x = rng.normal(0.0, cfg.noise_std, size=cfg.n_vars) if cfg.noise_std > 0 else np.zeros(cfg.n_vars)
        for k in range(cfg.lag_order):
            if t - k - 1 >= 0:
                x = x + cfg.coeffs[k] @ values[t - k - 1]
        values[t] = x
    return LabeledSeries.unlabeled(values)


# ---------------------------------------------------------------------------
# anomaly injection


@dataclass
class AnomalySpec:
    kind: str
    anomaly_ratio: float = 0.01
    affected_variables: tuple[int, ...] | None = None  # None: 10 random (all if N <= 10)
    factor: float = 2.0
    radius: int = 5
    amplitude: float = 1.5
    frequency: float = 0.04
    harmonics: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ANOMALY_KINDS:
            raise ConfigError(f"unknown anomaly kind {self.kind!r}; expected one of {ANOMALY_KINDS}")
        if not 0.0 < self.anomaly_ratio < 1.0:
            raise ConfigError("anomaly_ratio must be in (0, 1)")
        if self.radius < 1:
            raise ConfigError("radius must be >= 1")
        if self.affected_variables is not None and len(self.affected_variables) == 0:
            raise ConfigError("affected_variables must not be empty")

    def resolve_affected(self, n_vars: int, rng: np.random.Generator) -> np.ndarray:
        if self.affected_variables is not None:
            affected = np.asarray(sorted(set(self.affected_variables)), dtype=np.int64)
            if affected.min() < 0 or affected.max() >= n_vars:
                raise ConfigError("affected_variables out of range")
            return affected
        count = min(10, n_vars)
        return np.sort(rng.choice(n_vars, size=count, replace=False))


@dataclass
class InjectionEdits:
    """Exact record of every modified cell, sufficient to undo the injection."""

    t_idx: np.ndarray
    var_idx: np.ndarray
    old: np.ndarray
    new: np.ndarray

    def undo(self, series: LabeledSeries) -> LabeledSeries:
        restored = series.copy()
        restored.values[self.t_idx, self.var_idx] = self.old
        restored.labels[...] = 0
        return restored


class _EditLog:
    def __init__(self) -> None:
        self.t: list[int] = []
        self.v: list[int] = []
        self.old: list[float] = []
        self.new: list[float] = []

    def put(self, t: int, v: int, old: float, new: float) -> None:
        self.t.append(t)
        self.v.append(v)
        self.old.append(old)
        self.new.append(new)

    def done(self) -> InjectionEdits:
        return InjectionEdits(
            np.asarray(self.t, dtype=np.int64),
            np.asarray(self.v, dtype=np.int64),
            np.asarray(self.old, dtype=np.float64),
            np.asarray(self.new, dtype=np.float64),
        )


def _point_steps(length: int, ratio: float, rng: np.random.Generator) -> np.ndarray:
    count = max(1, int(round(length * ratio)))
    return np.sort(rng.choice(length, size=count, replace=False))


def _event_centers(length: int, ratio: float, radius: int, rng: np.random.Generator) -> np.ndarray:
    """Event centers with a minimum gap of 2r+1 so collective events never overlap."""
    span = 2 * radius + 1
    count = max(1, int(round(length * ratio / span)))
    chosen: list[int] = []
    for cand in rng.permutation(length):
        if all(abs(int(cand) - c) >= span for c in chosen):
            chosen.append(int(cand))
            if len(chosen) == count:
                break
    if len(chosen) < count:
        raise ConfigError(
            f"cannot place {count} events of span {span} in a series of length {length}"
        )
    return np.sort(np.asarray(chosen, dtype=np.int64))


def inject_point_global(series: LabeledSeries, spec: AnomalySpec) -> tuple[LabeledSeries, InjectionEdits]:
    """Replace selected cells with (global mean + factor * global std) of the clean series."""
    if spec.kind != "pg":
        raise ConfigError(f"spec kind {spec.kind!r} does not match injector 'pg'")
    rng = np.random.default_rng(spec.seed)
    affected = spec.resolve_affected(series.n_vars, rng)
    out = series.copy()
    base = series.values
    mu = base.mean(axis=0)
    sigma = base.std(axis=0)
    steps = _point_steps(series.length, spec.anomaly_ratio, rng)
    log = _EditLog()
    for t in steps:
        for i in affected:
            new = mu[i] + spec.factor * sigma[i]
            log.put(int(t), int(i), float(out.values[t, i]), float(new))
            out.values[t, i] = new
        out.labels[t] = 1
    return out, log.done()


def inject_point_contextual(series: LabeledSeries, spec: AnomalySpec) -> tuple[LabeledSeries, InjectionEdits]:
    """Replace selected cells with (local mean + factor * local std) over a
    radius-r window around the step, clipped at the series boundaries."""
    if spec.kind != "pc":
        raise ConfigError(f"spec kind {spec.kind!r} does not match injector 'pc'")
    rng = np.random.default_rng(spec.seed)
    affected = spec.resolve_affected(series.n_vars, rng)
    out = series.copy()
    base = series.values
    steps = _point_steps(series.length, spec.anomaly_ratio, rng)
    log = _EditLog()
    r = spec.radius
    for t in steps:
        lo = max(0, int(t) - r)
        hi = min(series.length, int(t) + r + 1)
        for i in affected:
            chunk = base[lo:hi, i]
            new = chunk.mean() + spec.factor * chunk.std()
            log.put(int(t), int(i), float(out.values[t, i]), float(new))
            out.values[t, i] = new
        out.labels[t] = 1
    return out, log.done()


def inject_collective_trend(series: LabeledSeries, spec: AnomalySpec) -> tuple[LabeledSeries, InjectionEdits]:
    """Add a ramp sign * factor * (t - interval_start) over each event interval."""
    if spec.kind != "ct":
        raise ConfigError(f"spec kind {spec.kind!r} does not match injector 'ct'")
    rng = np.random.default_rng(spec.seed)
    affected = spec.resolve_affected(series.n_vars, rng)
    out = series.copy()
    centers = _event_centers(series.length, spec.anomaly_ratio, spec.radius, rng)
    log = _EditLog()
    r = spec.radius
    for c in centers:
        start = int(c) - r
        lo = max(0, start)
        hi = min(series.length, int(c) + r + 1)
        for i in affected:
            sign = 1.0 if rng.random() < 0.5 else -1.0
            for t in range(lo, hi):
                new = out.values[t, i] + sign * spec.factor * (t - start)
                log.put(t, int(i), float(out.values[t, i]), float(new))
                out.values[t, i] = new
        out.labels[lo:hi] = 1
    return out, log.done()


def square_sine_offset(t, amplitude: float, frequency: float, harmonics: int):
    """Truncated square-wave Fourier series: sum_k A/(2k+1) * sin(2 pi f (2k+1) t)."""
    t = np.asarray(t, dtype=np.float64)
    total = np.zeros_like(t)
    for k in range(harmonics):
        m = 2 * k + 1
        total = total + (amplitude / m) * np.sin(2.0 * np.pi * frequency * m * t)
    return total


def inject_collective_global(series: LabeledSeries, spec: AnomalySpec) -> tuple[LabeledSeries, InjectionEdits]:
    """Add a square-sine wave (in absolute time) over each event interval."""
    if spec.kind != "cg":
        raise ConfigError(f"spec kind {spec.kind!r} does not match injector 'cg'")
    rng = np.random.default_rng(spec.seed)
    affected = spec.resolve_affected(series.n_vars, rng)
    out = series.copy()
    centers = _event_centers(series.length, spec.anomaly_ratio, spec.radius, rng)
    log = _EditLog()
    r = spec.radius
    for c in centers:
        lo = max(0, int(c) - r)
        hi = min(series.length, int(c) + r + 1)
        ts = np.arange(lo, hi)
        offsets = square_sine_offset(ts, spec.amplitude, spec.frequency, spec.harmonics)
        for i in affected:
            for t, off in zip(ts, offsets):
                new = out.values[t, i] + off
                log.put(int(t), int(i), float(out.values[t, i]), float(new))
                out.values[t, i] = new
        out.labels[lo:hi] = 1
    return out, log.done()


_INJECTORS = {
    "pg": inject_point_global,
    "pc": inject_point_contextual,
    "ct": inject_collective_trend,
    "cg": inject_collective_global,
}


def inject(series: LabeledSeries, spec: AnomalySpec) -> tuple[LabeledSeries, InjectionEdits]:
    return _INJECTORS[spec.kind](series, spec)


# ---------------------------------------------------------------------------
# benchmark assembly


@dataclass
class SyntheticBenchmark:
    """Chronological train/val splits plus one injected test variant per anomaly kind."""

    system: str
    train: LabeledSeries
    val: LabeledSeries
    test_variants: dict[str, LabeledSeries]
    manifest: dict = field(default_factory=dict)


def build_synthetic_benchmark(
    system: str,
    system_cfg,
    anomaly_kinds: Sequence[str] = ANOMALY_KINDS,
    anomaly_ratio: float = 0.01,
    n_affected: int = 10,
    factor: float = 2.0,
    radius: int = 5,
    amplitude: float = 1.5,
    frequency: float = 0.04,
    harmonics: int = 5,
    split: tuple[float, float, float] = (0.4, 0.1, 0.5),
    seed: int = 0,
    inject_into: str = "test",
) -> SyntheticBenchmark:
    """Generate a clean series, split it chronologically, and inject each anomaly
    kind into its own copy of the test split. Train/val stay anomaly-free."""
    if inject_into != "test":
        raise ConfigError("anomalies may only be injected into the test split")
    if abs(sum(split) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {split}")
    for kind in anomaly_kinds:
        if kind not in ANOMALY_KINDS:
            raise ConfigError(f"unknown anomaly kind {kind!r}")

    if system == "lorenz96":
        clean = generate_lorenz96(system_cfg)
    elif system == "var":
        clean = generate_var(system_cfg)
    else:
        raise ConfigError(f"unknown system {system!r}; expected 'lorenz96' or 'var'")

    total = clean.length
    n_train = int(round(total * split[0]))
    n_val = int(round(total * split[1]))
    train = clean.slice(0, n_train)
    val = clean.slice(n_train, n_train + n_val)
    test = clean.slice(n_train + n_val, total)

    rng_affected = np.random.default_rng([seed, 997])
    count = min(n_affected, clean.n_vars)
    affected = np.sort(rng_affected.choice(clean.n_vars, size=count, replace=False))
    variants: dict[str, LabeledSeries] = {}
    specs: dict[str, AnomalySpec] = {}
    for k, kind in enumerate(anomaly_kinds):
        spec = AnomalySpec(
            kind=kind,
            anomaly_ratio=anomaly_ratio,
            affected_variables=tuple(int(i) for i in affected),
            factor=factor,
            radius=radius,
            amplitude=amplitude,
            frequency=frequency,
            harmonics=harmonics,
            seed=_variant_seed(seed, k),
        )
        specs[kind] = spec
        variants[kind], _ = inject(test, spec)

    manifest = {
        "system": system,
        "system_config": _config_dict(system_cfg),
        "split": list(split),
        "lengths": {"train": train.length, "val": val.length, "test": test.length},
        "anomaly_ratio": anomaly_ratio,
        "n_affected": count,
        "factor": factor,
        "radius": radius,
        "amplitude": amplitude,
        "frequency": frequency,
        "harmonics": harmonics,
        "affected_variables": [int(i) for i in affected],
        "anomaly_kinds": list(anomaly_kinds),
        "variant_seeds": {kind: specs[kind].seed for kind in anomaly_kinds},
        "seed": seed,
    }
    return SyntheticBenchmark(system, train, val, variants, manifest)


def _variant_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence([seed, 101 + k]).generate_state(1)[0])


def _config_dict(cfg) -> dict:
    out = {}
    for key, value in vars(cfg).items():
        if isinstance(value, np.ndarray):
            out[key] = value.tolist()
        elif isinstance(value, (np.integer, np.floating)):
            out[key] = value.item()
        else:
            out[key] = value
    return out
