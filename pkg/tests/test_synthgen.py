"""Generators and injectors: hand-evaluated oracles, support invariants, reproducibility."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carots.dataio import LabeledSeries
from carots.errors import ConfigError, NumericalError
from carots.synthgen import (AnomalySpec, Lorenz96Config, VARConfig,
                             build_synthetic_benchmark, companion_spectral_radius,
                             generate_lorenz96, generate_var, inject,
                             inject_collective_global, inject_collective_trend,
                             inject_point_contextual, inject_point_global,
                             lorenz96_rk4_step, random_stable_var_coeffs,
                             square_sine_offset)

# ---------------------------------------------------------------------------
# Lorenz96


def test_lorenz96_output_shape():
    cfg = Lorenz96Config(n_vars=8, length=500, burn_in=50, seed=0)
    series = generate_lorenz96(cfg)
    assert series.values.shape == (500, 8)
    assert series.labels.sum() == 0


def test_lorenz96_zero_forcing_zero_state_is_fixed_point():
    cfg = Lorenz96Config(n_vars=5, forcing=0.0, length=20, burn_in=5,
                         init_noise_std=0.0, seed=0)
    series = generate_lorenz96(cfg)
    np.testing.assert_array_equal(series.values, 0.0)


def test_lorenz96_single_rk4_step_matches_hand_oracle():
    state = np.array([1.0, 2.0, -1.0, 0.5])
    dt, forcing = 0.05, 10.0

    def deriv(x):
        n = len(x)
        out = np.empty(n)
        for i in range(n):
            out[i] = (x[(i + 1) % n] - x[(i - 2) % n]) * x[(i - 1) % n] - x[i] + forcing
        return out

    k1 = deriv(state)
    k2 = deriv(state + 0.5 * dt * k1)
    k3 = deriv(state + 0.5 * dt * k2)
    k4 = deriv(state + dt * k3)
    expected = state + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    np.testing.assert_allclose(lorenz96_rk4_step(state, dt, forcing), expected, rtol=1e-14)


def test_lorenz96_divergence_reports_step():
    cfg = Lorenz96Config(n_vars=6, length=100, burn_in=0, dt=5.0, seed=0)
    with pytest.raises(NumericalError, match="step"):
        generate_lorenz96(cfg)


def test_lorenz96_seeded_reproducibility():
    cfg = Lorenz96Config(n_vars=6, length=100, burn_in=20, seed=7)
    a = generate_lorenz96(cfg)
    b = generate_lorenz96(cfg)
    assert np.array_equal(a.values, b.values)


def test_lorenz96_needs_four_variables():
    with pytest.raises(ConfigError):
        Lorenz96Config(n_vars=3)


def test_lorenz96_stride_keeps_every_kth_step():
    base = Lorenz96Config(n_vars=5, length=40, burn_in=10, sample_stride=1, seed=3)
    strided = Lorenz96Config(n_vars=5, length=10, burn_in=10, sample_stride=4, seed=3)
    dense = generate_lorenz96(base)
    sparse = generate_lorenz96(strided)
    np.testing.assert_allclose(sparse.values, dense.values[::4], rtol=1e-12)


# ---------------------------------------------------------------------------
# VAR


def test_var_all_zero_coeffs_no_noise_gives_zeros():
    cfg = VARConfig(n_vars=3, lag_order=1, coeffs=np.zeros((1, 3, 3)), noise_std=0.0,
                    length=10, seed=0)
    series = generate_var(cfg)
    np.testing.assert_array_equal(series.values, 0.0)


def test_var_identity_coefficients_rejected_as_nonstationary():
    with pytest.raises(ConfigError, match="spectral radius"):
        VARConfig(n_vars=3, lag_order=1, coeffs=np.eye(3)[None], noise_std=0.0, length=10)


def test_var_recurrence_matches_hand_iteration():
    coeffs = np.array([[[0.5, 0.1], [0.0, 0.3]]])
    cfg = VARConfig(n_vars=2, lag_order=1, coeffs=coeffs, noise_std=0.7, length=5, seed=12)
    series = generate_var(cfg)
    rng = np.random.default_rng(12)
    x_prev = np.zeros(2)
    expected = []
    for _ in range(5):
        x = rng.normal(0.0, 0.7, size=2) + coeffs[0] @ x_prev
        expected.append(x)
        x_prev = x
    np.testing.assert_allclose(series.values, np.array(expected), rtol=1e-12)


def test_random_stable_coeffs_hit_target_radius():
    coeffs = random_stable_var_coeffs(6, 2, density=0.2, spectral_radius=0.8, seed=5)
    assert companion_spectral_radius(coeffs) == pytest.approx(0.8, abs=1e-8)


def test_var_seeded_reproducibility():
    coeffs = random_stable_var_coeffs(4, 2, seed=1)
    cfg = VARConfig(n_vars=4, lag_order=2, coeffs=coeffs, length=50, seed=9)
    assert np.array_equal(generate_var(cfg).values, generate_var(cfg).values)


# ---------------------------------------------------------------------------
# injectors


def _flat_series(values_1d, n_vars=1):
    values = np.tile(np.asarray(values_1d, dtype=float)[:, None], (1, n_vars))
    return LabeledSeries.unlabeled(values)


def test_point_global_formula_on_known_values():
    # variable values [0,1,2,3]: mean 1.5, population std sqrt(1.25)
    series = _flat_series([0.0, 1.0, 2.0, 3.0])
    spec = AnomalySpec(kind="pg", anomaly_ratio=0.25, affected_variables=(0,),
                       factor=2.0, seed=0)
    out, edits = inject_point_global(series, spec)
    expected = 1.5 + 2.0 * np.sqrt(1.25)
    assert expected == pytest.approx(3.7360679774997896)
    changed = np.flatnonzero(out.labels)
    assert len(changed) == 1
    assert out.values[changed[0], 0] == pytest.approx(expected)


def test_point_global_constant_variable_degenerate_sigma():
    series = _flat_series([5.0] * 10)
    spec = AnomalySpec(kind="pg", anomaly_ratio=0.2, affected_variables=(0,), seed=1)
    out, _ = inject_point_global(series, spec)
    assert out.labels.sum() == 2
    np.testing.assert_array_equal(out.values, 5.0)  # mean + 2*0 = the constant


def test_point_global_default_factor_is_two():
    assert AnomalySpec(kind="pg").factor == 2.0
    assert AnomalySpec(kind="pc").factor == 2.0
    assert AnomalySpec(kind="ct").factor == 2.0


def test_point_contextual_linear_ramp_oracle():
    # ramp 0..10 at t_a=5, r=2: local window {3..7}, mean 5, population std sqrt(2)
    series = _flat_series(np.arange(11.0))
    spec = AnomalySpec(kind="pc", anomaly_ratio=0.05, affected_variables=(0,),
                       factor=1.0, radius=2, seed=0)
    out, edits = inject_point_contextual(series, spec)
    t = int(np.flatnonzero(out.labels)[0])
    lo, hi = max(0, t - 2), min(11, t + 3)
    window = series.values[lo:hi, 0]
    expected = window.mean() + window.std()
    assert out.values[t, 0] == pytest.approx(expected)
    if t == 5:
        assert expected == pytest.approx(5.0 + np.sqrt(2.0))


def test_point_contextual_flat_window_keeps_constant():
    series = _flat_series([3.0] * 20)
    spec = AnomalySpec(kind="pc", anomaly_ratio=0.1, affected_variables=(0,), seed=2)
    out, _ = inject_point_contextual(series, spec)
    np.testing.assert_array_equal(out.values, 3.0)
    assert out.labels.sum() == 2


def test_point_contextual_radius_default_is_five():
    assert AnomalySpec(kind="pc").radius == 5


def test_collective_trend_offsets():
    series = _flat_series(np.zeros(50))
    spec = AnomalySpec(kind="ct", anomaly_ratio=0.06, affected_variables=(0,),
                       factor=2.0, radius=1, seed=4)
    out, _ = inject_collective_trend(series, spec)
    labeled = np.flatnonzero(out.labels)
    assert len(labeled) == 3  # one event of span 2r+1
    offsets = np.abs(out.values[labeled, 0])
    np.testing.assert_allclose(offsets, [0.0, 2.0, 4.0])


def test_collective_trend_zero_factor_labels_without_change():
    series = _flat_series(np.arange(60.0))
    spec = AnomalySpec(kind="ct", anomaly_ratio=0.1, affected_variables=(0,),
                       factor=0.0, radius=2, seed=1)
    out, _ = inject_collective_trend(series, spec)
    np.testing.assert_array_equal(out.values, series.values)
    assert out.labels.sum() > 0


def test_collective_trend_eleven_steps_per_event_at_default_radius():
    series = _flat_series(np.zeros(400))
    spec = AnomalySpec(kind="ct", anomaly_ratio=0.03, affected_variables=(0,), seed=3)
    out, _ = inject_collective_trend(series, spec)
    # one event: ratio*T/(2r+1) = 12/11 -> 1; events away from the boundary span 11 steps
    assert out.labels.sum() == 11


def test_collective_global_defaults():
    spec = AnomalySpec(kind="cg")
    assert (spec.amplitude, spec.frequency, spec.harmonics) == (1.5, 0.04, 5)


def test_collective_global_zero_amplitude_no_change():
    series = _flat_series(np.arange(100.0))
    spec = AnomalySpec(kind="cg", anomaly_ratio=0.12, affected_variables=(0,),
                       amplitude=0.0, seed=5)
    out, _ = inject_collective_global(series, spec)
    np.testing.assert_array_equal(out.values, series.values)
    assert out.labels.sum() > 0


def test_square_sine_zero_at_time_zero():
    assert square_sine_offset(0, 1.5, 0.04, 5) == pytest.approx(0.0)


def test_collective_global_wave_matches_formula():
    series = _flat_series(np.zeros(60))
    spec = AnomalySpec(kind="cg", anomaly_ratio=0.19, affected_variables=(0,),
                       radius=5, seed=6)
    out, _ = inject_collective_global(series, spec)
    for t in np.flatnonzero(out.labels):
        expected = sum(1.5 / (2 * k + 1) * np.sin(2 * np.pi * 0.04 * (2 * k + 1) * t)
                       for k in range(5))
        assert out.values[t, 0] == pytest.approx(expected)


def test_empty_affected_variables_rejected():
    with pytest.raises(ConfigError):
        AnomalySpec(kind="pg", affected_variables=())


@pytest.mark.parametrize("kind", ["pg", "pc", "ct", "cg"])
def test_injection_support_and_undo(kind):
    rng = np.random.default_rng(17)
    series = LabeledSeries.unlabeled(rng.normal(size=(300, 4)))
    spec = AnomalySpec(kind=kind, anomaly_ratio=0.05, affected_variables=(1, 3), seed=8)
    out, edits = inject(series, spec)
    # unaffected variables never change
    np.testing.assert_array_equal(out.values[:, [0, 2]], series.values[:, [0, 2]])
    # unlabeled timesteps of affected variables never change
    clean = out.labels == 0
    np.testing.assert_array_equal(out.values[clean][:, [1, 3]], series.values[clean][:, [1, 3]])
    # undo restores the original exactly
    restored = edits.undo(out)
    np.testing.assert_array_equal(restored.values, series.values)
    assert restored.labels.sum() == 0


@pytest.mark.parametrize("kind", ["pg", "pc", "ct", "cg"])
def test_injection_seeded_reproducibility(kind):
    series = LabeledSeries.unlabeled(np.random.default_rng(2).normal(size=(200, 5)))
    spec = AnomalySpec(kind=kind, anomaly_ratio=0.04, affected_variables=(0, 2), seed=11)
    a, _ = inject(series, spec)
    b, _ = inject(series, spec)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.labels, b.labels)


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=25, deadline=None)
def test_point_anomaly_count_tracks_ratio(seed):
    series = LabeledSeries.unlabeled(np.random.default_rng(0).normal(size=(500, 3)))
    spec = AnomalySpec(kind="pg", anomaly_ratio=0.02, affected_variables=(0,), seed=seed)
    out, _ = inject(series, spec)
    assert out.labels.sum() == 10  # round(0.02 * 500)


# ---------------------------------------------------------------------------
# benchmark assembly


def _small_lorenz_cfg(length=400, seed=0):
    return Lorenz96Config(n_vars=5, length=length, burn_in=30, seed=seed)


def test_benchmark_split_lengths():
    bench = build_synthetic_benchmark("lorenz96", _small_lorenz_cfg(), seed=0)
    assert bench.train.length == 160
    assert bench.val.length == 40
    assert bench.test_variants["pg"].length == 200


def test_benchmark_default_split_fractions_match_full_scale():
    # 40000 -> 16000 / 4000 / 20000
    assert [round(40000 * f) for f in (0.4, 0.1, 0.5)] == [16000, 4000, 20000]


def test_benchmark_train_val_labels_clean():
    bench = build_synthetic_benchmark("lorenz96", _small_lorenz_cfg(), seed=1)
    assert bench.train.labels.sum() == 0
    assert bench.val.labels.sum() == 0
    for kind in ("pg", "pc", "ct", "cg"):
        assert bench.test_variants[kind].labels.sum() > 0


def test_benchmark_anomaly_ratio_on_test():
    bench = build_synthetic_benchmark("lorenz96", _small_lorenz_cfg(length=2000, seed=2),
                                      anomaly_kinds=("pg",), anomaly_ratio=0.01, seed=2)
    # 1000-step test split at ratio 0.01 -> 10 anomalous steps
    assert bench.test_variants["pg"].labels.sum() == 10


def test_benchmark_rejects_injection_outside_test():
    with pytest.raises(ConfigError, match="test"):
        build_synthetic_benchmark("lorenz96", _small_lorenz_cfg(), inject_into="train")


def test_benchmark_reproducible_and_manifest_complete():
    a = build_synthetic_benchmark("lorenz96", _small_lorenz_cfg(seed=4), seed=4)
    b = build_synthetic_benchmark("lorenz96", _small_lorenz_cfg(seed=4), seed=4)
    assert np.array_equal(a.test_variants["cg"].values, b.test_variants["cg"].values)
    for key in ("system", "system_config", "split", "anomaly_ratio", "affected_variables",
                "variant_seeds", "seed"):
        assert key in a.manifest
