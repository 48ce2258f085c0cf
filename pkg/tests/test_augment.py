"""CPA/CDA augmentors: support invariants, graph-walk semantics, batch assembly."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carots.augment import (AugmentedBatch, CdaConfig, CpaConfig, build_batch, cda,
                            cpa, dfs_subgraph)
from carots.causal import CausalConfig, CausalModel
from carots.errors import ConfigError


def _model_with_gates(n_vars, window, open_edges, seed=0, hidden=32):
    """A causal model whose binary graph contains exactly ``open_edges``."""
    model = CausalModel(CausalConfig(n_vars=n_vars, window=window, hidden=hidden, seed=seed))
    model.pset.params["gate_logits"][...] = -6.0
    for i, j in open_edges:
        model.pset.params["gate_logits"][i, j] = 6.0
    return model


def _linear_model(n_vars, window, open_edges, weights):
    """Linear forecasters with hand-set weights: prediction_j = w_j . gated flat history."""
    model = _model_with_gates(n_vars, window, open_edges, hidden=None)
    for j in range(n_vars):
        model.pset.params[f"f{j}.W"][...] = 0.0
        model.pset.params[f"f{j}.b"][...] = 0.0
    for j, w in weights.items():
        model.pset.params[f"f{j}.W"][...] = np.asarray(w)[:, None]
    return model


# ---------------------------------------------------------------------------
# CPA


def test_cpa_no_children_only_history_changes():
    # variable gates all closed: whatever variable is chosen has no effects
    model = _model_with_gates(3, 3, open_edges=[])
    window = np.arange(9.0).reshape(3, 3)
    out, trace = cpa(window, model, CpaConfig(sigma_noise=0.5), np.random.default_rng(0))
    assert trace.effects == []
    np.testing.assert_array_equal(out[2], window[2])  # final row untouched
    diff = out != window
    assert diff[:1].sum() == 0  # only the last history row may change
    assert diff[1].sum() == len(trace.causing)


def test_cpa_zero_noise_replaces_effects_with_plain_forecast():
    model = _model_with_gates(2, 2, open_edges=[(0, 1)])
    window = np.array([[1.0, 2.0], [3.0, 4.0]])
    out, trace = cpa(window, model, CpaConfig(sigma_noise=0.0), np.random.default_rng(1))
    np.testing.assert_array_equal(out[0], window[0])  # zero noise: history unchanged
    expected = model.forecast(window[:1])
    for e in trace.effects:
        assert out[1, e] == expected[e]
    untouched = [v for v in range(2) if v not in trace.effects]
    np.testing.assert_array_equal(out[1, untouched], window[1, untouched])


def test_cpa_two_variable_chain_linear_forecaster_oracle():
    # chain 0 -> 1 (plus self loops); forecaster for 1: 0.5*x0 + 0.25*x1 at the last step
    open_edges = [(0, 0), (1, 1), (0, 1)]
    model = _linear_model(2, 2, open_edges, weights={1: [0.5, 0.25]})
    window = np.array([[2.0, 4.0], [10.0, 20.0]])
    cfg = CpaConfig(m_causing=1, sigma_noise=0.3)
    rng = np.random.default_rng(5)
    out, trace = cpa(window, model, cfg, rng)
    assert 1 in trace.effects  # both candidate causes have child 1
    z = dict(trace.noise)
    hist = window[0].copy()
    for v, noise in z.items():
        hist[v] += noise
    gates = model.gates()
    expected_1 = 0.5 * (hist[0] * gates[0, 1]) + 0.25 * (hist[1] * gates[1, 1])
    assert out[1, 1] == pytest.approx(expected_1, rel=1e-6)


def test_cpa_support_exact():
    rng = np.random.default_rng(7)
    model = _model_with_gates(5, 4, open_edges=[(0, 1), (1, 2), (3, 3)], seed=2)
    window = rng.normal(size=(4, 5))
    out, trace = cpa(window, model, CpaConfig(sigma_noise=0.4), np.random.default_rng(8))
    diff = out != window
    # rows before the last history step never change
    assert diff[:2].sum() == 0
    # last history row: only causing variables
    assert set(np.flatnonzero(diff[2])) <= set(trace.causing)
    # final row: only effect variables
    assert set(np.flatnonzero(diff[3])) <= set(trace.effects)


def test_cpa_m_bounds_validated():
    model = _model_with_gates(3, 2, open_edges=[])
    with pytest.raises(ConfigError):
        cpa(np.zeros((2, 3)), model, CpaConfig(m_causing=3), np.random.default_rng(0))


# ---------------------------------------------------------------------------
# CDA


def _chain_adjacency(n):
    a = np.zeros((n, n), dtype=np.int8)
    for i in range(n - 1):
        a[i, i + 1] = 1
    return a


def test_dfs_no_edges_only_seed():
    a = np.zeros((4, 4), dtype=np.int8)
    assert dfs_subgraph(a, 2, 0.1, np.random.default_rng(0)) == [2]


def test_dfs_p_zero_reaches_full_descendant_set():
    # oracle: transitive closure by boolean matrix powers
    rng = np.random.default_rng(3)
    a = (rng.random((7, 7)) < 0.3).astype(np.int8)
    np.fill_diagonal(a, 0)
    reach = a.astype(bool)
    for _ in range(7):
        reach = reach | (reach @ a.astype(bool))
    for seed_var in range(7):
        visited = set(dfs_subgraph(a, seed_var, 0.0, np.random.default_rng(9)))
        expected = {seed_var} | set(np.flatnonzero(reach[seed_var]))
        assert visited == expected


def test_dfs_p_one_only_seed():
    a = _chain_adjacency(6)
    assert dfs_subgraph(a, 0, 1.0, np.random.default_rng(1)) == [0]


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=30, deadline=None)
def test_dfs_visited_subset_of_reachable(seed):
    rng = np.random.default_rng(seed)
    a = (rng.random((6, 6)) < 0.4).astype(np.int8)
    np.fill_diagonal(a, 0)
    reach = a.astype(bool)
    for _ in range(6):
        reach = reach | (reach @ a.astype(bool))
    seed_var = int(rng.integers(6))
    visited = set(dfs_subgraph(a, seed_var, 0.3, rng))
    assert visited <= ({seed_var} | set(np.flatnonzero(reach[seed_var])))
    assert seed_var in visited


def test_cda_biases_from_palette_on_half_the_steps():
    a = _chain_adjacency(4)
    window = np.zeros((6, 4))
    cfg = CdaConfig(cutoff_p=0.0)
    out, trace = cda(window, a, cfg, np.random.default_rng(2))
    assert set(trace.visited) >= {trace.seed_var}
    for v in trace.visited:
        assert trace.biases[v] in cfg.bias_palette
        assert len(trace.steps[v]) == 3  # round(6 * 0.5)
        col = out[:, v]
        assert np.count_nonzero(col) == 3
        np.testing.assert_allclose(col[col != 0], trace.biases[v])
    untouched = [v for v in range(4) if v not in trace.visited]
    np.testing.assert_array_equal(out[:, untouched], 0.0)


def test_cda_width_two_window_still_perturbs_one_step():
    a = np.zeros((3, 3), dtype=np.int8)
    out, trace = cda(np.zeros((2, 3)), a, CdaConfig(), np.random.default_rng(4))
    assert len(trace.steps[trace.seed_var]) == 1


def test_cda_palette_validation():
    with pytest.raises(ConfigError):
        CdaConfig(bias_palette=())
    with pytest.raises(ConfigError):
        CdaConfig(bias_palette=(0.0, 0.1))
    with pytest.raises(ConfigError):
        CdaConfig(cutoff_p=1.5)


# ---------------------------------------------------------------------------
# batch assembly


def test_build_batch_b1_counterpart_map():
    model = _model_with_gates(3, 2, open_edges=[(0, 1)])
    windows = np.random.default_rng(0).normal(size=(1, 2, 3))
    batch = build_batch(windows, model, CpaConfig(), CdaConfig(), seed=0)
    assert batch.samples.shape == (4, 2, 3)
    assert batch.counterpart(0) == 2
    assert batch.counterpart(1) == 3
    with pytest.raises(IndexError):
        batch.counterpart(2)


def test_build_batch_group_tags_partition():
    model = _model_with_gates(3, 2, open_edges=[])
    windows = np.random.default_rng(1).normal(size=(5, 2, 3))
    batch = build_batch(windows, model, CpaConfig(), CdaConfig(), seed=1)
    np.testing.assert_array_equal(np.bincount(batch.group_tags)[1:], [5, 5, 5, 5])
    np.testing.assert_array_equal(batch.samples[:5], windows)  # G1 is the originals


def test_build_batch_g3_is_cda_of_g1_elementwise():
    # CDA only ever adds palette biases, so G3 - G1 must be sparse palette offsets
    model = _model_with_gates(4, 3, open_edges=[(0, 1), (1, 2)])
    windows = np.random.default_rng(2).normal(size=(3, 3, 4))
    cfg = CdaConfig()
    batch = build_batch(windows, model, CpaConfig(), cfg, seed=2)
    g3 = batch.samples[6:9]
    delta = g3 - windows
    for i in range(3):
        nz = delta[i][delta[i] != 0]
        assert all(any(abs(x - b) < 1e-12 for b in cfg.bias_palette) for x in nz)


def test_build_batch_deterministic_in_seed():
    model = _model_with_gates(3, 2, open_edges=[(0, 1)])
    windows = np.random.default_rng(3).normal(size=(4, 2, 3))
    a = build_batch(windows, model, CpaConfig(), CdaConfig(), seed=7)
    b = build_batch(windows, model, CpaConfig(), CdaConfig(), seed=7)
    assert np.array_equal(a.samples, b.samples)
    c = build_batch(windows, model, CpaConfig(), CdaConfig(), seed=8)
    assert not np.array_equal(a.samples, c.samples)


def test_build_batch_default_size_is_256():
    from carots.config import ExperimentConfig

    assert ExperimentConfig().batch_size == 256
