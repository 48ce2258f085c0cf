"""Shared test oracles: central finite differences and assertion helpers.

These deliberately avoid the library's own backward pass so gradient checks
compare two independent routes.
"""

from __future__ import annotations

import numpy as np


def fd_param_grads(fn, pset, h: float = 1e-5) -> dict[str, np.ndarray]:
    """Central finite differences of scalar fn() with respect to every entry
    of every parameter in ``pset``. fn must read the current parameter values."""
    grads = {}
    for name, p in pset.params.items():
        g = np.zeros_like(p)
        flat = p.ravel()
        gflat = g.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            fp = fn()
            flat[k] = orig - h
            fm = fn()
            flat[k] = orig
            gflat[k] = (fp - fm) / (2.0 * h)
        grads[name] = g
    return grads


def assert_grads_close(analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray],
                       rtol: float = 1e-4, atol: float = 1e-8) -> None:
    assert set(analytic) == set(numeric)
    for name in analytic:
        a = analytic[name]
        b = numeric[name]
        tol = atol + rtol * np.maximum(np.abs(a), np.abs(b))
        bad = np.abs(a - b) > tol
        assert not bad.any(), (
            f"gradient mismatch in {name!r}: analytic {a[bad][:5]} vs numeric {b[bad][:5]}"
        )


def max_rel_error(analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray],
                  atol: float = 1e-8) -> float:
    worst = 0.0
    for name in analytic:
        a = analytic[name]
        b = numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), atol)
        worst = max(worst, float(np.max(np.abs(a - b) / denom)))
    return worst
