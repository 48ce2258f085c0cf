"""Reference network layers on top of the tape engine: a gated recurrent cell and a small MLP."""

from __future__ import annotations

import numpy as np

from . import tape as ops
from .tape import Node, ParamSet, Tape


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """Uniform in +-1/sqrt(fan_in)."""
    limit = 1.0 / np.sqrt(fan_in) if fan_in > 0 else 1.0
    return rng.uniform(-limit, limit, size=shape)


class GRU:
    """Single-layer gated recurrent network.

    Per-step update, with input x and hidden state h:

        z = sigmoid(x @ Wz + h @ Uz + bz)
        r = sigmoid(x @ Wr + h @ Ur + br)
        n = tanh(x @ Wn + (r * h) @ Un + bn)
        h' = (1 - z) * n + z * h
    """

    def __init__(self, pset: ParamSet, prefix: str, n_in: int, hidden: int,
                 rng: np.random.Generator) -> None:
        self.pset = pset
        self.prefix = prefix
        self.n_in = n_in
        self.hidden = hidden
        for gate in ("z", "r", "n"):
            pset.add(f"{prefix}W{gate}", uniform_init(rng, (n_in, hidden), n_in))
            pset.add(f"{prefix}U{gate}", uniform_init(rng, (hidden, hidden), hidden))
            pset.add(f"{prefix}b{gate}", np.zeros(hidden))

    def _p(self, tape: Tape, name: str) -> Node:
        return tape.param(self.pset, self.prefix + name)

    def step(self, tape: Tape, x, h: Node) -> Node:
        z = ops.sigmoid(ops.matmul(x, self._p(tape, "Wz")) + ops.matmul(h, self._p(tape, "Uz")) + self._p(tape, "bz"))
        r = ops.sigmoid(ops.matmul(x, self._p(tape, "Wr")) + ops.matmul(h, self._p(tape, "Ur")) + self._p(tape, "br"))
        n = ops.tanh(ops.matmul(x, self._p(tape, "Wn")) + ops.matmul(ops.mul(r, h), self._p(tape, "Un")) + self._p(tape, "bn"))
        return (1.0 - z) * n + z * h

    def forward(self, tape: Tape, windows: np.ndarray) -> Node:
        """Consume windows of shape (batch, steps, n_in); returns the final hidden state (batch, hidden)."""
        windows = np.asarray(windows, dtype=np.float64)
        if windows.ndim != 3:
            raise ValueError(f"expected (batch, steps, n_in) input, got shape {windows.shape}")
        if windows.shape[2] != self.n_in:
            raise ValueError(
                f"input has {windows.shape[2]} columns but the cell was built for {self.n_in}"
            )
        if windows.shape[1] < 1:
            raise ValueError("need at least one timestep")
        batch = windows.shape[0]
        h = tape.constant(np.zeros((batch, self.hidden)))
        for t in range(windows.shape[1]):
            h = self.step(tape, tape.constant(windows[:, t, :]), h)
        return h


def gru_forward(cell: GRU, window: np.ndarray) -> np.ndarray:
    """Run one (steps, n_in) window through the cell; returns the final hidden vector."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise ValueError(f"expected a (steps, n_in) window, got shape {window.shape}")
    tape = Tape()
    h = cell.forward(tape, window[None, :, :])
    return h.value[0]


class MLP:
    """One-hidden-layer tanh network; ``hidden=None`` gives a plain linear map."""

    def __init__(self, pset: ParamSet, prefix: str, n_in: int, hidden: int | None,
                 n_out: int, rng: np.random.Generator) -> None:
        self.pset = pset
        self.prefix = prefix
        self.n_in = n_in
        self.hidden = hidden
        self.n_out = n_out
        if hidden is None:
            pset.add(f"{prefix}W", uniform_init(rng, (n_in, n_out), n_in))
            pset.add(f"{prefix}b", np.zeros(n_out))
        else:
            pset.add(f"{prefix}W1", uniform_init(rng, (n_in, hidden), n_in))
            pset.add(f"{prefix}b1", np.zeros(hidden))
            pset.add(f"{prefix}W2", uniform_init(rng, (hidden, n_out), hidden))
            pset.add(f"{prefix}b2", np.zeros(n_out))

    def forward(self, tape: Tape, x) -> Node:
        """x: Node or array of shape (batch, n_in) -> Node of shape (batch, n_out)."""
        if not isinstance(x, Node):
            x = tape.constant(x)
        if x.value.ndim != 2 or x.value.shape[1] != self.n_in:
            raise ValueError(
                f"input shape {x.value.shape} does not match (batch, {self.n_in})"
            )
        if self.hidden is None:
            return ops.matmul(x, tape.param(self.pset, f"{self.prefix}W")) + tape.param(self.pset, f"{self.prefix}b")
        h = ops.tanh(ops.matmul(x, tape.param(self.pset, f"{self.prefix}W1")) + tape.param(self.pset, f"{self.prefix}b1"))
        return ops.matmul(h, tape.param(self.pset, f"{self.prefix}W2")) + tape.param(self.pset, f"{self.prefix}b2")
