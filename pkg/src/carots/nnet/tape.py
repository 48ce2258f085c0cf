"""Reverse-mode differentiation on a flat tape of array operations.

All values are float64 numpy arrays. A Tape records every primitive applied
to nodes created from it, in execution order (topological by construction).
``backward`` seeds the scalar loss gradient and replays the records once, in
reverse, accumulating gradients into the nodes; ``forward_backward`` then
writes the gradients of lifted parameters back into their ParamSet buffers.

Plain numpy arrays passed to an op are treated as constants: they join the
graph but never receive gradients anyone reads.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

Array = np.ndarray


def _as_value(x) -> Array:
    return np.asarray(x, dtype=np.float64)


class ParamSet:
    """Named float64 tensors, each with a persistent gradient buffer of identical shape."""

    def __init__(self) -> None:
        self.params: dict[str, Array] = {}
        self.grads: dict[str, Array] = {}

    def add(self, name: str, value) -> Array:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        arr = np.array(value, dtype=np.float64)
        self.params[name] = arr
        self.grads[name] = np.zeros_like(arr)
        return arr

    def names(self) -> list[str]:
        return list(self.params)

    def n_entries(self) -> int:
        return sum(p.size for p in self.params.values())

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g[...] = 0.0

    def copy(self) -> "ParamSet":
        other = ParamSet()
        for name, value in self.params.items():
            other.add(name, value.copy())
        return other

    def load(self, other: "ParamSet") -> None:
        """Overwrite values in place from a set with identical names and shapes."""
        if set(other.params) != set(self.params):
            raise ValueError("parameter name mismatch")
        for name, value in other.params.items():
            if value.shape != self.params[name].shape:
                raise ValueError(f"shape mismatch for parameter {name!r}")
            self.params[name][...] = value

    def global_grad_norm(self) -> float:
        total = 0.0
        for g in self.grads.values():
            total += float(np.sum(g * g))
        return float(np.sqrt(total))


class Node:
    """A value on a tape. ``grad`` is populated by ``Tape.backward``."""

    __slots__ = ("value", "grad", "tape")

    def __init__(self, value, tape: "Tape") -> None:
        self.value: Array = _as_value(value)
        self.grad: Array | None = None
        self.tape = tape

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """Execution-ordered record of primitive operations for one forward pass."""

    def __init__(self) -> None:
        self._records: list[tuple[Node, Callable[[Array], None]]] = []
        self._param_nodes: dict[tuple[int, str], Node] = {}
        self._param_owners: list[tuple[ParamSet, str, Node]] = []

    def constant(self, value) -> Node:
        return Node(value, self)

    def param(self, pset: ParamSet, name: str) -> Node:
        """Lift a parameter onto the tape; repeated lifts return the same node."""
        key = (id(pset), name)
        node = self._param_nodes.get(key)
        if node is None:
            node = Node(pset.params[name], self)
            self._param_nodes[key] = node
            self._param_owners.append((pset, name, node))
        return node

    def _push(self, out: Node, backward: Callable[[Array], None]) -> None:
        self._records.append((out, backward))

    def n_records(self) -> int:
        return len(self._records)

    def backward(self, loss: Node) -> None:
        """Backpropagate from a scalar loss; each record is visited exactly once, in reverse."""
        if loss.tape is not self:
            raise ValueError("loss node belongs to a different tape")
        if loss.value.ndim != 0:
            raise ValueError(f"loss must be scalar, got shape {loss.value.shape}")
        loss.grad = np.ones((), dtype=np.float64)
        for out, backward in reversed(self._records):
            if out.grad is not None:
                backward(out.grad)

    def harvest(self) -> None:
        """Accumulate gradients of lifted parameters into their ParamSet buffers."""
        for pset, name, node in self._param_owners:
            if node.grad is not None:
                pset.grads[name] += node.grad


def forward_backward(tape: Tape, loss: Node) -> None:
    """Backward pass plus accumulation of parameter gradients into their ParamSets."""
    tape.backward(loss)
    tape.harvest()


# ---------------------------------------------------------------------------
# primitive operations


def _lift(x, tape: Tape) -> Node:
    if isinstance(x, Node):
        if x.tape is not tape:
            raise ValueError("cannot mix nodes from different tapes")
        return x
    return tape.constant(x)


def _pair(a, b) -> tuple[Node, Node, Tape]:
    if isinstance(a, Node):
        tape = a.tape
    elif isinstance(b, Node):
        tape = b.tape
    else:
        raise TypeError("at least one operand must be a Node")
    return _lift(a, tape), _lift(b, tape), tape


def _accum(node: Node, g: Array) -> None:
    if node.grad is None:
        node.grad = np.zeros_like(node.value)
    node.grad += g


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Reduce a broadcast gradient back to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Node:
    a, b, tape = _pair(a, b)
    out = Node(a.value + b.value, tape)

    def backward(g: Array) -> None:
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(g, b.value.shape))

    tape._push(out, backward)
    return out


def sub(a, b) -> Node:
    a, b, tape = _pair(a, b)
    out = Node(a.value - b.value, tape)

    def backward(g: Array) -> None:
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(-g, b.value.shape))

    tape._push(out, backward)
    return out


def mul(a, b) -> Node:
    a, b, tape = _pair(a, b)
    out = Node(a.value * b.value, tape)

    def backward(g: Array) -> None:
        _accum(a, _unbroadcast(g * b.value, a.value.shape))
        _accum(b, _unbroadcast(g * a.value, b.value.shape))

    tape._push(out, backward)
    return out


def div(a, b) -> Node:
    a, b, tape = _pair(a, b)
    out = Node(a.value / b.value, tape)

    def backward(g: Array) -> None:
        _accum(a, _unbroadcast(g / b.value, a.value.shape))
        _accum(b, _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape))

    tape._push(out, backward)
    return out


def neg(a) -> Node:
    tape = a.tape
    out = Node(-a.value, tape)

    def backward(g: Array) -> None:
        _accum(a, -g)

    tape._push(out, backward)
    return out


def matmul(a, b) -> Node:
    a, b, tape = _pair(a, b)
    if a.value.ndim != 2 or b.value.ndim != 2:
        raise ValueError(
            f"matmul expects 2-D operands, got {a.value.shape} @ {b.value.shape}"
        )
    out = Node(a.value @ b.value, tape)

    def backward(g: Array) -> None:
        _accum(a, g @ b.value.T)
        _accum(b, a.value.T @ g)

    tape._push(out, backward)
    return out


def transpose(a: Node) -> Node:
    if a.value.ndim != 2:
        raise ValueError("transpose expects a 2-D node")
    out = Node(a.value.T, a.tape)

    def backward(g: Array) -> None:
        _accum(a, g.T)

    a.tape._push(out, backward)
    return out


def reshape(a: Node, shape: tuple[int, ...]) -> Node:
    out = Node(a.value.reshape(shape), a.tape)

    def backward(g: Array) -> None:
        _accum(a, g.reshape(a.value.shape))

    a.tape._push(out, backward)
    return out


def narrow(a: Node, axis: int, start: int, stop: int) -> Node:
    """Contiguous slice along ``axis``; backward scatters into a zero buffer."""
    if axis not in (0, 1):
        raise ValueError("narrow supports axis 0 or 1")
    index = (slice(start, stop),) if axis == 0 else (slice(None), slice(start, stop))
    out = Node(a.value[index].copy(), a.tape)

    def backward(g: Array) -> None:
        full = np.zeros_like(a.value)
        full[index] = g
        _accum(a, full)

    a.tape._push(out, backward)
    return out


def exp(a: Node) -> Node:
    out = Node(np.exp(a.value), a.tape)

    def backward(g: Array) -> None:
        _accum(a, g * out.value)

    a.tape._push(out, backward)
    return out


def log(a: Node) -> Node:
    out = Node(np.log(a.value), a.tape)

    def backward(g: Array) -> None:
        _accum(a, g / a.value)

    a.tape._push(out, backward)
    return out


def sqrt(a: Node) -> Node:
    out = Node(np.sqrt(a.value), a.tape)

    def backward(g: Array) -> None:
        _accum(a, g * 0.5 / out.value)

    a.tape._push(out, backward)
    return out


def square(a: Node) -> Node:
    out = Node(a.value * a.value, a.tape)

    def backward(g: Array) -> None:
        _accum(a, g * 2.0 * a.value)

    a.tape._push(out, backward)
    return out


def tanh(a: Node) -> Node:
    out = Node(np.tanh(a.value), a.tape)

    def backward(g: Array) -> None:
        _accum(a, g * (1.0 - out.value * out.value))

    a.tape._push(out, backward)
    return out


def sigmoid_values(x: Array) -> Array:
    # Stable in both tails; underflows to exactly 0.0 / 1.0 for large |x|.
    pos = np.clip(x, 0.0, None)
    neg_part = np.clip(x, None, 0.0)
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-pos)), np.exp(neg_part) / (1.0 + np.exp(neg_part)))


def sigmoid(a: Node) -> Node:
    out = Node(sigmoid_values(a.value), a.tape)

    def backward(g: Array) -> None:
        _accum(a, g * out.value * (1.0 - out.value))

    a.tape._push(out, backward)
    return out


def sum_(a: Node, axis: int | None = None, keepdims: bool = False) -> Node:
    out = Node(a.value.sum(axis=axis, keepdims=keepdims), a.tape)

    def backward(g: Array) -> None:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.value.shape).copy())

    a.tape._push(out, backward)
    return out


def mean(a: Node, axis: int | None = None, keepdims: bool = False) -> Node:
    count = a.value.size if axis is None else a.value.shape[axis]
    out = Node(a.value.mean(axis=axis, keepdims=keepdims), a.tape)

    def backward(g: Array) -> None:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g / count, a.value.shape).copy())

    a.tape._push(out, backward)
    return out


def l2_norm(a: Node, axis: int | None = None, keepdims: bool = False) -> Node:
    out = Node(np.sqrt(np.sum(a.value * a.value, axis=axis, keepdims=keepdims)), a.tape)

    def backward(g: Array) -> None:
        norms = out.value
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
            norms = np.expand_dims(norms, axis)
        scale = np.where(norms > 0.0, g / np.where(norms > 0.0, norms, 1.0), 0.0)
        _accum(a, scale * a.value)

    a.tape._push(out, backward)
    return out


def cosine_similarity(a, b) -> Node:
    """Cosine similarity between two 1-D vectors, built from recorded primitives."""
    a, b, _ = _pair(a, b)
    if a.value.ndim != 1 or b.value.ndim != 1:
        raise ValueError("cosine_similarity expects 1-D vectors")
    dot = sum_(mul(a, b))
    return div(dot, mul(l2_norm(a), l2_norm(b)))


def smooth_abs(a: Node, eps: float = 1e-12) -> Node:
    """Differentiable |x| as sqrt(x^2 + eps)."""
    return sqrt(add(square(a), eps))
