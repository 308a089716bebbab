"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

A Tape records tensors in creation order; backward() walks that order in
reverse, which is a reverse topological order by construction, visiting each
node once and accumulating gradients additively.  Ops accept either Tensor
or plain numpy inputs: with no Tensor among the inputs they run as ordinary
numpy functions, which gives a tape-free fast path sharing the exact same
forward arithmetic.

Subgradient conventions (fixed, documented):
  |x| at 0 -> 0;  pairwise min ties -> first argument;  reduced min ties ->
  first index;  clamp outside the range -> 0;  ReLU at 0 -> 0;  angle wrap
  -> identity.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

_LOG_FLOOR = 1e-300  # log() guard: keeps forward values finite on (0,1] inputs
_DENOM_FLOOR = 1e-30


class Tape:
    """Single-writer op record; independent tapes may run concurrently."""

    def __init__(self) -> None:
        self._nodes: list[Tensor] = []

    def leaf(self, values) -> "Tensor":
        return Tensor(np.asarray(values, dtype=np.float64), self)

    def backward(self, loss: "Tensor") -> None:
        """Populate grad on every tensor that the scalar loss depends on."""
        if loss.values.size != 1:
            raise ValueError(f"loss must be scalar, got shape {loss.values.shape}")
        if loss.tape is not self:
            raise ValueError("loss was built on a different tape")
        loss.grad = np.ones_like(loss.values)
        for node in reversed(self._nodes):
            if node.grad is None:
                continue
            for parent, pull in node._parents:
                contrib = pull(node.grad)
                if parent.grad is None:
                    parent.grad = contrib.copy()
                else:
                    parent.grad = parent.grad + contrib


class Tensor:
    __slots__ = ("values", "grad", "tape", "_parents")

    def __init__(self, values: np.ndarray, tape: Tape, parents=()) -> None:
        self.values = values
        self.grad: np.ndarray | None = None
        self.tape = tape
        self._parents: tuple = parents
        tape._nodes.append(self)

    @property
    def shape(self):
        return self.values.shape

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return subtract(self, other)

    def __rsub__(self, other):
        return subtract(other, self)

    def __mul__(self, other):
        return multiply(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return multiply(self, -1.0)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.values.shape})"


def values_of(x) -> np.ndarray:
    return x.values if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _tape_of(*xs) -> Tape | None:
    tape = None
    for x in xs:
        if isinstance(x, Tensor):
            if tape is None:
                tape = x.tape
            elif x.tape is not tape:
                raise ValueError("inputs live on different tapes")
    return tape


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the parent's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _result(out: np.ndarray, inputs: Sequence, vjps: Sequence[Callable | None]):
    out = np.asarray(out, dtype=np.float64)
    tape = _tape_of(*inputs)
    if tape is None:
        return out
    parents = tuple(
        (x, fn) for x, fn in zip(inputs, vjps) if isinstance(x, Tensor) and fn is not None
    )
    return Tensor(out, tape, parents)


# ---------------------------------------------------------------------------
# elementwise arithmetic (with broadcasting used by batched model ops)
# ---------------------------------------------------------------------------


def add(a, b):
    av, bv = values_of(a), values_of(b)
    return _result(
        av + bv,
        (a, b),
        (lambda g: _unbroadcast(g, av.shape), lambda g: _unbroadcast(g, bv.shape)),
    )


def subtract(a, b):
    av, bv = values_of(a), values_of(b)
    return _result(
        av - bv,
        (a, b),
        (lambda g: _unbroadcast(g, av.shape), lambda g: _unbroadcast(-g, bv.shape)),
    )


def multiply(a, b):
    av, bv = values_of(a), values_of(b)
    return _result(
        av * bv,
        (a, b),
        (lambda g: _unbroadcast(g * bv, av.shape), lambda g: _unbroadcast(g * av, bv.shape)),
    )


def matmul(a, b):
    av, bv = values_of(a), values_of(b)
    if av.ndim != 2 or bv.ndim != 2:
        raise ValueError("matmul expects two matrices")
    return _result(av @ bv, (a, b), (lambda g: g @ bv.T, lambda g: av.T @ g))


# ---------------------------------------------------------------------------
# pointwise functions
# ---------------------------------------------------------------------------


def sin(x):
    xv = values_of(x)
    return _result(np.sin(xv), (x,), (lambda g: g * np.cos(xv),))


def cos(x):
    xv = values_of(x)
    return _result(np.cos(xv), (x,), (lambda g: -g * np.sin(xv),))


def atan2(y, x):
    yv, xv = values_of(y), values_of(x)
    denom = np.maximum(xv * xv + yv * yv, _DENOM_FLOOR)
    return _result(
        np.arctan2(yv, xv),
        (y, x),
        (
            lambda g: _unbroadcast(g * xv / denom, yv.shape),
            lambda g: _unbroadcast(-g * yv / denom, xv.shape),
        ),
    )


def absval(x):
    xv = values_of(x)
    return _result(np.abs(xv), (x,), (lambda g: g * np.sign(xv),))


def relu(x):
    xv = values_of(x)
    mask = xv > 0.0
    return _result(np.where(mask, xv, 0.0), (x,), (lambda g: g * mask,))


def sigmoid(x):
    xv = values_of(x)
    z = np.exp(-np.abs(xv))  # stable on both tails
    out = np.where(xv >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))
    return _result(out, (x,), (lambda g: g * out * (1.0 - out),))


def log(x):
    xv = values_of(x)
    safe = np.maximum(xv, _LOG_FLOOR)
    return _result(np.log(safe), (x,), (lambda g: g / safe,))


def clamp(x, lo: float, hi: float):
    xv = values_of(x)
    mask = (xv >= lo) & (xv <= hi)
    return _result(np.clip(xv, lo, hi), (x,), (lambda g: g * mask,))


def wrap(x):
    """Reduce angles into [-pi, pi); gradient passes through unchanged."""
    xv = values_of(x)
    out = (xv + math.pi) % TWO_PI - math.pi
    out = np.where(out >= math.pi, out - TWO_PI, out)
    return _result(out, (x,), (lambda g: g,))


# ---------------------------------------------------------------------------
# minima
# ---------------------------------------------------------------------------


def minimum(a, b):
    """Pairwise min; on ties the gradient goes to the first argument."""
    av, bv = values_of(a), values_of(b)
    take_a = av <= bv
    return _result(
        np.where(take_a, av, bv),
        (a, b),
        (
            lambda g: _unbroadcast(g * take_a, av.shape),
            lambda g: _unbroadcast(g * ~take_a, bv.shape),
        ),
    )


def amin(x, axis: int):
    """Min-reduce along one axis; ties send the gradient to the first index."""
    xv = values_of(x)
    idx = np.argmin(xv, axis=axis)
    out = np.take_along_axis(xv, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

    def pull(g):
        full = np.zeros_like(xv)
        np.put_along_axis(
            full, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis
        )
        return full

    return _result(out, (x,), (pull,))


# ---------------------------------------------------------------------------
# reductions and shape plumbing
# ---------------------------------------------------------------------------


def total(x, axis=None):
    xv = values_of(x)

    def pull(g):
        if axis is None:
            return np.broadcast_to(g, xv.shape).copy()
        return np.broadcast_to(np.expand_dims(g, axis), xv.shape).copy()

    return _result(np.sum(xv, axis=axis), (x,), (pull,))


def mean(x, axis=None):
    xv = values_of(x)
    count = xv.size if axis is None else xv.shape[axis]

    def pull(g):
        if axis is None:
            return np.broadcast_to(g / count, xv.shape).copy()
        return np.broadcast_to(np.expand_dims(g, axis) / count, xv.shape).copy()

    return _result(np.mean(xv, axis=axis), (x,), (pull,))


def softmax(x, axis: int = -1):
    xv = values_of(x)
    shifted = xv - xv.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)
    return _result(
        out,
        (x,),
        (lambda g: (g - np.sum(g * out, axis=axis, keepdims=True)) * out,),
    )


def concat(parts: Sequence, axis: int = -1):
    vals = [values_of(p) for p in parts]
    sizes = [v.shape[axis] for v in vals]
    offsets = np.cumsum([0] + sizes)

    def make_pull(i):
        sl = [slice(None)] * vals[0].ndim
        sl[axis] = slice(int(offsets[i]), int(offsets[i + 1]))
        return lambda g: g[tuple(sl)]

    return _result(
        np.concatenate(vals, axis=axis), tuple(parts), tuple(make_pull(i) for i in range(len(vals)))
    )


def stack(parts: Sequence, axis: int = 0):
    vals = [values_of(p) for p in parts]

    def make_pull(i):
        return lambda g: np.take(g, i, axis=axis)

    return _result(
        np.stack(vals, axis=axis), tuple(parts), tuple(make_pull(i) for i in range(len(vals)))
    )


def reshape(x, shape):
    xv = values_of(x)
    return _result(xv.reshape(shape), (x,), (lambda g: g.reshape(xv.shape),))


def gather(table, idx):
    """Rows of a 2-D table by integer index; gradients scatter-add back."""
    tv = values_of(table)
    idx = np.asarray(idx)

    def pull(g):
        full = np.zeros_like(tv)
        np.add.at(full, idx.reshape(-1), g.reshape(-1, tv.shape[-1]))
        return full

    return _result(tv[idx], (table,), (pull,))


# ---------------------------------------------------------------------------
# finite-difference audit
# ---------------------------------------------------------------------------


def grad_check(f, xs: Sequence[np.ndarray], step: float = 1e-5,
               coords: Sequence | None = None,
               subgradient: bool = False,
               zero_floor: float = 0.0) -> float:
    """Max relative disagreement between analytic and central-difference grads.

    f must map its inputs (Tensor or ndarray alike) to a scalar; relative
    error per coordinate is |a - n| / (|a| + |n| + 1e-12).

    ``coords`` optionally gives, per input, the flat indices to probe (None
    entries mean "all of this input"); callers use it to skip coordinates
    that provably cannot influence f, such as embedding-table rows the
    computation never gathers.

    With ``subgradient=True`` a coordinate also passes when the analytic
    value lies between the two one-sided difference quotients.  Central
    differences carry no information across a kink of |.|, min or clamp; at
    such points the valid check is that the analytic gradient is a
    subgradient, i.e. inside the one-sided-slope interval.  On smooth
    coordinates that interval is only O(step) wide, so the relaxation stays
    as sharp as the central-difference test.

    ``zero_floor`` bounds the method's resolution: central differences read
    a gradient as (f(x+h)-f(x-h))/2h, so one ulp of noise on f becomes
    eps*|f|/step of noise on the quotient (~3e-10 for a loss of magnitude
    10 at the default step), and a coordinate whose true gradient sits at
    that scale yields a relative error near 1 against any analytic value,
    correct or not.  Coordinates where analytic and numeric are both below
    the floor are therefore counted as agreeing zeros.  The default of 0
    disables the floor.
    """
    xs = [np.asarray(x, dtype=np.float64) for x in xs]
    tape = Tape()
    leaves = [tape.leaf(x) for x in xs]
    loss = f(*leaves)
    tape.backward(loss)
    base = float(values_of(loss))
    worst = 0.0
    for i, x in enumerate(xs):
        analytic = leaves[i].grad
        if analytic is None:
            analytic = np.zeros_like(x)
        flat = x.reshape(-1)
        probe = range(flat.size) if coords is None or coords[i] is None else coords[i]
        for j in probe:
            bumped = flat.copy()
            bumped[j] += step
            hi = float(values_of(f(*_swap(xs, i, bumped.reshape(x.shape)))))
            bumped[j] -= 2.0 * step
            lo = float(values_of(f(*_swap(xs, i, bumped.reshape(x.shape)))))
            numeric = (hi - lo) / (2.0 * step)
            a = float(analytic.reshape(-1)[j])
            if max(abs(a), abs(numeric)) <= zero_floor:
                continue
            err = abs(a - numeric) / (abs(a) + abs(numeric) + 1e-12)
            if subgradient and err > 0.0:
                s_hi = (hi - base) / step
                s_lo = (base - lo) / step
                side_lo, side_hi = min(s_lo, s_hi), max(s_lo, s_hi)
                gap = max(side_lo - a, a - side_hi, 0.0)
                err = min(err, gap / (abs(a) + max(abs(side_lo), abs(side_hi)) + 1e-12))
            worst = max(worst, err)
    return worst


def _swap(xs, i, replacement):
    out = list(xs)
    out[i] = replacement
    return out
