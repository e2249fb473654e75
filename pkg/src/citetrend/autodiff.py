"""Reverse-mode automatic differentiation over dense float64 arrays.

A Tensor wraps a contiguous numpy array plus an optional gradient buffer.
Ops are plain functions; while a Tape is active (``with Tape() as tape:``)
every op whose inputs require gradients appends a record, and
``tape.backward(loss)`` replays the records once in reverse, accumulating
gradients additively into the leaves.  With no active tape the same
functions run as ordinary numpy code, which is how evaluation-mode
forwards work.

The op set is exactly what the models need: matmul, elementwise
arithmetic, concatenation, leaky ReLU, inverted dropout, masked row
softmax, sigmoid, row gather, grouped scatter reductions, a fused
per-group softmax for attention over edge lists, and a numerically stable
weighted binary cross-entropy on logits.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import CitetrendError


class AutodiffError(CitetrendError):
    pass


class ShapeMismatch(AutodiffError):
    pass


class EmptySoftmaxRow(AutodiffError):
    pass


class NotScalarLoss(AutodiffError):
    pass


class Tensor:
    """Dense float64 array with an optional same-shape gradient buffer."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def ensure_grad(self) -> np.ndarray:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        return self.grad

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


@dataclass
class TapeRecord:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[], None]


_ACTIVE = threading.local()


def _active_tape() -> "Tape | None":
    stack = getattr(_ACTIVE, "stack", None)
    return stack[-1] if stack else None


class Tape:
    """Ordered op records; backward() replays them once, in reverse."""

    def __init__(self):
        self.records: list[TapeRecord] = []
        self._spent = False

    def __enter__(self) -> "Tape":
        stack = getattr(_ACTIVE, "stack", None)
        if stack is None:
            stack = _ACTIVE.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.stack.pop()

    def backward(self, loss: Tensor) -> None:
        """Populate grads of every requires_grad leaf reachable from loss.

        Raises:
            NotScalarLoss: loss does not hold exactly one element.
            AutodiffError: backward was already run on this tape.
        """
        if loss.size != 1:
            raise NotScalarLoss(f"loss has shape {loss.shape}, expected a scalar")
        if self._spent:
            raise AutodiffError("backward already ran on this tape")
        self._spent = True
        loss.ensure_grad()[...] = 1.0
        for record in reversed(self.records):
            if record.output.grad is not None:
                record.backward()


def _record(op: str, inputs: tuple[Tensor, ...], out_data: np.ndarray,
            make_backward: Callable[[Tensor], Callable[[], None]]) -> Tensor:
    tape = _active_tape()
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs)
    if tape is not None and needs:
        tape.records.append(TapeRecord(op, inputs, out, make_backward(out)))
    return out


def _accumulate(t: Tensor, grad: np.ndarray) -> None:
    if t.requires_grad:
        t.ensure_grad()
        t.grad += grad


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum grad down to `shape` (inverse of numpy broadcasting)."""
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape}") from exc


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: shapes {a.shape} and {b.shape}")
    out_data = a.data @ b.data

    def make_backward(out: Tensor):
        def backward():
            _accumulate(a, out.grad @ b.data.T)
            _accumulate(b, a.data.T @ out.grad)
        return backward

    return _record("matmul", (a, b), out_data, make_backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")

    def make_backward(out: Tensor):
        def backward():
            _accumulate(a, _unbroadcast(out.grad, a.shape))
            _accumulate(b, _unbroadcast(out.grad, b.shape))
        return backward

    return _record("add", (a, b), a.data + b.data, make_backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")

    def make_backward(out: Tensor):
        def backward():
            _accumulate(a, _unbroadcast(out.grad, a.shape))
            _accumulate(b, -_unbroadcast(out.grad, b.shape))
        return backward

    return _record("sub", (a, b), a.data - b.data, make_backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")

    def make_backward(out: Tensor):
        def backward():
            _accumulate(a, _unbroadcast(out.grad * b.data, a.shape))
            _accumulate(b, _unbroadcast(out.grad * a.data, b.shape))
        return backward

    return _record("mul", (a, b), a.data * b.data, make_backward)


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    if not tensors:
        raise ShapeMismatch("concat: empty input list")
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def make_backward(out: Tensor):
        def backward():
            pieces = np.split(out.grad, offsets, axis=axis)
            for t, piece in zip(tensors, pieces):
                _accumulate(t, piece)
        return backward

    return _record("concat", tuple(tensors), out_data, make_backward)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out_data = x.data.reshape(shape)

    def make_backward(out: Tensor):
        def backward():
            _accumulate(x, out.grad.reshape(x.shape))
        return backward

    return _record("reshape", (x,), out_data, make_backward)


def leaky_relu(x: Tensor, slope: float = 0.01) -> Tensor:
    positive = x.data > 0
    out_data = np.where(positive, x.data, slope * x.data)

    def make_backward(out: Tensor):
        def backward():
            _accumulate(x, out.grad * np.where(positive, 1.0, slope))
        return backward

    return _record("leaky_relu", (x,), out_data, make_backward)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero with probability rate, scale kept entries by
    1/(1-rate).  rate 0 is the identity and consumes no randomness.
    Callers skip this op at evaluation time."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return x
    keep = rng.random(x.shape) >= rate
    scale = 1.0 / (1.0 - rate)
    mask = keep * scale
    out_data = x.data * mask

    def make_backward(out: Tensor):
        def backward():
            _accumulate(x, out.grad * mask)
        return backward

    return _record("dropout", (x,), out_data, make_backward)


def rowwise_softmax_masked(x: Tensor, mask: np.ndarray) -> Tensor:
    """Softmax over the unmasked entries of each row; masked entries are
    exactly zero in the output.

    Raises:
        EmptySoftmaxRow: some row has every entry masked out.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape:
        raise ShapeMismatch(f"mask shape {mask.shape} vs input {x.shape}")
    if not mask.any(axis=1).all():
        row = int(np.flatnonzero(~mask.any(axis=1))[0])
        raise EmptySoftmaxRow(f"row {row} has all entries masked")
    neg_inf = np.where(mask, x.data, -np.inf)
    peak = neg_inf.max(axis=1, keepdims=True)
    exps = np.where(mask, np.exp(neg_inf - peak), 0.0)
    out_data = exps / exps.sum(axis=1, keepdims=True)

    def make_backward(out: Tensor):
        def backward():
            s = out.data
            inner = (out.grad * s).sum(axis=1, keepdims=True)
            _accumulate(x, s * (out.grad - inner))
        return backward

    return _record("rowwise_softmax_masked", (x,), out_data, make_backward)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(x: Tensor) -> Tensor:
    out_data = _sigmoid(x.data)

    def make_backward(out: Tensor):
        def backward():
            _accumulate(x, out.grad * out.data * (1.0 - out.data))
        return backward

    return _record("sigmoid", (x,), out_data, make_backward)


def _check_indices(indices: np.ndarray, bound: int, op: str) -> np.ndarray:
    idx = np.ascontiguousarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeMismatch(f"{op}: indices must be 1-d, got shape {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= bound):
        raise ShapeMismatch(f"{op}: index out of range [0, {bound})")
    return idx


def gather_rows(x: Tensor, indices: np.ndarray) -> Tensor:
    idx = _check_indices(indices, x.shape[0], "gather_rows")
    out_data = x.data[idx]

    def make_backward(out: Tensor):
        def backward():
            _accumulate(x, kernels.scatter_add(out.grad, idx, x.shape[0]))
        return backward

    return _record("gather_rows", (x,), out_data, make_backward)


def scatter_reduce(x: Tensor, indices: np.ndarray, n_groups: int,
                   mode: str = "sum") -> Tensor:
    """Group rows of x by indices and reduce with sum, mean, or max.

    Groups that receive no rows reduce to 0 for sum/mean and -inf for max.
    """
    idx = _check_indices(indices, n_groups, "scatter_reduce")
    if idx.shape[0] != x.shape[0]:
        raise ShapeMismatch(
            f"scatter_reduce: {x.shape[0]} rows vs {idx.shape[0]} indices")
    if mode == "sum":
        out_data = kernels.scatter_add(x.data, idx, n_groups)

        def make_backward(out: Tensor):
            def backward():
                _accumulate(x, out.grad[idx])
            return backward

    elif mode == "mean":
        counts = np.bincount(idx, minlength=n_groups).astype(np.float64)
        safe = np.maximum(counts, 1.0)
        sums = kernels.scatter_add(x.data, idx, n_groups)
        out_data = sums / safe.reshape((-1,) + (1,) * (x.data.ndim - 1))

        def make_backward(out: Tensor):
            def backward():
                g = out.grad / safe.reshape((-1,) + (1,) * (x.data.ndim - 1))
                _accumulate(x, g[idx])
            return backward

    elif mode == "max":
        out_data, arg = kernels.scatter_max(x.data, idx, n_groups)

        def make_backward(out: Tensor):
            def backward():
                grad = np.zeros_like(x.data)
                hit = arg >= 0
                rows, cols = np.nonzero(hit)
                np.add.at(grad, (arg[rows, cols], cols), out.grad[rows, cols])
                _accumulate(x, grad)
            return backward

    else:
        raise ValueError(f"unknown scatter_reduce mode {mode!r}")

    return _record(f"scatter_reduce_{mode}", (x,), out_data, make_backward)


def segment_softmax(scores: Tensor, groups: np.ndarray, n_groups: int) -> Tensor:
    """Softmax of a flat score vector within each group.

    The attention normalizer: scores along an edge list, grouped by the
    receiving node.  Fused forward/backward via the kernel backend.
    """
    if scores.data.ndim != 1:
        raise ShapeMismatch(f"segment_softmax: scores must be 1-d, got {scores.shape}")
    idx = _check_indices(groups, n_groups, "segment_softmax")
    if idx.shape[0] != scores.shape[0]:
        raise ShapeMismatch(
            f"segment_softmax: {scores.shape[0]} scores vs {idx.shape[0]} groups")
    out_data = kernels.segment_softmax(scores.data, idx, n_groups)

    def make_backward(out: Tensor):
        def backward():
            _accumulate(scores, kernels.segment_softmax_grad(
                out.data, out.grad, idx, n_groups))
        return backward

    return _record("segment_softmax", (scores,), out_data, make_backward)


def reduce_sum(x: Tensor) -> Tensor:
    out_data = np.asarray(x.data.sum())

    def make_backward(out: Tensor):
        def backward():
            _accumulate(x, np.broadcast_to(out.grad, x.shape))
        return backward

    return _record("reduce_sum", (x,), out_data, make_backward)


def _softplus(z: np.ndarray) -> np.ndarray:
    # log(1 + e^z) without overflow: max(z, 0) + log1p(e^{-|z|})
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def bce_with_logits(logits: Tensor, labels: np.ndarray,
                    pos_weight: float = 1.0) -> Tensor:
    """Mean binary cross-entropy on logits with a positive-class weight.

    loss = mean_i [ pos_weight * y_i * softplus(-z_i) + (1-y_i) * softplus(z_i) ]

    which equals -[pw*y*ln(sigma(z)) + (1-y)*ln(1-sigma(z))] computed in the
    overflow-free softplus form.
    """
    if pos_weight <= 0:
        raise ValueError(f"pos_weight must be positive, got {pos_weight}")
    y = np.ascontiguousarray(labels, dtype=np.float64)
    if logits.data.ndim != 1 or y.shape != logits.shape:
        raise ShapeMismatch(f"bce: logits {logits.shape} vs labels {y.shape}")
    z = logits.data
    n = z.shape[0]
    per_node = pos_weight * y * _softplus(-z) + (1.0 - y) * _softplus(z)
    out_data = np.asarray(per_node.mean())

    def make_backward(out: Tensor):
        def backward():
            dz = (-pos_weight * y * _sigmoid(-z) + (1.0 - y) * _sigmoid(z)) / n
            _accumulate(logits, out.grad * dz)
        return backward

    return _record("bce_with_logits", (logits,), out_data, make_backward)
