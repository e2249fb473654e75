"""Pure numpy edge-kernel backend.

Reference implementations of the per-edge reductions used by message
passing.  All group accumulations run in ascending edge order (np.add.at
and np.maximum.at are sequential in index order), which the compiled
backend in _ckernels.pyx mirrors loop-for-loop: within one backend the
result for a group depends only on that group's edges and their order.
"""

from __future__ import annotations

import numpy as np


def _as_f64(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def _as_i64(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def scatter_add(values: np.ndarray, groups: np.ndarray, n_groups: int) -> np.ndarray:
    """Sum rows (or scalars) of values into n_groups bins given by groups."""
    values = _as_f64(values)
    groups = _as_i64(groups)
    out = np.zeros((n_groups,) + values.shape[1:], dtype=np.float64)
    np.add.at(out, groups, values)
    return out


def scatter_max(values: np.ndarray, groups: np.ndarray,
                n_groups: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-group elementwise max plus the edge row attaining it.

    Returns (out, arg) where arg[g, c] is the first edge row whose value
    strictly exceeded all earlier candidates (-1 for empty groups, whose
    max stays -inf).
    """
    values = _as_f64(values)
    groups = _as_i64(groups)
    n_edges, width = values.shape
    out = np.full((n_groups, width), -np.inf, dtype=np.float64)
    arg = np.full((n_groups, width), -1, dtype=np.int64)
    for e in range(n_edges):
        g = groups[e]
        better = values[e] > out[g]
        if better.any():
            out[g, better] = values[e, better]
            arg[g, better] = e
    return out, arg


def segment_softmax(scores: np.ndarray, groups: np.ndarray,
                    n_groups: int) -> np.ndarray:
    """Softmax of scores within each group (max-shifted for stability)."""
    scores = _as_f64(scores)
    groups = _as_i64(groups)
    peak = np.full(n_groups, -np.inf, dtype=np.float64)
    np.maximum.at(peak, groups, scores)
    exps = np.exp(scores - peak[groups])
    denom = np.zeros(n_groups, dtype=np.float64)
    np.add.at(denom, groups, exps)
    return exps / denom[groups]


def segment_softmax_grad(probs: np.ndarray, grad_out: np.ndarray,
                         groups: np.ndarray, n_groups: int) -> np.ndarray:
    """Backward of segment_softmax: p * (g - sum_group(p * g))."""
    probs = _as_f64(probs)
    grad_out = _as_f64(grad_out)
    groups = _as_i64(groups)
    weighted = probs * grad_out
    dots = np.zeros(n_groups, dtype=np.float64)
    np.add.at(dots, groups, weighted)
    return probs * (grad_out - dots[groups])
