# Compiled edge-kernel backend.  Same contract as _pykernels; the loops
# accumulate in ascending edge order so per-group results match the pure
# backend's np.add.at / np.maximum.at semantics.

import numpy as np

from libc.math cimport exp, INFINITY
from libc.stdint cimport int64_t


def scatter_add(values, groups, n_groups):
    values = np.ascontiguousarray(values, dtype=np.float64)
    groups = np.ascontiguousarray(groups, dtype=np.int64)
    if values.ndim == 1:
        out = np.zeros(n_groups, dtype=np.float64)
        _scatter_add_1d(values, groups, out)
    else:
        out = np.zeros((n_groups, values.shape[1]), dtype=np.float64)
        _scatter_add_2d(values, groups, out)
    return out


def scatter_max(values, groups, n_groups):
    values = np.ascontiguousarray(values, dtype=np.float64)
    groups = np.ascontiguousarray(groups, dtype=np.int64)
    out = np.full((n_groups, values.shape[1]), -np.inf, dtype=np.float64)
    arg = np.full((n_groups, values.shape[1]), -1, dtype=np.int64)
    _scatter_max_2d(values, groups, out, arg)
    return out, arg


def segment_softmax(scores, groups, n_groups):
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    groups = np.ascontiguousarray(groups, dtype=np.int64)
    probs = np.empty_like(scores)
    scratch = np.empty(n_groups, dtype=np.float64)
    _segment_softmax(scores, groups, scratch, probs)
    return probs


def segment_softmax_grad(probs, grad_out, groups, n_groups):
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    grad_out = np.ascontiguousarray(grad_out, dtype=np.float64)
    groups = np.ascontiguousarray(groups, dtype=np.int64)
    grad = np.empty_like(probs)
    dots = np.zeros(n_groups, dtype=np.float64)
    _segment_softmax_grad(probs, grad_out, groups, dots, grad)
    return grad


cdef void _scatter_add_1d(const double[::1] values, const int64_t[::1] groups,
                          double[::1] out) noexcept:
    cdef Py_ssize_t e, n = values.shape[0]
    for e in range(n):
        out[groups[e]] += values[e]


cdef void _scatter_add_2d(const double[:, ::1] values, const int64_t[::1] groups,
                          double[:, ::1] out) noexcept:
    cdef Py_ssize_t e, c, n = values.shape[0], width = values.shape[1]
    cdef int64_t g
    for e in range(n):
        g = groups[e]
        for c in range(width):
            out[g, c] += values[e, c]


cdef void _scatter_max_2d(const double[:, ::1] values, const int64_t[::1] groups,
                          double[:, ::1] out, int64_t[:, ::1] arg) noexcept:
    cdef Py_ssize_t e, c, n = values.shape[0], width = values.shape[1]
    cdef int64_t g
    for e in range(n):
        g = groups[e]
        for c in range(width):
            if values[e, c] > out[g, c]:
                out[g, c] = values[e, c]
                arg[g, c] = e


cdef void _segment_softmax(const double[::1] scores, const int64_t[::1] groups,
                           double[::1] scratch, double[::1] probs) noexcept:
    cdef Py_ssize_t e, n = scores.shape[0], n_groups = scratch.shape[0]
    cdef int64_t g
    for g in range(n_groups):
        scratch[g] = -INFINITY
    for e in range(n):  # per-group max
        g = groups[e]
        if scores[e] > scratch[g]:
            scratch[g] = scores[e]
    for e in range(n):
        probs[e] = exp(scores[e] - scratch[groups[e]])
    for g in range(n_groups):
        scratch[g] = 0.0
    for e in range(n):  # per-group normalizer
        scratch[groups[e]] += probs[e]
    for e in range(n):
        probs[e] /= scratch[groups[e]]


cdef void _segment_softmax_grad(const double[::1] probs, const double[::1] grad_out,
                                const int64_t[::1] groups, double[::1] dots,
                                double[::1] grad) noexcept:
    cdef Py_ssize_t e, n = probs.shape[0]
    for e in range(n):
        dots[groups[e]] += probs[e] * grad_out[e]
    for e in range(n):
        grad[e] = probs[e] * (grad_out[e] - dots[groups[e]])
