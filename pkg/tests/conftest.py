"""Shared fixtures and independent oracles for the test suite.

The oracles here are deliberately written from first principles (loops,
sorting, counting) rather than reusing package code, so a bug in the
implementation cannot hide inside its own test.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from citetrend.graph import DocumentNode, build_graph, split_by_year


# -- acceptance criterion reporting -------------------------------------------

_CRITERION_LINES: list[tuple[int, str]] = []


def record_criterion(number: int, name: str, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    line = f"criterion {number:2d} [{status}] {name}: {detail}"
    _CRITERION_LINES.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for _, line in sorted(_CRITERION_LINES):
        terminalreporter.write_line(line)


# -- independent oracles -------------------------------------------------------


def oracle_confusion(logits, labels):
    """Loop-based confusion matrix at the sigma(z) > 0.5 threshold."""
    tp = fp = tn = fn = 0
    for z, y in zip(logits, labels):
        predicted = 1.0 / (1.0 + math.exp(-float(z))) > 0.5 if abs(z) < 700 else z > 0
        if predicted and y == 1:
            tp += 1
        elif predicted and y == 0:
            fp += 1
        elif not predicted and y == 0:
            tn += 1
        else:
            fn += 1
    return tp, fp, tn, fn


def oracle_metrics(tp, fp, tn, fn):
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = (2.0 * precision * recall / (precision + recall)
          if (precision + recall) else 0.0)
    return precision, recall, f1


def oracle_percentile_labels(counts, percentile):
    """Sort-and-threshold labeling for one year's citation counts."""
    ordered = sorted(counts)
    k = math.ceil(percentile * len(ordered))
    threshold = ordered[k - 1]
    return [1 if c > threshold else 0 for c in counts], threshold


def mutual_information_bits(x, y):
    """Plug-in mutual information (bits) between two discrete sequences."""
    x = list(x)
    y = list(y)
    n = len(x)
    joint: dict[tuple, int] = {}
    px: dict = {}
    py: dict = {}
    for a, b in zip(x, y):
        joint[(a, b)] = joint.get((a, b), 0) + 1
        px[a] = px.get(a, 0) + 1
        py[b] = py.get(b, 0) + 1
    mi = 0.0
    for (a, b), c in joint.items():
        p_ab = c / n
        mi += p_ab * math.log2(p_ab / ((px[a] / n) * (py[b] / n)))
    return mi


def finite_difference_gradient(f, tensor, eps=1e-6):
    """Central finite differences of scalar f() w.r.t. tensor.data."""
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        up = f()
        flat[i] = keep - eps
        down = f()
        flat[i] = keep
        gflat[i] = (up - down) / (2.0 * eps)
    return grad


def relative_error(a, b):
    num = np.linalg.norm(np.asarray(a).reshape(-1) - np.asarray(b).reshape(-1))
    den = max(np.linalg.norm(np.asarray(a)), np.linalg.norm(np.asarray(b)), 1e-300)
    return num / den


# -- hand-built graphs -----------------------------------------------------------


def _doc(i, year, count, text="", labs=()):
    return DocumentNode(id=f"n{i}", year=year, citation_count=count,
                       title_abstract=text, affiliations=tuple(labs))


@pytest.fixture
def toy_graph():
    """Ten nodes over 2010-2013 with a known edge list.

    Years: n0,n1 2010; n2,n3 2011; n4,n5,n6 2012; n7,n8,n9 2013.
    """
    nodes = [
        _doc(0, 2010, 5, "neural networks for graphs", ["MIT"]),
        _doc(1, 2010, 0, "survey of random forests", ["CMU"]),
        _doc(2, 2011, 3, "graph attention mechanisms", ["MIT", "Oxford"]),
        _doc(3, 2011, 1, "bayesian inference methods", []),
        _doc(4, 2012, 2, "attention is everywhere", ["Oxford"]),
        _doc(5, 2012, 0, "kernel methods revisited", ["CMU"]),
        _doc(6, 2012, 4, "deep graph networks scale", ["MIT"]),
        _doc(7, 2013, 1, "trends in graph learning", ["MIT"]),
        _doc(8, 2013, 0, "classical statistics notes", ["ETH"]),
        _doc(9, 2013, 2, "attention for citations", ["Oxford"]),
    ]
    edges = [
        ("n2", "n0"), ("n3", "n1"), ("n4", "n2"), ("n4", "n0"),
        ("n5", "n1"), ("n6", "n0"), ("n6", "n2"), ("n6", "n3"),
        ("n7", "n6"), ("n7", "n2"), ("n8", "n5"), ("n9", "n4"),
        ("n9", "n0"), ("n9", "n9x"),
    ]
    # the dangling edge is removed before building; kept here as a reminder
    # that real dumps contain junk references
    edges = [e for e in edges if e[1] != "n9x"]
    return build_graph(nodes, edges)


@pytest.fixture
def toy_split(toy_graph):
    return split_by_year(toy_graph, target_year=2013, window_years=3)
