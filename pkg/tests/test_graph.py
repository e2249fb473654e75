"""Graph construction, year splitting, and percentile labeling."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from citetrend.graph import (AnticausalEdge, DocumentNode, DuplicateEdge,
                             EmptyTargetYear, SelfCitation, TrendLabels,
                             UnknownEndpoint, build_graph,
                             label_by_percentile, nearest_rank_threshold,
                             split_by_year)

from conftest import oracle_percentile_labels


def doc(i, year, count=0):
    return DocumentNode(id=f"n{i}", year=year, citation_count=count)


# -- build_graph ---------------------------------------------------------------


def test_build_graph_keeps_nodes_and_edges():
    g = build_graph([doc(0, 2000), doc(1, 2001)], [("n1", "n0")])
    assert g.n_nodes == 2
    assert g.n_edges == 1
    assert g.edges == (("n1", "n0"),)
    assert "n0" in g and "missing" not in g
    assert g.year_of("n1") == 2001


def test_build_graph_allows_same_year_citation():
    g = build_graph([doc(0, 2000), doc(1, 2000)], [("n1", "n0")])
    assert g.n_edges == 1


def test_duplicate_node_id_rejected():
    with pytest.raises(ValueError, match="duplicate node id"):
        build_graph([doc(0, 2000), doc(0, 2001)], [])


def test_negative_citation_count_rejected():
    with pytest.raises(ValueError, match="negative citation_count"):
        build_graph([DocumentNode(id="a", year=2000, citation_count=-1)], [])


def test_year_out_of_range_rejected():
    with pytest.raises(ValueError, match="outside range"):
        build_graph([doc(0, 999)], [])


@pytest.mark.parametrize("edge,exc", [
    (("n0", "ghost"), UnknownEndpoint),
    (("ghost", "n0"), UnknownEndpoint),
    (("n0", "n0"), SelfCitation),
    (("n0", "n1"), AnticausalEdge),  # n0 (2000) citing n1 (2001)
])
def test_strict_mode_rejects_bad_edges(edge, exc):
    nodes = [doc(0, 2000), doc(1, 2001)]
    with pytest.raises(exc):
        build_graph(nodes, [edge])


def test_duplicate_edge_rejected_strict():
    nodes = [doc(0, 2000), doc(1, 2001)]
    with pytest.raises(DuplicateEdge):
        build_graph(nodes, [("n1", "n0"), ("n1", "n0")])


def test_lenient_mode_drops_and_counts():
    nodes = [doc(0, 2000), doc(1, 2001)]
    bad = [("n1", "n0"), ("n1", "n0"), ("n0", "n0"), ("n1", "ghost")]
    g = build_graph(nodes, bad, strict=False)
    assert g.n_edges == 1
    assert g.dropped_edges == 3


# -- split_by_year ---------------------------------------------------------------


def test_split_partitions_nodes(toy_graph):
    split = split_by_year(toy_graph, target_year=2013, window_years=3)
    assert split.target_node_ids == {"n7", "n8", "n9"}
    assert split.prior_node_ids == {"n0", "n1", "n2", "n3", "n4", "n5", "n6"}
    # canonical row order preserves graph node order
    assert split.node_ids == tuple(f"n{i}" for i in range(10))
    assert split.window_start == 2010


def test_split_window_excludes_older_nodes(toy_graph):
    split = split_by_year(toy_graph, target_year=2013, window_years=1)
    assert split.prior_node_ids == {"n4", "n5", "n6"}
    # edges reaching outside the window disappear
    for citing, cited in split.prior_edges + split.target_edges:
        assert citing in split.prior_node_ids | split.target_node_ids
        assert cited in split.prior_node_ids


def test_split_edge_classification(toy_graph):
    split = split_by_year(toy_graph, target_year=2013, window_years=3)
    assert set(split.target_edges) == {
        ("n7", "n6"), ("n7", "n2"), ("n8", "n5"), ("n9", "n4"), ("n9", "n0")}
    assert ("n4", "n2") in split.prior_edges
    assert split.dropped_target_edges == 0


def test_split_drops_target_target_edges():
    nodes = [doc(0, 2012), doc(1, 2013), doc(2, 2013)]
    g = build_graph(nodes, [("n2", "n1"), ("n1", "n0")])
    split = split_by_year(g, target_year=2013, window_years=2)
    assert split.dropped_target_edges == 1
    assert split.target_edges == (("n1", "n0"),)


def test_split_requires_target_nodes(toy_graph):
    with pytest.raises(EmptyTargetYear):
        split_by_year(toy_graph, target_year=2020, window_years=5)


def test_split_rejects_bad_window(toy_graph):
    with pytest.raises(ValueError):
        split_by_year(toy_graph, target_year=2013, window_years=0)


def test_replace_edges_keeps_partition(toy_split):
    reduced = toy_split.replace_edges([], toy_split.target_edges[:1])
    assert reduced.prior_edges == ()
    assert len(reduced.target_edges) == 1
    assert reduced.prior_node_ids == toy_split.prior_node_ids
    assert reduced.node_ids == toy_split.node_ids


# -- nearest-rank threshold and labels --------------------------------------------


def test_nearest_rank_hand_values():
    counts = [3, 1, 2, 5, 4]
    assert nearest_rank_threshold(counts, 0.9) == 5
    assert nearest_rank_threshold(counts, 0.5) == 3
    assert nearest_rank_threshold(counts, 0.2) == 1
    assert nearest_rank_threshold([7], 0.9) == 7


def test_label_by_percentile_strict_inequality():
    nodes = [doc(i, 2000, c) for i, c in enumerate([3, 1, 2, 5, 4])]
    g = build_graph(nodes, [])
    labels = label_by_percentile(g, [n.id for n in nodes], 0.5)
    # threshold 3: only counts 5 and 4 strictly exceed it
    assert labels.labels == {"n0": 0, "n1": 0, "n2": 0, "n3": 1, "n4": 1}
    assert labels.per_year_thresholds == {2000: 3}
    assert labels.positives() == 2


def test_label_by_percentile_is_per_year():
    nodes = [doc(0, 2000, 10), doc(1, 2000, 1),
             doc(2, 2001, 100), doc(3, 2001, 90)]
    g = build_graph(nodes, [])
    labels = label_by_percentile(g, ["n0", "n1", "n2", "n3"], 0.5)
    # thresholds are per year: ceil(0.5 * 2) = 1st smallest in each, so
    # 2001's count of 90 is negative while 2000's count of 10 is positive
    assert labels.labels == {"n0": 1, "n1": 0, "n2": 1, "n3": 0}
    assert labels.per_year_thresholds == {2000: 1, 2001: 90}


def test_single_node_year_gets_label_zero():
    g = build_graph([doc(0, 2000, 50)], [])
    labels = label_by_percentile(g, ["n0"], 0.9)
    assert labels.labels == {"n0": 0}


def test_label_rejects_bad_percentile(toy_graph):
    for p in (0.0, 1.0, -0.5, 2.0):
        with pytest.raises(ValueError):
            label_by_percentile(toy_graph, ["n0"], p)
    with pytest.raises(ValueError, match="empty"):
        label_by_percentile(toy_graph, [], 0.9)


@settings(max_examples=200, deadline=None)
@given(
    counts=st.lists(st.integers(min_value=0, max_value=1000), min_size=1,
                    max_size=60),
    percentile=st.floats(min_value=0.01, max_value=0.99),
)
def test_labels_match_sort_threshold_oracle(counts, percentile):
    nodes = [doc(i, 2005, c) for i, c in enumerate(counts)]
    g = build_graph(nodes, [])
    got = label_by_percentile(g, [n.id for n in nodes], percentile)
    expected, threshold = oracle_percentile_labels(counts, percentile)
    assert got.per_year_thresholds == {2005: threshold}
    assert [got.labels[n.id] for n in nodes] == expected


def test_trend_labels_is_plain_data():
    labels = TrendLabels(labels={"a": 1, "b": 0}, percentile=0.9,
                         per_year_thresholds={2000: 3})
    assert labels.positives() == 1
    assert math.isclose(labels.percentile, 0.9)
