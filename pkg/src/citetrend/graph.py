"""Citation graph container, causal year-window splitting, and trend labels.

A citation graph is directed: edges run from the citing document to the
cited document, and a cited document can never be younger than the paper
citing it.  Splitting by a target year partitions the window into prior
nodes (everything published strictly before the target year, within the
window) and target nodes (published exactly in the target year).  Target
nodes only ever cite prior nodes inside a split; citations between two
target-year documents are dropped and counted.

Trend labels mark the documents whose citation count strictly exceeds a
per-publication-year percentile threshold (nearest-rank).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import CitetrendError

Edge = tuple[str, str]


class GraphError(CitetrendError):
    """Base class for graph construction and splitting errors."""


class UnknownEndpoint(GraphError):
    pass


class SelfCitation(GraphError):
    pass


class AnticausalEdge(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class EmptyTargetYear(GraphError):
    pass


@dataclass(frozen=True)
class DocumentNode:
    """One document: identifier, publication year, and raw metadata.

    citation_count is the total number of citations the document has
    received (the label source), not the in-degree of any particular
    subgraph.
    """

    id: str
    year: int
    citation_count: int
    title_abstract: str = ""
    affiliations: tuple[str, ...] = ()


class CitationGraph:
    """Immutable directed citation graph (citing -> cited).

    Use build_graph() to construct one; the constructor assumes nodes and
    edges have already been validated.
    """

    __slots__ = ("nodes", "edges", "dropped_edges", "_index")

    def __init__(self, nodes: tuple[DocumentNode, ...], edges: tuple[Edge, ...],
                 dropped_edges: int = 0):
        self.nodes = nodes
        self.edges = edges
        self.dropped_edges = dropped_edges
        self._index = {node.id: node for node in nodes}

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._index

    def node(self, node_id: str) -> DocumentNode:
        return self._index[node_id]

    def year_of(self, node_id: str) -> int:
        return self._index[node_id].year

    def __repr__(self) -> str:
        return f"CitationGraph(n_nodes={self.n_nodes}, n_edges={self.n_edges})"


def build_graph(nodes: Sequence[DocumentNode], edges: Iterable[Edge], *,
                strict: bool = True,
                year_range: tuple[int, int] = (1000, 3000)) -> CitationGraph:
    """Validate nodes and edges and assemble a CitationGraph.

    In strict mode (the default) any invalid edge raises; in lenient mode
    invalid edges are dropped and counted on the returned graph
    (real citation dumps are dirty).  Node problems always raise.

    Raises:
        ValueError: duplicate node id, negative citation count, or year
            outside ``year_range``.
        UnknownEndpoint, SelfCitation, AnticausalEdge, DuplicateEdge:
            strict-mode edge rejections.
    """
    index: dict[str, DocumentNode] = {}
    for node in nodes:
        if node.id in index:
            raise ValueError(f"duplicate node id {node.id!r}")
        if node.citation_count < 0:
            raise ValueError(f"node {node.id!r} has negative citation_count")
        if not (year_range[0] <= node.year <= year_range[1]):
            raise ValueError(f"node {node.id!r} year {node.year} outside range {year_range}")
        index[node.id] = node

    kept: list[Edge] = []
    seen: set[Edge] = set()
    dropped = 0
    for citing, cited in edges:
        problem: GraphError | None = None
        if citing not in index or cited not in index:
            problem = UnknownEndpoint(f"edge ({citing!r}, {cited!r}) references an unknown node")
        elif citing == cited:
            problem = SelfCitation(f"node {citing!r} cites itself")
        elif index[cited].year > index[citing].year:
            problem = AnticausalEdge(
                f"{citing!r} ({index[citing].year}) cites {cited!r} "
                f"({index[cited].year}) published later")
        elif (citing, cited) in seen:
            problem = DuplicateEdge(f"duplicate edge ({citing!r}, {cited!r})")
        if problem is not None:
            if strict:
                raise problem
            dropped += 1
            continue
        seen.add((citing, cited))
        kept.append((citing, cited))

    return CitationGraph(tuple(nodes), tuple(kept), dropped_edges=dropped)


@dataclass(frozen=True)
class YearSplit:
    """Causal partition of a window of the graph around a target year.

    node_ids preserves the graph's node order restricted to the window and
    is the canonical row order used by feature matrices and models.
    prior_edges connect prior nodes to prior nodes; target_edges run from a
    target node to a prior node.  Edges between two target nodes are
    excluded (dropped_target_edges counts them).
    """

    prior_node_ids: frozenset[str]
    target_node_ids: frozenset[str]
    prior_edges: tuple[Edge, ...]
    target_edges: tuple[Edge, ...]
    target_year: int
    window_years: int
    node_ids: tuple[str, ...]
    dropped_target_edges: int = 0

    @property
    def window_start(self) -> int:
        return self.target_year - self.window_years

    def replace_edges(self, prior_edges: Sequence[Edge],
                      target_edges: Sequence[Edge]) -> "YearSplit":
        """Same node partition with a filtered edge set (used by ablations)."""
        return YearSplit(
            prior_node_ids=self.prior_node_ids,
            target_node_ids=self.target_node_ids,
            prior_edges=tuple(prior_edges),
            target_edges=tuple(target_edges),
            target_year=self.target_year,
            window_years=self.window_years,
            node_ids=self.node_ids,
            dropped_target_edges=self.dropped_target_edges,
        )


def split_by_year(graph: CitationGraph, target_year: int, window_years: int) -> YearSplit:
    """Split a graph into prior/target node and edge sets for one target year.

    Prior nodes are those published in [target_year - window_years,
    target_year); target nodes are published exactly in target_year.
    Edges with an endpoint outside the window are not retained.

    Raises:
        ValueError: window_years < 1.
        EmptyTargetYear: no node published in target_year.
    """
    if window_years < 1:
        raise ValueError(f"window_years must be >= 1, got {window_years}")
    start = target_year - window_years

    prior_ids: set[str] = set()
    target_ids: set[str] = set()
    ordered: list[str] = []
    for node in graph.nodes:
        if node.year == target_year:
            target_ids.add(node.id)
            ordered.append(node.id)
        elif start <= node.year < target_year:
            prior_ids.add(node.id)
            ordered.append(node.id)
    if not target_ids:
        raise EmptyTargetYear(f"no node published in target year {target_year}")

    prior_edges: list[Edge] = []
    target_edges: list[Edge] = []
    dropped = 0
    for citing, cited in graph.edges:
        if citing in prior_ids and cited in prior_ids:
            prior_edges.append((citing, cited))
        elif citing in target_ids and cited in prior_ids:
            target_edges.append((citing, cited))
        elif citing in target_ids and cited in target_ids:
            dropped += 1
        # edges touching nodes outside the window are simply not retained

    return YearSplit(
        prior_node_ids=frozenset(prior_ids),
        target_node_ids=frozenset(target_ids),
        prior_edges=tuple(prior_edges),
        target_edges=tuple(target_edges),
        target_year=target_year,
        window_years=window_years,
        node_ids=tuple(ordered),
        dropped_target_edges=dropped,
    )


@dataclass(frozen=True)
class TrendLabels:
    """Binary trend labels plus the per-year citation-count thresholds."""

    labels: Mapping[str, int]
    percentile: float
    per_year_thresholds: Mapping[int, int]

    def positives(self) -> int:
        return sum(self.labels.values())


def nearest_rank_threshold(counts: Sequence[int], percentile: float) -> int:
    """k-th smallest value with k = ceil(percentile * n) (nearest-rank)."""
    ordered = sorted(counts)
    k = math.ceil(percentile * len(ordered))
    return ordered[k - 1]


def label_by_percentile(graph: CitationGraph, node_ids: Iterable[str],
                        percentile: float) -> TrendLabels:
    """Label each node 1 iff its citation count strictly exceeds its year's
    nearest-rank percentile threshold.

    Thresholds are computed independently per publication year because
    citation counts vary strongly year to year.  A year with a single node
    always yields label 0 (no count strictly exceeds its own threshold).

    Raises:
        ValueError: percentile outside (0, 1) or empty node set.
    """
    if not (0.0 < percentile < 1.0):
        raise ValueError(f"percentile must be in (0, 1), got {percentile}")
    ids = list(node_ids)
    if not ids:
        raise ValueError("node set is empty")

    by_year: dict[int, list[str]] = {}
    for node_id in ids:
        by_year.setdefault(graph.year_of(node_id), []).append(node_id)

    thresholds: dict[int, int] = {}
    labels: dict[str, int] = {}
    for year, members in by_year.items():
        counts = [graph.node(m).citation_count for m in members]
        threshold = nearest_rank_threshold(counts, percentile)
        thresholds[year] = threshold
        for member, count in zip(members, counts):
            labels[member] = 1 if count > threshold else 0

    return TrendLabels(labels=labels, percentile=percentile,
                       per_year_thresholds=thresholds)
