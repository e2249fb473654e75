"""Graph bundles on disk and the synthetic citation-graph generator.

A bundle is a directory with three files:

* nodes.jsonl: one JSON object per line with id, year, citation_count,
  title_abstract, affiliations.
* edges.csv: one "citing_id,cited_id" pair per line.
* manifest.json: format version, corpus name, node and edge counts.

The generator grows a preferential-attachment citation graph with a
planted neighborhood signal.  Papers cite only within a recency horizon,
so citation mass stays inside a trailing window instead of piling onto
the oldest nodes.  Some papers are "trending": they mix words from a
designated trend topic into their text and preferentially cite other
trending papers, which concentrates in-degree on the trending subset.
The per-paper text signal is kept weak and polluted by "confuser" papers
that use trend-topic words without being trending, so a paper's own
wording is an unreliable witness while its reference list is a strong
one.  That asymmetry is what a graph model can exploit and a per-node
baseline cannot.  citation_count is realized in-degree plus Poisson
noise, and labels derive from it by the ordinary percentile path.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CitetrendError
from .graph import CitationGraph, DocumentNode, build_graph

FORMAT_VERSION = 1


class DataError(CitetrendError):
    pass


class ManifestMismatch(DataError):
    pass


class ParseError(DataError):
    pass


@dataclass(frozen=True)
class SyntheticConfig:
    n_nodes: int = 2669
    start_year: int = 1996
    end_year: int = 2020
    out_degree: float = 1.7
    recency_years: int = 10
    trend_signal_strength: float = 1.0
    n_topics: int = 10
    words_per_topic: int = 30
    background_words: int = 300
    n_affiliations: int = 60
    trend_rate: float = 0.12
    trend_onset_fraction: float = 0.1
    trend_ramp_years: float = 6.0
    trending_pull: float = 1800.0
    herd_pull: float = 10.0
    trend_recency_years: float = 2.5
    trend_extra_refs: float = 1.5
    topic_pull: float = 2.0
    text_base: float = 0.12
    trend_text_mix: float = 0.4
    confuser_rate: float = 0.25
    confuser_boost: float = 0.4
    citation_noise: float = 0.05
    corpus: str = "synthetic"
    seed: int = 0

    def __post_init__(self):
        if self.out_degree < 1.0:
            raise ValueError(f"out_degree must be >= 1, got {self.out_degree}")
        span = self.end_year - self.start_year + 1
        if span < 2:
            raise ValueError("year span must cover at least two years")
        if self.n_nodes < span:
            raise ValueError(
                f"n_nodes ({self.n_nodes}) must be >= span years ({span})")
        if not 0.0 <= self.trend_signal_strength <= 1.0:
            raise ValueError("trend_signal_strength must lie in [0, 1]")
        if self.recency_years < 1:
            raise ValueError("recency_years must be >= 1")
        if not 0.0 <= self.trend_rate <= 1.0:
            raise ValueError("trend_rate must lie in [0, 1]")
        if not 0.0 <= self.trend_onset_fraction < 1.0:
            raise ValueError("trend_onset_fraction must lie in [0, 1)")
        if self.trend_recency_years <= 0.0:
            raise ValueError("trend_recency_years must be positive")
        if self.trend_ramp_years <= 0.0:
            raise ValueError("trend_ramp_years must be positive")
        if self.trend_extra_refs < 0.0:
            raise ValueError("trend_extra_refs must be non-negative")
        if not 0.0 <= self.confuser_rate <= 1.0:
            raise ValueError("confuser_rate must lie in [0, 1]")


def bundle_presets() -> dict[str, SyntheticConfig]:
    """Named generator settings shipped with the package.

    full: the headline scale (~2669 nodes, matching the corpus statistics
    the defaults were tuned against).  mid: same mechanism at a third of
    the size, dense enough per year for ablation sweeps.  toy: small and
    fast, for smoke tests and CLI examples.
    """
    return {
        "full": SyntheticConfig(),
        "mid": SyntheticConfig(n_nodes=900, start_year=2012, end_year=2019),
        "toy": SyntheticConfig(n_nodes=140, start_year=2012, end_year=2018,
                               words_per_topic=8, background_words=60,
                               n_affiliations=12),
    }


def generate_synthetic(cfg: SyntheticConfig) -> CitationGraph:
    """Grow a citation graph per the module docstring.  Deterministic for a
    fixed config: one rng drives every draw in a fixed order."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_nodes
    signal = cfg.trend_signal_strength
    span = cfg.end_year - cfg.start_year + 1

    years = np.sort(cfg.start_year + rng.integers(0, span, size=n))
    topics = rng.integers(0, cfg.n_topics, size=n)
    # Trending papers appear after an onset year, ramp up over a few
    # years, and then hold a steady rate: the shape of a risen trend.
    onset = cfg.start_year + cfg.trend_onset_fraction * (span - 1)
    ramp = np.clip((years - onset) / cfg.trend_ramp_years, 0.0, 1.0)
    trending = rng.random(n) < cfg.trend_rate * signal * ramp
    confuser = rng.random(n) < cfg.confuser_rate

    in_degree = np.zeros(n, dtype=np.float64)
    edges: list[tuple[int, int]] = []

    # Nodes are in chronological order; node i may cite any strictly
    # earlier year within its recency horizon, i.e. an index slice
    # [lo, hi) below its own year's first position.
    first_of_year = np.searchsorted(years, years, side="left")
    horizon_start = np.searchsorted(years, years - cfg.recency_years,
                                    side="left")
    budget = 0.0
    for i in range(n):
        budget += cfg.out_degree
        if trending[i]:
            # Papers riding a trend survey it: their reference lists run
            # longer, which is itself a structural tell.
            budget += cfg.trend_extra_refs * signal
        lo, hi = int(horizon_start[i]), int(first_of_year[i])
        k = min(int(budget), hi - lo)
        budget -= int(budget)
        if k == 0:
            continue
        pool = slice(lo, hi)
        weights = ((in_degree[pool] + 1.0)
                   * np.where(topics[pool] == topics[i], cfg.topic_pull, 1.0))
        if signal > 0.0:
            # A trend is hot now: the pull toward a trending paper decays
            # exponentially with how long ago it appeared.  The pull is
            # additive, so fresh trending papers compete on even terms
            # with already-cited ones.  Trending papers chase the trend
            # hard; everyone else follows it weakly (bandwagon).
            decay = np.exp((years[pool] - years[i]) / cfg.trend_recency_years)
            channel = cfg.trending_pull if trending[i] else cfg.herd_pull
            weights = weights + channel * signal * trending[pool] * decay
        cited = lo + rng.choice(hi - lo, size=k, replace=False,
                                p=weights / weights.sum())
        for j in cited:
            edges.append((i, int(j)))
        in_degree[cited] += 1.0

    # Text: per-token source probabilities, then the token stream.  The
    # designated trend topic gets index n_topics; trending papers mix it
    # in weakly and confusers mimic it, so own text is a noisy witness.
    # The branches are exclusive: a trending paper that also carries the
    # confuser flag reads like any other trending paper.
    p_trend = np.where(trending, cfg.trend_text_mix * signal,
                       cfg.confuser_boost * confuser)
    p_trend = np.clip(p_trend, 0.0, 0.9)
    p_topic = np.minimum(cfg.text_base, 0.95 - p_trend)
    texts = []
    for i in range(n):
        length = 20 + int(rng.poisson(40))
        u = rng.random(length)
        topical_word = rng.integers(0, cfg.words_per_topic, size=length)
        background_word = rng.integers(0, cfg.background_words, size=length)
        tokens = []
        for u_j, tw, bw in zip(u, topical_word, background_word):
            if u_j < p_trend[i]:
                tokens.append(f"t{cfg.n_topics}w{tw:02d}")
            elif u_j < p_trend[i] + p_topic[i]:
                tokens.append(f"t{topics[i]}w{tw:02d}")
            else:
                tokens.append(f"bg{bw:03d}")
        texts.append(" ".join(tokens))

    lab_weights = 1.0 / np.arange(1, cfg.n_affiliations + 1)
    lab_weights /= lab_weights.sum()
    affiliations = []
    for i in range(n):
        count = min(1 + int(rng.poisson(0.8)), 4, cfg.n_affiliations)
        labs = rng.choice(cfg.n_affiliations, size=count, replace=False,
                          p=lab_weights)
        affiliations.append(tuple(f"lab{int(k):02d}" for k in sorted(labs)))

    citation_count = in_degree.astype(np.int64) + rng.poisson(
        cfg.citation_noise, size=n)

    nodes = [
        DocumentNode(
            id=f"p{i:05d}",
            year=int(years[i]),
            citation_count=int(citation_count[i]),
            title_abstract=texts[i],
            affiliations=affiliations[i],
        )
        for i in range(n)
    ]
    id_of = [node.id for node in nodes]
    edge_pairs = [(id_of[i], id_of[j]) for i, j in edges]
    return build_graph(nodes, edge_pairs, strict=True)


# -- bundle I/O ---------------------------------------------------------------

def save_bundle(graph: CitationGraph, path, corpus: str = "synthetic") -> None:
    """Write nodes.jsonl, edges.csv, and manifest.json under path.
    Output bytes depend only on the graph and corpus name."""
    root = Path(path)
    os.makedirs(root, exist_ok=True)
    with open(root / "nodes.jsonl", "w", encoding="utf-8") as fh:
        for node in graph.nodes:
            fh.write(json.dumps({
                "id": node.id,
                "year": node.year,
                "citation_count": node.citation_count,
                "title_abstract": node.title_abstract,
                "affiliations": list(node.affiliations),
            }, sort_keys=True, ensure_ascii=True, separators=(",", ":")))
            fh.write("\n")
    with open(root / "edges.csv", "w", encoding="utf-8") as fh:
        for citing, cited in graph.edges:
            fh.write(f"{citing},{cited}\n")
    manifest = {
        "format_version": FORMAT_VERSION,
        "corpus": corpus,
        "n_nodes": graph.n_nodes,
        "n_edges": graph.n_edges,
    }
    with open(root / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


_NODE_FIELDS = {
    "id": str,
    "year": int,
    "citation_count": int,
    "title_abstract": str,
    "affiliations": list,
}


def _parse_node(line: str, where: str) -> DocumentNode:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{where}: invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected a JSON object")
    for key, expected in _NODE_FIELDS.items():
        if key not in obj:
            raise ParseError(f"{where}: missing field {key!r}")
        if not isinstance(obj[key], expected) or isinstance(obj[key], bool):
            raise ParseError(f"{where}: field {key!r} has the wrong type")
    if not all(isinstance(a, str) for a in obj["affiliations"]):
        raise ParseError(f"{where}: affiliations must be strings")
    return DocumentNode(
        id=obj["id"],
        year=obj["year"],
        citation_count=obj["citation_count"],
        title_abstract=obj["title_abstract"],
        affiliations=tuple(obj["affiliations"]),
    )


def load_bundle(path, strict: bool = True) -> CitationGraph:
    """Load and validate a bundle directory.

    Raises:
        ManifestMismatch: unsupported format version or counts that do not
            match the files.
        ParseError: malformed line (message carries file and line number).
        GraphError subclasses: invalid nodes/edges, from strict validation.
    """
    root = Path(path)
    with open(root / "manifest.json", encoding="utf-8") as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{root / 'manifest.json'}: invalid JSON ({exc.msg})") from exc
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ManifestMismatch(
            f"unsupported format_version {version!r} (expected {FORMAT_VERSION})")

    nodes = []
    nodes_path = root / "nodes.jsonl"
    with open(nodes_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                nodes.append(_parse_node(line, f"{nodes_path}:{lineno}"))

    edges = []
    edges_path = root / "edges.csv"
    with open(edges_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.rstrip("\n")
            if not stripped:
                continue
            parts = stripped.split(",")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise ParseError(f"{edges_path}:{lineno}: expected 'citing_id,cited_id'")
            edges.append((parts[0], parts[1]))

    if manifest.get("n_nodes") != len(nodes):
        raise ManifestMismatch(
            f"manifest says {manifest.get('n_nodes')} nodes, files hold {len(nodes)}")
    if manifest.get("n_edges") != len(edges):
        raise ManifestMismatch(
            f"manifest says {manifest.get('n_edges')} edges, files hold {len(edges)}")
    return build_graph(nodes, edges, strict=strict)


def bundle_corpus(path) -> str:
    """Corpus name recorded in a bundle's manifest."""
    with open(Path(path) / "manifest.json", encoding="utf-8") as fh:
        return str(json.load(fh).get("corpus", ""))
