"""Raw node metadata to numeric feature blocks.

Three blocks per node, rows aligned across blocks:

* text: tf-idf over title + abstract tokens,
* affiliations: multi-hot over the most frequent affiliation strings,
* year: normalized position inside the split window plus a target flag.

Vocabularies (text and affiliation) are fitted on prior-window nodes only
and then applied to every node in the window, so target-year corpus
statistics never leak into the representation.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import CitetrendError
from .graph import CitationGraph, DocumentNode, YearSplit

_TOKEN = re.compile(r"[a-z0-9]{2,}")


class FeatureError(CitetrendError):
    pass


class EmptyCorpus(FeatureError):
    pass


class YearOutOfWindow(FeatureError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric runs of length >= 2; everything else separates."""
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class Vocabulary:
    """Term-to-column map with the document frequencies it was fitted from.

    corpus_size is the number of documents seen at fit time; the idf of a
    term needs it.  Column indices are dense and assigned in ascending
    lexicographic term order.
    """

    index: Mapping[str, int]
    document_frequency: Mapping[str, int]
    max_features: int
    corpus_size: int

    def __len__(self) -> int:
        return len(self.index)

    def idf(self, term: str) -> float:
        df = self.document_frequency[term]
        return math.log((1 + self.corpus_size) / (1 + df)) + 1.0


def fit_vocabulary(docs: Sequence[str], max_features: int = 1000) -> Vocabulary:
    """Fit a tf-idf vocabulary: the max_features terms with the highest
    document frequency, ties broken lexicographically ascending.

    Raises:
        ValueError: max_features < 1 or empty doc list.
        EmptyCorpus: no document yields any token.
    """
    if max_features < 1:
        raise ValueError(f"max_features must be >= 1, got {max_features}")
    if not docs:
        raise ValueError("document list is empty")

    df: dict[str, int] = {}
    for doc in docs:
        for term in set(tokenize(doc)):
            df[term] = df.get(term, 0) + 1
    if not df:
        raise EmptyCorpus("no tokens in any document")

    kept = sorted(df, key=lambda t: (-df[t], t))[:max_features]
    index = {term: col for col, term in enumerate(sorted(kept))}
    return Vocabulary(
        index=index,
        document_frequency={t: df[t] for t in kept},
        max_features=max_features,
        corpus_size=len(docs),
    )


def transform_tfidf(vocab: Vocabulary, docs: Sequence[str]) -> sp.csr_matrix:
    """tf-idf rows for docs under a fitted vocabulary.

    weight(t, d) = count(t in d) * (ln((1+N)/(1+df(t))) + 1) with N the fit
    corpus size; every nonzero row is L2-normalized.  Unknown terms are
    ignored, so an all-out-of-vocabulary document becomes a zero row.
    """
    idf = {term: vocab.idf(term) for term in vocab.index}
    rows: list[int] = []
    cols: list[int] = []
    data: list[float] = []
    for r, doc in enumerate(docs):
        counts: dict[str, int] = {}
        for term in tokenize(doc):
            if term in vocab.index:
                counts[term] = counts.get(term, 0) + 1
        if not counts:
            continue
        weights = {term: tf * idf[term] for term, tf in counts.items()}
        norm = math.sqrt(sum(w * w for w in weights.values()))
        for term, w in sorted(weights.items()):
            rows.append(r)
            cols.append(vocab.index[term])
            data.append(w / norm)
    return sp.csr_matrix(
        (np.asarray(data, dtype=np.float64),
         (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(len(docs), len(vocab)),
    )


def _normalize_affiliation(raw: str) -> str:
    return raw.strip().lower()


def fit_affiliation_vocabulary(nodes: Sequence[DocumentNode],
                               max_features: int = 1000) -> Vocabulary:
    """Most frequent affiliation strings (case-folded, trimmed), ties
    broken lexicographically; one column per kept affiliation."""
    freq: dict[str, int] = {}
    n_docs = 0
    for node in nodes:
        n_docs += 1
        names = {_normalize_affiliation(a) for a in node.affiliations}
        names.discard("")
        for name in names:
            freq[name] = freq.get(name, 0) + 1
    kept = sorted(freq, key=lambda a: (-freq[a], a))[:max_features]
    index = {name: col for col, name in enumerate(sorted(kept))}
    return Vocabulary(
        index=index,
        document_frequency={a: freq[a] for a in kept},
        max_features=max_features,
        corpus_size=n_docs,
    )


def transform_affiliations(vocab: Vocabulary,
                           nodes: Sequence[DocumentNode]) -> sp.csr_matrix:
    """Multi-hot rows over the affiliation vocabulary; unknowns ignored."""
    rows: list[int] = []
    cols: list[int] = []
    for r, node in enumerate(nodes):
        seen = {_normalize_affiliation(a) for a in node.affiliations}
        hit = sorted(vocab.index[name] for name in seen if name in vocab.index)
        rows.extend([r] * len(hit))
        cols.extend(hit)
    data = np.ones(len(rows), dtype=np.float64)
    return sp.csr_matrix(
        (data, (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(len(nodes), len(vocab)),
    )


def encode_affiliations(nodes: Sequence[DocumentNode],
                        max_features: int = 1000) -> tuple[sp.csr_matrix, Vocabulary]:
    """Fit an affiliation vocabulary on nodes and encode those same nodes."""
    vocab = fit_affiliation_vocabulary(nodes, max_features)
    return transform_affiliations(vocab, nodes), vocab


def encode_year(nodes: Sequence[DocumentNode], split: YearSplit) -> np.ndarray:
    """Two-column year block: normalized window position and target flag.

    Column 0 is (year - window_start) / window_years, 0.0 at the window
    start and 1.0 at the target year.  Column 1 is 1.0 for target nodes.

    Raises:
        YearOutOfWindow: a node's year falls outside the split window.
    """
    out = np.zeros((len(nodes), 2), dtype=np.float64)
    for r, node in enumerate(nodes):
        if not (split.window_start <= node.year <= split.target_year):
            raise YearOutOfWindow(
                f"node {node.id!r} year {node.year} outside window "
                f"[{split.window_start}, {split.target_year}]")
        out[r, 0] = (node.year - split.window_start) / split.window_years
        out[r, 1] = 1.0 if node.id in split.target_node_ids else 0.0
    return out


@dataclass(frozen=True)
class FeatureSet:
    """Aligned per-node feature blocks for one year split.

    Row r of every block describes the node with id row_ids[r];
    row_index inverts that mapping.
    """

    text_block: sp.csr_matrix
    affiliation_block: sp.csr_matrix
    year_block: np.ndarray
    row_ids: tuple[str, ...]
    row_index: Mapping[str, int]
    text_vocab: Vocabulary
    affiliation_vocab: Vocabulary

    @property
    def n_rows(self) -> int:
        return len(self.row_ids)

    @property
    def text_width(self) -> int:
        return self.text_block.shape[1]

    @property
    def affiliation_width(self) -> int:
        return self.affiliation_block.shape[1]

    def dense_blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Blocks as dense float64 arrays (text, affiliations, year)."""
        return (
            np.ascontiguousarray(self.text_block.toarray(), dtype=np.float64),
            np.ascontiguousarray(self.affiliation_block.toarray(), dtype=np.float64),
            np.ascontiguousarray(self.year_block, dtype=np.float64),
        )

    def flat_matrix(self) -> np.ndarray:
        """Dense [text | affiliations | year] concatenation (for the
        graph-free linear baseline)."""
        text, affil, year = self.dense_blocks()
        return np.ascontiguousarray(np.hstack([text, affil, year]))


def build_features(graph: CitationGraph, split: YearSplit, *,
                   max_text_features: int = 1000,
                   max_affiliation_features: int = 1000) -> FeatureSet:
    """Assemble the FeatureSet for a split, rows in split.node_ids order.

    Both vocabularies are fitted on the prior nodes only; the fitted
    transforms are then applied to prior and target rows alike.
    """
    nodes = [graph.node(node_id) for node_id in split.node_ids]
    prior_nodes = [n for n in nodes if n.id in split.prior_node_ids]
    if not prior_nodes:
        raise FeatureError("split has no prior nodes to fit vocabularies on")

    text_vocab = fit_vocabulary([n.title_abstract for n in prior_nodes],
                                max_text_features)
    affil_vocab = fit_affiliation_vocabulary(prior_nodes, max_affiliation_features)

    docs = [n.title_abstract for n in nodes]
    return FeatureSet(
        text_block=transform_tfidf(text_vocab, docs),
        affiliation_block=transform_affiliations(affil_vocab, nodes),
        year_block=encode_year(nodes, split),
        row_ids=tuple(split.node_ids),
        row_index={node_id: r for r, node_id in enumerate(split.node_ids)},
        text_vocab=text_vocab,
        affiliation_vocab=affil_vocab,
    )
