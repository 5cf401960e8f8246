# -*- coding: utf-8 -*-
"""BM25 weak annotator for pairwise ranking.

The index stores raw term frequencies so that scores can be recomputed for any
(query, document) pair, including judged documents outside a retrieval depth.
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

from ..errors import ConfigError, DegenerateInputError, UnknownDocumentError, ValidationError
from .feature_tables import load_feature_table


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75
    k3: float = 1000.0

    def __post_init__(self):
        if not self.k1 > 0:
            raise ConfigError(f"BM25 k1 must be positive, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ConfigError(f"BM25 b must lie in [0, 1], got {self.b}")
        if not self.k3 >= 0:
            raise ConfigError(f"BM25 k3 must be non-negative, got {self.k3}")

    @classmethod
    def defaults(cls) -> "Bm25Params":
        table = load_feature_table("bm25")
        return cls(k1=float(table["k1"]), b=float(table["b"]), k3=float(table["k3"]))


@dataclass
class InvertedIndex:
    """Postings and collection statistics; treat as immutable once built."""

    doc_count: int
    avg_doc_len: float
    doc_lengths: Dict[str, int]
    postings: Dict[str, List[Tuple[str, int]]]
    doc_freq: Dict[str, int]
    # per-document term counts, kept for direct (query, doc) scoring
    term_counts: Dict[str, Mapping[str, int]] = field(repr=False, default_factory=dict)

    def tf(self, term: str, doc_id: str) -> int:
        return self.term_counts[doc_id].get(term, 0)


def build_index(documents: Sequence[Tuple[str, Sequence[str]]]) -> InvertedIndex:
    """
    Build an inverted index over tokenized documents.

    Args:
        documents: (doc_id, tokens) pairs; ids must be unique

    Returns:
        InvertedIndex: postings sorted by doc id, df and length statistics
    """
    if not documents:
        raise DegenerateInputError("cannot index an empty corpus")
    doc_lengths: Dict[str, int] = {}
    term_counts: Dict[str, Mapping[str, int]] = {}
    for doc_id, tokens in documents:
        if doc_id in doc_lengths:
            raise ValidationError(f"duplicate document id '{doc_id}'")
        counts = Counter(tokens)
        doc_lengths[doc_id] = len(tokens)
        term_counts[doc_id] = counts

    postings: Dict[str, List[Tuple[str, int]]] = {}
    for doc_id in sorted(term_counts):
        for term, tf in term_counts[doc_id].items():
            postings.setdefault(term, []).append((doc_id, tf))
    doc_freq = {term: len(plist) for term, plist in postings.items()}
    doc_count = len(doc_lengths)
    return InvertedIndex(
        doc_count=doc_count,
        avg_doc_len=sum(doc_lengths.values()) / doc_count,
        doc_lengths=doc_lengths,
        postings=postings,
        doc_freq=doc_freq,
        term_counts=term_counts,
    )


def idf(index: InvertedIndex, term: str) -> float:
    """Non-negative (Lucene-style) inverse document frequency."""
    df = index.doc_freq.get(term, 0)
    n = index.doc_count
    return math.log((n - df + 0.5) / (df + 0.5) + 1.0)


def _term_score(index: InvertedIndex, params: Bm25Params, term: str, qtf: int, doc_id: str) -> float:
    tf = index.tf(term, doc_id)
    if tf == 0:
        return 0.0
    length_norm = 1.0 - params.b + params.b * index.doc_lengths[doc_id] / index.avg_doc_len
    tf_part = tf * (params.k1 + 1.0) / (tf + params.k1 * length_norm)
    qtf_part = qtf * (params.k3 + 1.0) / (params.k3 + qtf)
    return idf(index, term) * tf_part * qtf_part


def bm25_score(index: InvertedIndex, params: Bm25Params, query: Sequence[str], doc_id: str) -> float:
    """BM25 score of one document for a tokenized query (0 for an empty query)."""
    if doc_id not in index.doc_lengths:
        raise UnknownDocumentError(doc_id)
    score = 0.0
    for term, qtf in sorted(Counter(query).items()):
        score += _term_score(index, params, term, qtf, doc_id)
    return score


def retrieve(index: InvertedIndex, params: Bm25Params, query: Sequence[str], depth: int) -> List[Tuple[str, float]]:
    """
    Top-``depth`` documents for a query, by score descending then doc id ascending.

    Only documents sharing at least one term with the query are candidates.
    """
    candidates = set()
    for term in set(query):
        for doc_id, _ in index.postings.get(term, ()):
            candidates.add(doc_id)
    scored = [(doc_id, bm25_score(index, params, query, doc_id)) for doc_id in candidates]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:depth]


def pairwise_weak_label(s_pos: float, s_neg: float) -> float:
    """
    Probability that the first document ranks above the second.

    Examples:
        >>> pairwise_weak_label(3.0, 1.0)
        0.75
        >>> pairwise_weak_label(0.0, 0.0)
        0.5
    """
    if not (math.isfinite(s_pos) and math.isfinite(s_neg)):
        raise ValidationError("BM25 scores must be finite")
    if s_pos < 0 or s_neg < 0:
        raise ValidationError(f"BM25 scores must be non-negative, got ({s_pos}, {s_neg})")
    total = s_pos + s_neg
    if total == 0:
        return 0.5
    return s_pos / total
