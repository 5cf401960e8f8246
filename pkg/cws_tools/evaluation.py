# -*- coding: utf-8 -*-
"""Task metrics, tournament reranking with the pairwise model, and paired significance tests."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import betainc

from . import networks as nets
from .errors import ConfigError, CorpusParseError, DegenerateInputError, ShapeError, ValidationError
from .networks import RANKING, ModelParameters
from .node_resources.bm25 import Bm25Params, InvertedIndex, retrieve
from .node_resources.sentiment_lexicon import NEGATIVE, POSITIVE

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RankedList:
    """Documents for one query, score descending, ties broken by ascending doc id."""

    query_id: str
    entries: Tuple[Tuple[str, float], ...]

    def __post_init__(self):
        ids = [doc_id for doc_id, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"ranked list for '{self.query_id}' repeats a document")
        keys = [(-score, doc_id) for doc_id, score in self.entries]
        if keys != sorted(keys):
            raise ValidationError(f"ranked list for '{self.query_id}' is not in (score desc, doc id) order")

    @classmethod
    def from_scores(cls, query_id: str, scores: Union[Mapping[str, float], Iterable[Tuple[str, float]]]) -> "RankedList":
        items = scores.items() if isinstance(scores, Mapping) else scores
        ordered = sorted(((str(d), float(s)) for d, s in items), key=lambda item: (-item[1], item[0]))
        return cls(query_id, tuple(ordered))

    @property
    def doc_ids(self) -> List[str]:
        return [doc_id for doc_id, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class Qrels:
    """(query id, doc id) -> graded relevance >= 0."""

    judgments: Dict[str, Dict[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        for qid, docs in self.judgments.items():
            for doc_id, grade in docs.items():
                if int(grade) < 0:
                    raise ValidationError(f"negative relevance grade for ({qid}, {doc_id})")

    def add(self, query_id: str, doc_id: str, grade: int) -> None:
        if int(grade) < 0:
            raise ValidationError(f"negative relevance grade for ({query_id}, {doc_id})")
        self.judgments.setdefault(query_id, {})[doc_id] = int(grade)

    def grades(self, query_id: str) -> Dict[str, int]:
        return self.judgments.get(query_id, {})

    def relevant(self, query_id: str) -> List[str]:
        return sorted(d for d, g in self.grades(query_id).items() if g >= 1)

    def __contains__(self, query_id: str) -> bool:
        return query_id in self.judgments

    def query_ids(self) -> List[str]:
        return sorted(self.judgments)


Runs = Union[Mapping[str, RankedList], Sequence[RankedList]]


def _run_lists(runs: Runs) -> List[RankedList]:
    lists = list(runs.values()) if isinstance(runs, Mapping) else list(runs)
    return sorted(lists, key=lambda r: r.query_id)


# ---------------------------------------------------------------------------
# Reranking
# ---------------------------------------------------------------------------


def rerank(
    params: ModelParameters,
    query: Sequence[int],
    candidates: Sequence[Tuple[str, Sequence[int]]],
    pool_size: int = 100,
    query_id: str = "",
) -> RankedList:
    """
    Round-robin tournament over the head of a candidate list.

    Every document d of the pool scores ``sum over d' != d of y(q, d, d')``; the pool
    is ranked by that score and the remaining candidates follow in their input
    (BM25) order.

    Args:
        params: Trained ranking parameters
        query: Query token ids
        candidates: (doc id, token ids) in BM25 order
        pool_size: Number of leading candidates to rerank
        query_id: Id carried into the RankedList

    Returns:
        RankedList: pool by tournament score, then the rest with negative placeholder scores
    """
    if params.task != RANKING:
        raise ConfigError("rerank needs ranking parameters")
    if not candidates:
        raise DegenerateInputError(f"no candidates to rerank for query '{query_id}'")
    if pool_size < 1:
        raise ConfigError(f"pool_size must be >= 1, got {pool_size}")
    pool = list(candidates[:pool_size])
    rest = list(candidates[pool_size:])

    q_block = nets.compose_text(params, query)
    doc_blocks = np.vstack([nets.compose_text(params, tokens) for _, tokens in pool])
    n = len(pool)
    scores = np.zeros(n)
    if n > 1:
        left, right = np.nonzero(~np.eye(n, dtype=bool))
        features = np.hstack([np.tile(q_block, (len(left), 1)), doc_blocks[left], doc_blocks[right]])
        wins = nets.supervision_forward(params, features)
        np.add.at(scores, left, wins)

    entries = [(doc_id, float(scores[i])) for i, (doc_id, _) in enumerate(pool)]
    entries.sort(key=lambda item: (-item[1], item[0]))
    entries.extend((doc_id, -float(i + 1)) for i, (doc_id, _) in enumerate(rest))
    return RankedList(query_id, tuple(entries))


def rank_queries(
    params: ModelParameters,
    queries: Mapping[str, Tuple[Sequence[str], Sequence[int]]],
    documents: Mapping[str, Sequence[int]],
    index: InvertedIndex,
    bm25: Bm25Params,
    depth: int = 100,
    pool_size: int = 100,
) -> Dict[str, RankedList]:
    """
    BM25 retrieval followed by tournament reranking, per query.

    Args:
        queries: query id -> (query terms, query token ids)
        documents: doc id -> token ids
        depth: BM25 candidates retrieved per query

    Returns:
        dict: query id -> RankedList; queries with no candidate are skipped with a warning
    """
    runs: Dict[str, RankedList] = {}
    for qid in sorted(queries):
        terms, ids = queries[qid]
        hits = retrieve(index, bm25, terms, depth)
        if not hits:
            logger.warning("query '%s' retrieves no documents, skipped", qid)
            continue
        candidates = [(doc_id, documents[doc_id]) for doc_id, _ in hits]
        runs[qid] = rerank(params, ids, candidates, pool_size, query_id=qid)
    return runs


def bm25_runs(
    queries: Mapping[str, Sequence[str]], index: InvertedIndex, bm25: Bm25Params, depth: int = 100
) -> Dict[str, RankedList]:
    """The weak annotator's own rankings (the WA baseline)."""
    runs: Dict[str, RankedList] = {}
    for qid in sorted(queries):
        hits = retrieve(index, bm25, queries[qid], depth)
        if hits:
            runs[qid] = RankedList.from_scores(qid, hits)
    return runs


# ---------------------------------------------------------------------------
# Ranking metrics
# ---------------------------------------------------------------------------


def average_precision(run: RankedList, qrels: Qrels, cutoff: int = 1000) -> Optional[float]:
    """AP with binary relevance (grade >= 1); None when the query has no relevant document."""
    relevant = set(qrels.relevant(run.query_id))
    if not relevant:
        return None
    hits, total = 0, 0.0
    for rank, doc_id in enumerate(run.doc_ids[:cutoff], start=1):
        if doc_id in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def mean_average_precision(runs: Runs, qrels: Qrels, cutoff: int = 1000) -> float:
    """MAP over run queries with at least one relevant judgment (TREC convention)."""
    values = [ap for ap in (average_precision(r, qrels, cutoff) for r in _run_lists(runs)) if ap is not None]
    if not values:
        raise DegenerateInputError("no run query has a relevant judgment")
    return float(np.mean(values))


def ndcg(run: RankedList, qrels: Qrels, k: int = 20) -> float:
    """nDCG@k with gain 2^g - 1 and log2(i + 1) discount; 0 when the ideal DCG is 0."""
    grades = qrels.grades(run.query_id)
    dcg = sum((2.0 ** grades.get(doc_id, 0) - 1.0) / math.log2(i + 1) for i, doc_id in enumerate(run.doc_ids[:k], start=1))
    ideal = sorted(grades.values(), reverse=True)[:k]
    idcg = sum((2.0 ** g - 1.0) / math.log2(i + 1) for i, g in enumerate(ideal, start=1))
    return dcg / idcg if idcg > 0 else 0.0


def ndcg_at_k(runs: Runs, qrels: Qrels, k: int = 20) -> float:
    """Mean nDCG@k over run queries that have judgments (all-zero grades count as 0)."""
    values = [ndcg(r, qrels, k) for r in _run_lists(runs) if r.query_id in qrels]
    if not values:
        raise DegenerateInputError("no run query has judgments")
    return float(np.mean(values))


# ---------------------------------------------------------------------------
# Classification metrics
# ---------------------------------------------------------------------------


def predicted_classes(distributions) -> np.ndarray:
    """Argmax per row, lowest index on ties."""
    return np.argmax(np.asarray(distributions, dtype=np.float64), axis=-1)


def _class_arrays(predictions, gold) -> Tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(predictions)
    if pred.ndim == 2:
        pred = predicted_classes(pred)
    true = np.asarray(gold)
    if pred.shape != true.shape:
        raise ShapeError(f"prediction shape {pred.shape} differs from gold shape {true.shape}")
    return pred.astype(np.int64), true.astype(np.int64)


def macro_f1(predictions, gold, classes: Sequence[int] = (POSITIVE, NEGATIVE)) -> float:
    """
    Mean per-class F1 over ``classes``.

    Args:
        predictions: Class ids, or rows of class distributions
        gold: Gold class ids
        classes: Classes averaged over (positive and negative by default)

    Returns:
        float: Macro-F1 in [0, 1]; a class with P + R = 0 contributes 0
    """
    pred, true = _class_arrays(predictions, gold)
    if not classes:
        raise ConfigError("macro_f1 needs at least one class")
    scores = []
    for c in classes:
        tp = int(np.sum((pred == c) & (true == c)))
        fp = int(np.sum((pred == c) & (true != c)))
        fn = int(np.sum((pred != c) & (true == c)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        scores.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return float(np.mean(scores))


def accuracy(predictions, gold) -> float:
    pred, true = _class_arrays(predictions, gold)
    if true.size == 0:
        raise DegenerateInputError("accuracy of an empty prediction set")
    return float(np.mean(pred == true))


# ---------------------------------------------------------------------------
# Significance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    significant: bool


def paired_t_test(pairs, comparisons: int = 1, alpha: float = 0.05) -> TTestResult:
    """
    Two-tailed paired t-test with a Bonferroni-corrected threshold ``alpha / comparisons``.

    Args:
        pairs: (a, b) paired values, or an (n, 2) array
        comparisons: Number of comparisons sharing the family-wise alpha

    Returns:
        TTestResult: t of the differences a - b, its p-value, significance flag
    """
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ShapeError(f"paired values must have shape (n, 2), got {arr.shape}")
    if arr.shape[0] < 2:
        raise DegenerateInputError("a paired t-test needs at least two pairs")
    if comparisons < 1:
        raise ConfigError(f"comparisons must be >= 1, got {comparisons}")
    diffs = arr[:, 0] - arr[:, 1]
    n = diffs.size
    mean = float(np.mean(diffs))
    sd = float(np.std(diffs, ddof=1))
    if np.all(diffs == 0):
        return TTestResult(0.0, 1.0, False)
    if sd == 0:
        return TTestResult(math.copysign(math.inf, mean), 0.0, True)
    t = mean / (sd / math.sqrt(n))
    df = n - 1
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    p = min(1.0, max(0.0, p))
    return TTestResult(t, p, p < alpha / comparisons)


# ---------------------------------------------------------------------------
# TREC files
# ---------------------------------------------------------------------------


def write_trec_run(runs: Runs, path: str, tag: str = "cws") -> None:
    """Write ``qid Q0 docid rank score tag`` lines, queries in id order."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for run in _run_lists(runs):
            for rank, (doc_id, score) in enumerate(run.entries, start=1):
                f.write(f"{run.query_id} Q0 {doc_id} {rank} {score:.6f} {tag}\n")


def read_trec_run(path: str) -> Dict[str, RankedList]:
    scores: Dict[str, Dict[str, float]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise CorpusParseError(path, line_number, f"expected 6 columns, got {len(parts)}")
            qid, _, doc_id, _, score, _ = parts
            try:
                scores.setdefault(qid, {})[doc_id] = float(score)
            except ValueError as e:
                raise CorpusParseError(path, line_number, f"bad score '{score}'") from e
    return {qid: RankedList.from_scores(qid, docs) for qid, docs in scores.items()}


def read_qrels(path: str) -> Qrels:
    """Read TREC ``qid 0 docid grade`` judgments."""
    qrels = Qrels()
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise CorpusParseError(path, line_number, f"expected 4 columns, got {len(parts)}")
            qid, _, doc_id, grade = parts
            try:
                value = int(grade)
            except ValueError as e:
                raise CorpusParseError(path, line_number, f"bad relevance grade '{grade}'") from e
            if value < 0:
                raise CorpusParseError(path, line_number, f"negative relevance grade {value}")
            qrels.add(qid, doc_id, value)
    return qrels
