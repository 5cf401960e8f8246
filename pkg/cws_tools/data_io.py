# -*- coding: utf-8 -*-
"""Corpus loading and assembly of the weak (U) and true-labeled (V) training sets.

File formats:

* ``docs.tsv``: ``docid<TAB>text``
* ``queries.tsv``: ``qid<TAB>text[<TAB>split]`` with split one of unlabeled / train / test
* qrels: TREC ``qid 0 docid grade``
* sentences: JSONL objects ``{"id", "text", "label"?, "split"?}``
* query log: one raw query per line, filtered before use
"""

import json
import logging
import os
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CorpusParseError, ValidationError
from .evaluation import Qrels, read_qrels
from .networks import RankInstance, SentenceInstance
from .node_resources.bm25 import Bm25Params, InvertedIndex, bm25_score, build_index, pairwise_weak_label, retrieve
from .node_resources.confidence_targets import confidence_target_class, confidence_target_rank
from .node_resources.feature_tables import load_feature_table
from .node_resources.sentiment_lexicon import CLASSES, NUM_CLASSES, SentimentLexicon, lexicon_annotate
from .node_resources.text_utils import filter_query_log, tokenize
from .node_resources.vocabulary import Vocabulary
from .training import LabeledSets, TrueItem, WeakItem

logger = logging.getLogger(__name__)

UNLABELED = "unlabeled"
TRAIN = "train"
TEST = "test"
SPLITS = (UNLABELED, TRAIN, TEST)


# ---------------------------------------------------------------------------
# Ranking corpus
# ---------------------------------------------------------------------------


@dataclass
class RankingCorpus:
    """Tokenized documents and queries, relevance judgments and the query split."""

    documents: Dict[str, List[str]]
    queries: Dict[str, List[str]]
    qrels: Qrels
    vocabulary: Vocabulary
    query_split: Dict[str, str] = field(default_factory=dict)

    def split_ids(self, split: str) -> List[str]:
        return sorted(qid for qid, s in self.query_split.items() if s == split)

    def encoded_documents(self) -> Dict[str, Tuple[int, ...]]:
        return {doc_id: self.vocabulary.encode(tokens) for doc_id, tokens in self.documents.items()}

    def encoded_query(self, query_id: str) -> Tuple[int, ...]:
        return self.vocabulary.encode(self.queries[query_id])

    def index(self) -> InvertedIndex:
        return build_index(sorted(self.documents.items()))


def _read_tsv(path: str, min_fields: int, max_fields: int) -> List[Tuple[int, List[str]]]:
    rows = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for line_number, raw in enumerate(f, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if not min_fields <= len(parts) <= max_fields:
                raise CorpusParseError(path, line_number, f"expected {min_fields} to {max_fields} tab-separated fields, got {len(parts)}")
            key = parts[0].strip()
            if not key:
                raise CorpusParseError(path, line_number, "empty id")
            if key in seen:
                raise CorpusParseError(path, line_number, f"duplicate id '{key}'")
            seen.add(key)
            rows.append((line_number, [key] + parts[1:]))
    return rows


def load_query_log(path: str, prefix: str = "log") -> Dict[str, List[str]]:
    """Raw query log -> filtered, deduplicated queries with generated ids."""
    with open(path, "r", encoding="utf-8") as f:
        kept = filter_query_log(line.strip() for line in f)
    logger.info("query log %s: %d queries kept after filtering", path, len(kept))
    width = max(6, len(str(len(kept))))
    return {f"{prefix}-{i:0{width}d}": tokenize(q) for i, q in enumerate(kept, start=1)}


def load_ranking_corpus(
    docs_path: str,
    queries_path: str,
    qrels_path: str,
    query_log_path: Optional[str] = None,
) -> RankingCorpus:
    """
    Load a ranking corpus and build its vocabulary over documents and queries.

    Queries without an explicit split column are ``unlabeled`` when they have no
    judgments and ``train`` otherwise. Queries from a query log are always unlabeled.

    Raises:
        CorpusParseError: malformed line (with file and line number)
        OSError: missing or unreadable file
    """
    documents = {row[0]: tokenize(row[1]) for _, row in _read_tsv(docs_path, 2, 2)}
    qrels = read_qrels(qrels_path)
    queries: Dict[str, List[str]] = {}
    split: Dict[str, str] = {}
    for line_number, row in _read_tsv(queries_path, 2, 3):
        qid, text = row[0], row[1]
        queries[qid] = tokenize(text)
        if len(row) == 3:
            tag = row[2].strip().lower()
            if tag not in SPLITS:
                raise CorpusParseError(queries_path, line_number, f"unknown split '{row[2]}', expected one of {SPLITS}")
            split[qid] = tag
        else:
            split[qid] = TRAIN if qid in qrels else UNLABELED
    if query_log_path:
        for qid, tokens in load_query_log(query_log_path).items():
            if qid in queries:
                raise ValidationError(f"query log id '{qid}' collides with a query id")
            queries[qid] = tokens
            split[qid] = UNLABELED
    vocabulary = Vocabulary.build([*(documents[d] for d in sorted(documents)), *(queries[q] for q in sorted(queries))])
    logger.info("ranking corpus: %d documents, %d queries, vocabulary %d", len(documents), len(queries), len(vocabulary))
    return RankingCorpus(documents, queries, qrels, vocabulary, split)


def true_pair_label(grade_first: int, grade_second: int) -> float:
    """1 if the first document is graded higher, 0.5 on equal grades, else 0."""
    if grade_first > grade_second:
        return 1.0
    if grade_first == grade_second:
        return 0.5
    return 0.0


@dataclass
class RankPairRecord:
    """One weakly labeled pair, as written by the ``annotate`` subcommand."""

    query_id: str
    doc_first: str
    doc_second: str
    weak_label: float


def harvest_weak_pairs(
    corpus: RankingCorpus,
    index: InvertedIndex,
    bm25: Bm25Params,
    query_ids: Sequence[str],
    depth: int,
    rng: Optional[np.random.Generator] = None,
) -> List[RankPairRecord]:
    """
    All pairs of the top-``depth`` BM25 documents of each query, with pairwise weak labels.

    When ``rng`` is given each pair is presented in a random orientation (label flipped
    accordingly); otherwise the higher-ranked document comes first.
    """
    records: List[RankPairRecord] = []
    for qid in query_ids:
        hits = retrieve(index, bm25, corpus.queries[qid], depth)
        if len(hits) < 2:
            logger.warning("query '%s' has %d candidate(s), skipped", qid, len(hits))
            continue
        for (d1, s1), (d2, s2) in combinations(hits, 2):
            if rng is not None and rng.random() < 0.5:
                d1, s1, d2, s2 = d2, s2, d1, s1
            label = pairwise_weak_label(s1, s2)
            records.append(RankPairRecord(qid, d1, d2, label))
    return records


def build_rank_sets(
    corpus: RankingCorpus,
    index: InvertedIndex,
    bm25: Bm25Params,
    depth: Optional[int] = None,
    seed: int = 0,
    shuffle_orientation: bool = True,
    unlabeled_ids: Optional[Sequence[str]] = None,
    labeled_ids: Optional[Sequence[str]] = None,
) -> LabeledSets:
    """
    Assemble U from BM25 pairs of unlabeled queries and V from judged pairs of labeled queries.

    V pairs every judged relevant document (grade >= 1) of a query with every judged
    non-relevant one; the true label compares grades and the weak label compares BM25
    scores of the same two documents.

    Args:
        corpus: Loaded corpus
        index: Index over the corpus documents
        bm25: BM25 parameters
        depth: Candidates per unlabeled query (``harvest_depth`` from bm25.yaml by default)
        seed: Seeds the pair orientation draws
        shuffle_orientation: Randomize which document of a pair comes first
        unlabeled_ids / labeled_ids: Override the corpus split

    Returns:
        LabeledSets: U and V
    """
    if depth is None:
        depth = int(load_feature_table("bm25")["harvest_depth"])
    unlabeled_ids = corpus.split_ids(UNLABELED) if unlabeled_ids is None else list(unlabeled_ids)
    labeled_ids = corpus.split_ids(TRAIN) if labeled_ids is None else list(labeled_ids)
    weak_rng, full_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    encoded = corpus.encoded_documents()

    # documents whose text has no token cannot be composed
    empty = {doc_id for doc_id, tokens in encoded.items() if not tokens}

    weak_items = []
    for record in harvest_weak_pairs(corpus, index, bm25, unlabeled_ids, depth, weak_rng if shuffle_orientation else None):
        if record.doc_first in empty or record.doc_second in empty:
            continue
        instance = RankInstance(corpus.encoded_query(record.query_id), encoded[record.doc_first], encoded[record.doc_second])
        weak_items.append(WeakItem(instance, np.array([record.weak_label])))

    full_items = []
    for qid in labeled_ids:
        grades = corpus.qrels.grades(qid)
        query_terms = corpus.queries[qid]
        blank = sorted(d for d in grades if d in empty)
        if blank:
            logger.warning("labeled query '%s': judged document(s) %s have no tokens, left out", qid, ", ".join(blank))
        relevant = sorted(d for d, g in grades.items() if g >= 1 and d in encoded and d not in empty)
        non_relevant = sorted(d for d, g in grades.items() if g == 0 and d in encoded and d not in empty)
        if not relevant or not non_relevant or not query_terms:
            logger.warning("labeled query '%s' yields no judged pair, skipped", qid)
            continue
        for d_pos in relevant:
            for d_neg in non_relevant:
                first, second = d_pos, d_neg
                if shuffle_orientation and full_rng.random() < 0.5:
                    first, second = d_neg, d_pos
                y = true_pair_label(grades[first], grades[second])
                y_weak = pairwise_weak_label(
                    bm25_score(index, bm25, query_terms, first), bm25_score(index, bm25, query_terms, second)
                )
                instance = RankInstance(corpus.encoded_query(qid), encoded[first], encoded[second])
                full_items.append(TrueItem(instance, np.array([y_weak]), np.array([y]), confidence_target_rank(y, y_weak)))
    logger.info("ranking sets: |U|=%d from %d queries, |V|=%d from %d queries", len(weak_items), len(unlabeled_ids), len(full_items), len(labeled_ids))
    return LabeledSets(weak_items, full_items)


# ---------------------------------------------------------------------------
# Sentiment corpus
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SentimentRecord:
    record_id: str
    tokens: Tuple[str, ...]
    label: Optional[int] = None
    split: str = UNLABELED

    @property
    def true_label(self) -> np.ndarray:
        if self.label is None:
            raise ValidationError(f"sentence '{self.record_id}' has no label")
        return one_hot(self.label)


def one_hot(label: int) -> np.ndarray:
    vec = np.zeros(NUM_CLASSES)
    vec[int(label)] = 1.0
    return vec


@dataclass
class SentimentCorpus:
    """Sentence pools: unlabeled (U-eligible), labeled train (V-eligible) and labeled test."""

    unlabeled: List[SentimentRecord]
    labeled: List[SentimentRecord]
    test: List[SentimentRecord]
    vocabulary: Vocabulary

    def encode(self, record: SentimentRecord) -> SentenceInstance:
        return SentenceInstance(self.vocabulary.encode(record.tokens))


def load_sentiment_corpus(path: str) -> SentimentCorpus:
    """
    Load JSONL sentences; labeled records go to the V-eligible pool (or the test pool
    when ``"split": "test"``), unlabeled ones to the U-eligible pool.

    Raises:
        CorpusParseError: invalid JSON, missing field, unknown label or split
    """
    unlabeled, labeled, test = [], [], []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for line_number, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except ValueError as e:
                raise CorpusParseError(path, line_number, f"invalid JSON: {e}") from e
            if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
                raise CorpusParseError(path, line_number, "expected an object with 'id' and 'text'")
            record_id = str(obj["id"])
            if record_id in seen:
                raise CorpusParseError(path, line_number, f"duplicate id '{record_id}'")
            seen.add(record_id)
            raw_label = obj.get("label")
            label = None
            if raw_label is not None:
                name = str(raw_label).strip().lower()
                if name not in CLASSES:
                    raise CorpusParseError(path, line_number, f"unknown label '{raw_label}', expected one of {CLASSES}")
                label = CLASSES.index(name)
            split = str(obj.get("split", TRAIN if label is not None else UNLABELED)).lower()
            if split not in SPLITS or (label is None) != (split == UNLABELED):
                raise CorpusParseError(path, line_number, f"split '{split}' does not fit label {raw_label!r}")
            record = SentimentRecord(record_id, tuple(tokenize(str(obj["text"]))), label, split)
            {UNLABELED: unlabeled, TRAIN: labeled, TEST: test}[split].append(record)
    vocabulary = Vocabulary.build(r.tokens for r in unlabeled + labeled + test)
    logger.info(
        "sentiment corpus: %d unlabeled, %d labeled, %d test, vocabulary %d",
        len(unlabeled), len(labeled), len(test), len(vocabulary),
    )
    return SentimentCorpus(unlabeled, labeled, test, vocabulary)


def hold_out(records: Sequence, fraction: float, seed: int) -> Tuple[list, list]:
    """Deterministic (kept, held_out) split of a record list."""
    if not 0.0 < fraction < 1.0:
        raise ValidationError(f"hold-out fraction must lie in (0, 1), got {fraction}")
    order = np.random.default_rng(seed).permutation(len(records))
    cut = int(round(len(records) * fraction))
    held = sorted(order[:cut].tolist())
    kept = sorted(order[cut:].tolist())
    return [records[i] for i in kept], [records[i] for i in held]


def build_sentiment_sets(corpus: SentimentCorpus, lexicon: SentimentLexicon) -> LabeledSets:
    """U from unlabeled sentences, V from labeled train sentences, weak labels from the lexicon."""
    weak_items, full_items = [], []
    for record in corpus.unlabeled:
        if not record.tokens:
            logger.warning("sentence '%s' has no token, skipped", record.record_id)
            continue
        weak_items.append(WeakItem(corpus.encode(record), lexicon_annotate(lexicon, record.tokens)))
    for record in corpus.labeled:
        if not record.tokens:
            logger.warning("sentence '%s' has no token, skipped", record.record_id)
            continue
        weak = lexicon_annotate(lexicon, record.tokens)
        truth = record.true_label
        full_items.append(TrueItem(corpus.encode(record), weak, truth, confidence_target_class(truth, weak)))
    logger.info("sentiment sets: |U|=%d, |V|=%d", len(weak_items), len(full_items))
    return LabeledSets(weak_items, full_items)


# ---------------------------------------------------------------------------
# Writers (inverse of the loaders)
# ---------------------------------------------------------------------------


def write_ranking_corpus(corpus: RankingCorpus, out_dir: str) -> Dict[str, str]:
    """Write docs.tsv, queries.tsv (with split column) and qrels.txt; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {name: os.path.join(out_dir, name) for name in ("docs.tsv", "queries.tsv", "qrels.txt")}
    with open(paths["docs.tsv"], "w", encoding="utf-8", newline="\n") as f:
        for doc_id in sorted(corpus.documents):
            f.write(f"{doc_id}\t{' '.join(corpus.documents[doc_id])}\n")
    with open(paths["queries.tsv"], "w", encoding="utf-8", newline="\n") as f:
        for qid in sorted(corpus.queries):
            f.write(f"{qid}\t{' '.join(corpus.queries[qid])}\t{corpus.query_split.get(qid, UNLABELED)}\n")
    with open(paths["qrels.txt"], "w", encoding="utf-8", newline="\n") as f:
        for qid in corpus.qrels.query_ids():
            grades = corpus.qrels.grades(qid)
            for doc_id in sorted(grades):
                f.write(f"{qid} 0 {doc_id} {grades[doc_id]}\n")
    return paths


def write_sentiment_corpus(corpus: SentimentCorpus, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in corpus.unlabeled + corpus.labeled + corpus.test:
            obj = {"id": record.record_id, "text": " ".join(record.tokens)}
            if record.label is not None:
                obj["label"] = CLASSES[record.label]
                obj["split"] = record.split
            f.write(json.dumps(obj, ensure_ascii=False) + "\n")
