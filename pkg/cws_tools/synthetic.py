# -*- coding: utf-8 -*-
"""Desk-scale synthetic tasks on which the weak annotators are genuinely weak.

Ranking: every query owns a topic term set; relevant documents are dense in topic
terms, judged non-relevant "distractors" share query terms by accident. With
probability ``noise_rate`` a relevant document avoids the query terms entirely and
a distractor is stuffed with them, so BM25 misorders the pair.

Sentiment: a hidden lexicon decides the true label (argmax of the averaged term
distributions); the released lexicon is a corrupted copy of it.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .data_io import TEST, TRAIN, UNLABELED, RankingCorpus, SentimentCorpus, SentimentRecord
from .errors import ConfigError
from .evaluation import Qrels
from .node_resources.bm25 import Bm25Params, InvertedIndex, bm25_score
from .node_resources.feature_tables import load_feature_table, overlay
from .node_resources.sentiment_lexicon import NEGATIVE, NUM_CLASSES, POSITIVE, SentimentLexicon, lexicon_annotate, weak_class
from .node_resources.vocabulary import Vocabulary

logger = logging.getLogger(__name__)


@dataclass
class SyntheticSpec:
    """Shared knobs of both generators; ``defaults(task)`` reads ``feature_lists/synthetic.yaml``."""

    vocab_size: int = 600
    noise_rate: float = 0.3
    seed: int = 7

    def __post_init__(self):
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ConfigError(f"noise_rate must lie in [0, 1], got {self.noise_rate}")
        if self.vocab_size < 1:
            raise ConfigError("vocab_size must be >= 1")

    @staticmethod
    def defaults(task: str, **overrides) -> "SyntheticSpec":
        cls = {"ranking": RankingSynthSpec, "sentiment": SentimentSynthSpec}.get(task)
        if cls is None:
            raise ConfigError(f"no synthetic generator for task '{task}'")
        return cls(**overlay(load_feature_table("synthetic", task), overrides, "synthetic"))


@dataclass
class RankingSynthSpec(SyntheticSpec):
    num_queries: int = 120
    labeled_queries: int = 20
    test_queries: int = 20
    query_len: int = 3
    topic_size: int = 8
    doc_len: int = 30
    relevant_per_query: int = 4
    distractors_per_query: int = 4
    background_docs: int = 400
    topic_share: float = 0.6

    def __post_init__(self):
        super().__post_init__()
        if self.labeled_queries + self.test_queries > self.num_queries:
            raise ConfigError("labeled_queries + test_queries exceeds num_queries")
        if not 1 <= self.query_len <= self.topic_size <= self.vocab_size:
            raise ConfigError("need 1 <= query_len <= topic_size <= vocab_size")
        if not 0.6 <= self.topic_share <= 1.0:
            raise ConfigError(f"topic_share must lie in [0.6, 1], got {self.topic_share}")
        if self.doc_len < 1 or self.relevant_per_query < 1:
            raise ConfigError("doc_len and relevant_per_query must be >= 1")
        if min(self.distractors_per_query, self.background_docs) < 0:
            raise ConfigError("document counts must be >= 0")


@dataclass
class SentimentSynthSpec(SyntheticSpec):
    vocab_size: int = 800
    sentiment_terms_per_class: int = 40
    num_sentences: int = 21200
    labeled_sentences: int = 1200
    train_labeled: int = 200
    sentence_len: int = 12
    sentiment_share: float = 0.35
    adversarial: bool = False

    def __post_init__(self):
        super().__post_init__()
        if NUM_CLASSES * self.sentiment_terms_per_class >= self.vocab_size:
            raise ConfigError("sentiment terms must leave room for filler terms in the vocabulary")
        if not 0 < self.train_labeled <= self.labeled_sentences <= self.num_sentences:
            raise ConfigError("need 0 < train_labeled <= labeled_sentences <= num_sentences")
        if self.sentence_len < 1 or not 0.0 < self.sentiment_share <= 1.0:
            raise ConfigError("sentence_len must be >= 1 and sentiment_share in (0, 1]")


def _term(prefix: str, i: int) -> str:
    return f"{prefix}{i:05d}"


# ---------------------------------------------------------------------------
# Ranking
# ---------------------------------------------------------------------------


def gen_synth_ranking(spec: RankingSynthSpec) -> RankingCorpus:
    """
    Generate documents, queries, qrels and the query split; a pure function of ``spec``.

    Every query is judged (grade 1 for its relevant documents, 0 for its distractors);
    the split marks which queries are unlabeled, train (set V) or test.
    """
    rng = np.random.default_rng(spec.seed)
    vocab = np.array([_term("t", i) for i in range(spec.vocab_size)])
    n_topic = math.ceil(spec.topic_share * spec.doc_len)

    texts: List[List[str]] = []
    owners: List[str] = []
    grades: List[int] = []
    queries: Dict[str, List[str]] = {}
    for q in range(spec.num_queries):
        qid = f"q{q + 1:04d}"
        topic = rng.choice(spec.vocab_size, size=spec.topic_size, replace=False)
        query_terms = topic[: spec.query_len]
        queries[qid] = vocab[query_terms].tolist()
        quiet_topic = np.setdiff1d(topic, query_terms)
        background = np.setdiff1d(np.arange(spec.vocab_size), query_terms)

        for _ in range(spec.relevant_per_query):
            corrupted = rng.random() < spec.noise_rate and quiet_topic.size > 0
            source = quiet_topic if corrupted else topic
            tokens = np.concatenate([
                rng.choice(source, size=n_topic),
                rng.choice(background, size=spec.doc_len - n_topic),
            ])
            if not corrupted:
                tokens[0] = rng.choice(query_terms)
            rng.shuffle(tokens)
            texts.append(vocab[tokens].tolist())
            owners.append(qid)
            grades.append(1)

        for _ in range(spec.distractors_per_query):
            tokens = rng.choice(background, size=spec.doc_len)
            stuffed = rng.random() < spec.noise_rate
            hits = max(1, spec.doc_len // 3) if stuffed else 1
            tokens[:hits] = rng.choice(query_terms, size=hits)
            rng.shuffle(tokens)
            texts.append(vocab[tokens].tolist())
            owners.append(qid)
            grades.append(0)

    for _ in range(spec.background_docs):
        texts.append(vocab[rng.integers(0, spec.vocab_size, size=spec.doc_len)].tolist())
        owners.append("")
        grades.append(0)

    # ids are assigned in a random order so they carry no relevance signal
    order = rng.permutation(len(texts))
    width = max(5, len(str(len(texts))))
    documents: Dict[str, List[str]] = {}
    qrels = Qrels()
    for new_index, original in enumerate(order):
        doc_id = f"d{new_index + 1:0{width}d}"
        documents[doc_id] = texts[original]
        if owners[original]:
            qrels.add(owners[original], doc_id, grades[original])

    split: Dict[str, str] = {}
    for i, qid in enumerate(sorted(queries)):
        if i < spec.labeled_queries:
            split[qid] = TRAIN
        elif i < spec.labeled_queries + spec.test_queries:
            split[qid] = TEST
        else:
            split[qid] = UNLABELED

    vocabulary = Vocabulary.build([*(documents[d] for d in sorted(documents)), *(queries[q] for q in sorted(queries))])
    logger.info("synthetic ranking: %d documents, %d queries (seed %d)", len(documents), len(queries), spec.seed)
    return RankingCorpus(documents, queries, qrels, vocabulary, split)


def bm25_pair_accuracy(corpus: RankingCorpus, index: InvertedIndex, bm25: Bm25Params, query_ids=None) -> float:
    """Share of judged (relevant, non-relevant) pairs BM25 orders correctly; ties count half."""
    query_ids = corpus.qrels.query_ids() if query_ids is None else query_ids
    correct, total = 0.0, 0
    for qid in query_ids:
        grades = corpus.qrels.grades(qid)
        terms = corpus.queries[qid]
        scores = {d: bm25_score(index, bm25, terms, d) for d in grades}
        for d_pos, g_pos in grades.items():
            if g_pos < 1:
                continue
            for d_neg, g_neg in grades.items():
                if g_neg != 0:
                    continue
                total += 1
                if scores[d_pos] > scores[d_neg]:
                    correct += 1.0
                elif scores[d_pos] == scores[d_neg]:
                    correct += 0.5
    return correct / total if total else 0.0


# ---------------------------------------------------------------------------
# Sentiment
# ---------------------------------------------------------------------------


@dataclass
class SyntheticSentiment:
    corpus: SentimentCorpus
    lexicon: SentimentLexicon
    hidden_lexicon: SentimentLexicon
    # true class of every sentence, unlabeled ones included
    true_labels: Dict[str, int] = field(default_factory=dict)


def _indicative(rng: np.random.Generator, cls: int) -> np.ndarray:
    dist = np.zeros(NUM_CLASSES)
    dist[cls] = rng.uniform(0.6, 0.95)
    rest = rng.dirichlet(np.ones(NUM_CLASSES - 1)) * (1.0 - dist[cls])
    dist[[c for c in range(NUM_CLASSES) if c != cls]] = rest
    return dist


def _corrupt(rng: np.random.Generator, dist: np.ndarray, adversarial: bool) -> np.ndarray:
    if adversarial:
        flipped = dist.copy()
        flipped[[POSITIVE, NEGATIVE]] = dist[[NEGATIVE, POSITIVE]]
        return flipped
    return rng.dirichlet(np.ones(NUM_CLASSES))


def gen_synth_sentiment(spec: SentimentSynthSpec) -> SyntheticSentiment:
    """
    Generate labeled, test and unlabeled sentence pools plus the released (weak) lexicon.

    A ``noise_rate`` share of lexicon entries is corrupted: replaced by a random
    distribution, or with positive and negative swapped when ``adversarial`` is set.
    """
    rng = np.random.default_rng(spec.seed)
    per_class = spec.sentiment_terms_per_class
    n_sentiment = NUM_CLASSES * per_class
    terms = [_term("w", i) for i in range(spec.vocab_size)]
    term_class = np.repeat(np.arange(NUM_CLASSES), per_class)

    hidden = {terms[i]: _indicative(rng, int(term_class[i])) for i in range(n_sentiment)}
    released = dict(hidden)
    n_corrupt = int(round(spec.noise_rate * n_sentiment))
    for i in sorted(rng.choice(n_sentiment, size=n_corrupt, replace=False).tolist()):
        released[terms[i]] = _corrupt(rng, hidden[terms[i]], spec.adversarial)
    hidden_lexicon = SentimentLexicon(hidden)
    lexicon = SentimentLexicon(released)

    k = max(1, int(round(spec.sentiment_share * spec.sentence_len)))
    filler = np.arange(n_sentiment, spec.vocab_size)
    width = max(6, len(str(spec.num_sentences)))
    unlabeled, labeled, test = [], [], []
    true_labels: Dict[str, int] = {}
    for s in range(spec.num_sentences):
        intended = rng.integers(0, NUM_CLASSES)
        own = rng.random(k) < 0.7
        classes = np.where(own, intended, rng.integers(0, NUM_CLASSES, size=k))
        sentiment_tokens = classes * per_class + rng.integers(0, per_class, size=k)
        tokens = np.concatenate([sentiment_tokens, rng.choice(filler, size=spec.sentence_len - k)])
        rng.shuffle(tokens)
        words = tuple(terms[t] for t in tokens)
        label = weak_class(lexicon_annotate(hidden_lexicon, words))
        record_id = f"s{s + 1:0{width}d}"
        true_labels[record_id] = label
        if s < spec.train_labeled:
            labeled.append(SentimentRecord(record_id, words, label, TRAIN))
        elif s < spec.labeled_sentences:
            test.append(SentimentRecord(record_id, words, label, TEST))
        else:
            unlabeled.append(SentimentRecord(record_id, words, None, UNLABELED))

    vocabulary = Vocabulary.build(r.tokens for r in unlabeled + labeled + test)
    corpus = SentimentCorpus(unlabeled, labeled, test, vocabulary)
    logger.info("synthetic sentiment: %d unlabeled, %d labeled, %d test (seed %d)", len(unlabeled), len(labeled), len(test), spec.seed)
    return SyntheticSentiment(corpus, lexicon, hidden_lexicon, true_labels)


def lexicon_accuracy(records, lexicon: SentimentLexicon, true_labels: Dict[str, int]) -> float:
    """Share of records whose lexicon argmax equals the true class."""
    if not records:
        return 0.0
    hits = sum(weak_class(lexicon_annotate(lexicon, r.tokens)) == true_labels[r.record_id] for r in records)
    return hits / len(records)
