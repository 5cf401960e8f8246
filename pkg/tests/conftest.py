# -*- coding: utf-8 -*-
import numpy as np
import pytest
import yaml

from cws_tools import networks as nets
from cws_tools.data_io import one_hot
from cws_tools.networks import RANKING, SENTIMENT, NetworkDims, RankInstance, SentenceInstance
from cws_tools.node_resources.bm25 import build_index
from cws_tools.node_resources.confidence_targets import confidence_target_class, confidence_target_rank
from cws_tools.node_resources.vocabulary import Vocabulary
from cws_tools.training import LabeledSets, TrainConfig, TrueItem, WeakItem

SMALL_DIMS = NetworkDims(embedding_dim=4, filter_count=3, window=2, supervision_hidden=(5,), confidence_hidden=(6,))


@pytest.fixture
def vocabulary():
    return Vocabulary.build([[f"w{i}" for i in range(18)]])


@pytest.fixture
def bm25_docs():
    """Three documents whose BM25 scores are worked out by hand in test_annotators."""
    return build_index([
        ("d1", ["a", "b", "c"]),
        ("d2", ["a", "a", "d"]),
        ("d3", ["b", "d", "e", "e"]),
    ])


def _ids(rng, vocabulary, size):
    return tuple(int(i) for i in rng.integers(2, len(vocabulary), size=size))


@pytest.fixture
def ranking_params(vocabulary):
    params = nets.init_parameters(RANKING, SMALL_DIMS, seed=3, vocabulary=vocabulary)
    params.representation["term_weights"] = np.random.default_rng(5).normal(size=len(vocabulary))
    return params


@pytest.fixture
def sentiment_params(vocabulary):
    return nets.init_parameters(SENTIMENT, SMALL_DIMS, seed=3, vocabulary=vocabulary)


def make_ranking_sets(vocabulary, n_weak=80, n_full=12, seed=0):
    rng = np.random.default_rng(seed)
    weak = []
    for _ in range(n_weak):
        inst = RankInstance(_ids(rng, vocabulary, 2), _ids(rng, vocabulary, 4), _ids(rng, vocabulary, 3))
        weak.append(WeakItem(inst, np.array([rng.uniform()])))
    full = []
    for _ in range(n_full):
        inst = RankInstance(_ids(rng, vocabulary, 2), _ids(rng, vocabulary, 4), _ids(rng, vocabulary, 3))
        y_weak = rng.uniform()
        y = float(rng.integers(0, 2))
        full.append(TrueItem(inst, np.array([y_weak]), np.array([y]), confidence_target_rank(y, y_weak)))
    return LabeledSets(weak, full)


def make_sentiment_sets(vocabulary, n_weak=80, n_full=12, seed=0):
    rng = np.random.default_rng(seed)
    weak = []
    for _ in range(n_weak):
        weak.append(WeakItem(SentenceInstance(_ids(rng, vocabulary, 5)), rng.dirichlet(np.ones(3))))
    full = []
    for _ in range(n_full):
        y_weak = rng.dirichlet(np.ones(3))
        y = one_hot(int(rng.integers(0, 3)))
        full.append(TrueItem(SentenceInstance(_ids(rng, vocabulary, 5)), y_weak, y, confidence_target_class(y, y_weak)))
    return LabeledSets(weak, full)


@pytest.fixture
def ranking_sets(vocabulary):
    return make_ranking_sets(vocabulary)


@pytest.fixture
def sentiment_sets(vocabulary):
    return make_sentiment_sets(vocabulary)


@pytest.fixture
def small_config():
    """Fast deterministic settings: dropout off, tiny batches."""
    return TrainConfig(
        strategy="CWS_JT",
        lr=0.01,
        batch_weak=4,
        batch_full=4,
        ratio_full_to_weak=(1, 10),
        max_weak_batches=20,
        checkpoint_every=5,
        dropout=0.0,
        supervised_batches=6,
        seed=11,
    )


SMALL_NETWORK = {
    "embedding_dim": 4,
    "filter_count": 3,
    "window": 2,
    "supervision_hidden": [5],
    "confidence_hidden": [6],
}

SMALL_TRAIN = {
    "batch_weak": 16,
    "batch_full": 8,
    "max_weak_batches": 4,
    "checkpoint_every": 2,
    "supervised_batches": 4,
    "dropout": 0.0,
    "lr": 0.01,
}

SMALL_SYNTHETIC = {
    "sentiment": {"num_sentences": 200, "labeled_sentences": 80, "train_labeled": 30},
    "ranking": {
        "num_queries": 16,
        "labeled_queries": 4,
        "test_queries": 4,
        "relevant_per_query": 2,
        "distractors_per_query": 2,
        "background_docs": 30,
    },
}


def write_manifest(directory, task="sentiment", **fields):
    """Small synthetic manifest in ``directory``; keyword arguments replace top-level keys."""
    manifest = {
        "task": task,
        "synthetic": dict(SMALL_SYNTHETIC[task]),
        "strategies": ["WA", "WSO", "CWS_JT"],
        "seeds": [0, 1],
        "train": dict(SMALL_TRAIN),
        "network": dict(SMALL_NETWORK),
        "out_dir": "out",
    }
    if task == "ranking":
        manifest["evaluation"] = {"eval_depth": 20, "rerank_pool": 8}
    manifest.update(fields)
    path = directory / "manifest.yaml"
    path.write_text(yaml.safe_dump(manifest, sort_keys=False), encoding="utf-8")
    return path
