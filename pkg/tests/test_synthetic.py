# -*- coding: utf-8 -*-
import pytest

from cws_tools.data_io import TEST, TRAIN, UNLABELED
from cws_tools.errors import ConfigError
from cws_tools.node_resources.bm25 import Bm25Params
from cws_tools.synthetic import (
    RankingSynthSpec,
    SentimentSynthSpec,
    SyntheticSpec,
    bm25_pair_accuracy,
    gen_synth_ranking,
    gen_synth_sentiment,
    lexicon_accuracy,
)


def _ranking_spec(**overrides):
    values = dict(num_queries=24, labeled_queries=6, test_queries=6, background_docs=60, seed=3)
    values.update(overrides)
    return SyntheticSpec.defaults("ranking", **values)


def _sentiment_spec(**overrides):
    values = dict(num_sentences=300, labeled_sentences=100, train_labeled=40, seed=3)
    values.update(overrides)
    return SyntheticSpec.defaults("sentiment", **values)


class TestSpecs:
    def test_defaults_pick_the_task_class(self):
        assert isinstance(SyntheticSpec.defaults("ranking"), RankingSynthSpec)
        spec = SyntheticSpec.defaults("sentiment")
        assert isinstance(spec, SentimentSynthSpec)
        assert spec.num_sentences == 21200 and spec.train_labeled == 200

    @pytest.mark.parametrize("task, overrides", [
        ("ranking", {"noise_rate": 1.5}),
        ("ranking", {"labeled_queries": 100, "test_queries": 30}),
        ("ranking", {"topic_share": 0.2}),
        ("sentiment", {"train_labeled": 0}),
        ("sentiment", {"vocab_size": 100}),
        ("sentiment", {"colour": "red"}),
    ])
    def test_invalid(self, task, overrides):
        with pytest.raises(ConfigError):
            SyntheticSpec.defaults(task, **overrides)

    def test_unknown_task(self):
        with pytest.raises(ConfigError):
            SyntheticSpec.defaults("parsing")


class TestSyntheticRanking:
    def test_same_seed_same_corpus(self):
        a = gen_synth_ranking(_ranking_spec())
        b = gen_synth_ranking(_ranking_spec())
        assert a.documents == b.documents
        assert a.qrels.judgments == b.qrels.judgments
        assert a.queries != gen_synth_ranking(_ranking_spec(seed=4)).queries

    def test_split_sizes_and_judgments(self):
        spec = _ranking_spec()
        corpus = gen_synth_ranking(spec)
        assert len(corpus.split_ids(TRAIN)) == 6
        assert len(corpus.split_ids(TEST)) == 6
        assert len(corpus.split_ids(UNLABELED)) == 12
        n_docs = spec.num_queries * (spec.relevant_per_query + spec.distractors_per_query) + spec.background_docs
        assert len(corpus.documents) == n_docs
        for qid in corpus.queries:
            grades = list(corpus.qrels.grades(qid).values())
            assert grades.count(1) == spec.relevant_per_query
            assert grades.count(0) == spec.distractors_per_query

    def test_noise_makes_bm25_weaker(self):
        clean = gen_synth_ranking(_ranking_spec(noise_rate=0.0))
        noisy = gen_synth_ranking(_ranking_spec(noise_rate=0.6))
        clean_acc = bm25_pair_accuracy(clean, clean.index(), Bm25Params())
        noisy_acc = bm25_pair_accuracy(noisy, noisy.index(), Bm25Params())
        assert clean_acc > 0.9
        assert noisy_acc < clean_acc


class TestSyntheticSentiment:
    def test_pool_sizes(self):
        generated = gen_synth_sentiment(_sentiment_spec())
        corpus = generated.corpus
        assert (len(corpus.labeled), len(corpus.test), len(corpus.unlabeled)) == (40, 60, 200)
        assert all(r.label is None for r in corpus.unlabeled)
        assert len(generated.true_labels) == 300

    def test_clean_lexicon_is_exact(self):
        generated = gen_synth_sentiment(_sentiment_spec(noise_rate=0.0))
        records = generated.corpus.labeled + generated.corpus.test
        assert lexicon_accuracy(records, generated.lexicon, generated.true_labels) == 1.0

    def test_noisy_lexicon_is_weak(self):
        generated = gen_synth_sentiment(_sentiment_spec(noise_rate=0.5))
        records = generated.corpus.labeled + generated.corpus.test
        assert lexicon_accuracy(records, generated.lexicon, generated.true_labels) < 1.0

    def test_adversarial_lexicon_swaps_polarity(self):
        generated = gen_synth_sentiment(_sentiment_spec(noise_rate=1.0, adversarial=True))
        records = generated.corpus.labeled + generated.corpus.test
        assert lexicon_accuracy(records, generated.lexicon, generated.true_labels) < 0.6

    def test_deterministic(self):
        a = gen_synth_sentiment(_sentiment_spec())
        b = gen_synth_sentiment(_sentiment_spec())
        assert [r.tokens for r in a.corpus.unlabeled] == [r.tokens for r in b.corpus.unlabeled]
        assert a.true_labels == b.true_labels
