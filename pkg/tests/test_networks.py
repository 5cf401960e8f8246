# -*- coding: utf-8 -*-
import numpy as np
import pytest

from cws_tools import networks as nets
from cws_tools.errors import ConfigError, DegenerateInputError, ShapeError
from cws_tools.networks import (
    CONFIDENCE,
    CONFIDENCE_REPRESENTATION,
    RANKING,
    REPRESENTATION,
    SENTIMENT,
    SUPERVISION,
    NetworkDims,
    RankInstance,
    SentenceInstance,
)
from cws_tools.node_resources import tensor_core as tc
from cws_tools.node_resources.bm25 import build_index, idf
from cws_tools.node_resources.vocabulary import PAD_INDEX, Vocabulary

from conftest import SMALL_DIMS


class TestInit:
    def test_same_seed_same_parameters(self, vocabulary):
        a = nets.init_parameters(SENTIMENT, SMALL_DIMS, seed=9, vocabulary=vocabulary)
        b = nets.init_parameters(SENTIMENT, SMALL_DIMS, seed=9, vocabulary=vocabulary)
        for name in a.group_names():
            for key in a.group(name):
                np.testing.assert_array_equal(a.group(name)[key], b.group(name)[key])

    def test_pad_row_is_zero(self, vocabulary):
        params = nets.init_parameters(RANKING, SMALL_DIMS, seed=1, vocabulary=vocabulary)
        assert np.all(params.representation["embeddings"][PAD_INDEX] == 0)

    def test_term_weights_from_idf(self):
        vocab = Vocabulary.build([["a", "b"]])
        index = build_index([("d1", ["a"]), ("d2", ["a", "b"])])
        params = nets.init_parameters(RANKING, SMALL_DIMS, seed=1, vocabulary=vocab, idf_index=index)
        assert params.representation["term_weights"][vocab.term_to_id["b"]] == idf(index, "b")

    def test_pretrained_embeddings(self, tmp_path):
        vocab = Vocabulary.build([["a", "b"]])
        path = tmp_path / "emb.txt"
        path.write_text("a 1 2 3 4\nzzz 0 0 0 0\n", encoding="utf-8")
        params = nets.init_parameters(SENTIMENT, SMALL_DIMS, seed=1, vocabulary=vocab, pretrained_embeddings=str(path))
        np.testing.assert_array_equal(params.representation["embeddings"][vocab.term_to_id["a"]], [1, 2, 3, 4])

    def test_dims_defaults_and_overrides(self):
        dims = NetworkDims.defaults(SENTIMENT, window=4)
        assert dims.window == 4 and dims.embedding_dim == 32
        with pytest.raises(ConfigError):
            NetworkDims.defaults(SENTIMENT, depth=3)
        with pytest.raises(ConfigError):
            nets.init_parameters("parsing", SMALL_DIMS, seed=0, vocabulary=Vocabulary())


class TestForward:
    def test_ranking_output_is_a_probability(self, ranking_params, ranking_sets):
        instances = [item.instance for item in ranking_sets.V]
        out = nets.predict(ranking_params, instances)
        assert out.shape == (len(instances),)
        assert np.all((out > 0) & (out < 1))

    def test_sentiment_output_is_a_distribution(self, sentiment_params, sentiment_sets):
        instances = [item.instance for item in sentiment_sets.V]
        out = nets.predict(sentiment_params, instances)
        assert out.shape == (len(instances), 3)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)

    def test_confidence_in_unit_interval(self, sentiment_params, sentiment_sets):
        items = sentiment_sets.V
        scores = nets.confidence_scores(sentiment_params, [i.instance for i in items], [i.weak_label for i in items])
        assert scores.shape == (len(items),)
        assert np.all((scores >= 0) & (scores <= 1))

    def test_short_sentence_is_padded(self, sentiment_params):
        vec = nets.sentence_representation(sentiment_params, SentenceInstance((5,)))
        assert vec.shape == (SMALL_DIMS.filter_count,)

    def test_confidence_label_width_checked(self, ranking_params, ranking_sets):
        rep = nets.rank_representation(ranking_params, ranking_sets.V[0].instance)
        with pytest.raises(ShapeError):
            nets.confidence_forward(ranking_params, rep, [0.2, 0.8])

    def test_empty_instances(self):
        with pytest.raises(DegenerateInputError):
            RankInstance((), (2,), (3,))
        with pytest.raises(DegenerateInputError):
            SentenceInstance(())


class TestGradients:
    def test_pad_row_never_trains(self, sentiment_params):
        batch = [SentenceInstance((2, 3)), SentenceInstance((4,))]
        targets = np.eye(3)[[0, 1]]
        grads, _ = nets.target_gradients(sentiment_params, batch, targets, np.ones(2), tc.EVAL, None)
        assert np.all(grads[REPRESENTATION]["embeddings"][PAD_INDEX] == 0)

    def test_target_gradients_cover_both_groups(self, ranking_params, ranking_sets):
        items = ranking_sets.V[:3]
        grads, losses = nets.target_gradients(
            ranking_params, [i.instance for i in items], [i.true_label for i in items], np.ones(3), tc.EVAL, None
        )
        assert set(grads) == {REPRESENTATION, SUPERVISION}
        assert losses.shape == (3,)

    def test_confidence_gradients_follow_the_input_group(self, sentiment_params, sentiment_sets):
        sentiment_params.detach_confidence_representation()
        items = sentiment_sets.V[:3]
        grads, _, predicted = nets.confidence_gradients(
            sentiment_params,
            [i.instance for i in items],
            [i.weak_label for i in items],
            [i.confidence_target for i in items],
            tc.EVAL,
            None,
        )
        assert set(grads) == {CONFIDENCE_REPRESENTATION, CONFIDENCE}
        assert predicted.shape == (3,)


class TestPersistence:
    def test_save_load_keeps_every_group(self, sentiment_params, tmp_path):
        sentiment_params.detach_confidence_representation()
        tc.adam_update(
            sentiment_params.supervision,
            {k: np.ones_like(v) for k, v in sentiment_params.supervision.items()},
            sentiment_params.optimizers[SUPERVISION],
            lr=0.01,
        )
        path = tmp_path / "params.npz"
        sentiment_params.save(str(path))
        loaded = nets.ModelParameters.load(str(path))
        assert loaded.task == SENTIMENT
        assert loaded.group_names() == sentiment_params.group_names()
        for name in loaded.group_names():
            for key, value in sentiment_params.group(name).items():
                np.testing.assert_array_equal(loaded.group(name)[key], value)
        assert loaded.optimizers[SUPERVISION].step == 1
        np.testing.assert_array_equal(
            loaded.optimizers[SUPERVISION].first_moment["layer0.bias"],
            sentiment_params.optimizers[SUPERVISION].first_moment["layer0.bias"],
        )

    def test_copy_is_deep(self, ranking_params):
        clone = ranking_params.copy()
        clone.representation["embeddings"] += 1.0
        assert not np.array_equal(clone.representation["embeddings"], ranking_params.representation["embeddings"])
