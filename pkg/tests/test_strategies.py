# -*- coding: utf-8 -*-
import numpy as np
import pytest

from cws_tools.errors import ConfigError, StateError, UnsupportedStrategyError
from cws_tools.networks import CONFIDENCE, CONFIDENCE_REPRESENTATION, REPRESENTATION
from cws_tools.strategies import STRATEGY_CLASS_MAPPINGS, LabelGenerator, nli_generate_labels
from cws_tools.strategies.label_inference import NeuralLabelInference
from cws_tools.training import FULL, STRATEGIES, WEAK, LabeledSets, run_strategy, train_confidence

from conftest import make_ranking_sets, make_sentiment_sets


def test_every_strategy_has_a_class():
    assert set(STRATEGY_CLASS_MAPPINGS) == set(STRATEGIES)


def test_pretraining_variant_is_rejected(sentiment_params, sentiment_sets, small_config):
    with pytest.raises(UnsupportedStrategyError):
        run_strategy("CWS_PT", sentiment_sets, small_config, sentiment_params)
    with pytest.raises(ConfigError):
        run_strategy("BOGUS", sentiment_sets, small_config, sentiment_params)


@pytest.mark.parametrize("name", ["WA", "FSO"])
def test_strategies_that_never_read_u(name, sentiment_params, sentiment_sets, small_config):
    run_strategy(name, sentiment_sets, small_config, sentiment_params)
    assert sentiment_sets.weak_reads == 0


@pytest.mark.parametrize("name", sorted(n for n, cls in STRATEGY_CLASS_MAPPINGS.items() if cls.READS_TRUE))
def test_strategies_that_read_v_refuse_an_empty_v(name, vocabulary, sentiment_params, small_config):
    sets = LabeledSets(make_sentiment_sets(vocabulary).U, [])
    with pytest.raises(ConfigError, match="set V is empty"):
        run_strategy(name, sets, small_config, sentiment_params)


def test_strategies_that_read_u_refuse_an_empty_u(sentiment_params, sentiment_sets, small_config):
    with pytest.raises(ConfigError, match="set U is empty"):
        run_strategy("WSO", LabeledSets([], sentiment_sets.V), small_config, sentiment_params)
    assert run_strategy("WA", LabeledSets([], []), small_config, sentiment_params).reports == []


def test_u_is_hidden_from_full_supervision(sentiment_sets, small_config):
    admitted = STRATEGY_CLASS_MAPPINGS["FSO"]().admit(sentiment_sets, small_config.with_overrides(strategy="FSO"))
    assert admitted.V == sentiment_sets.V
    with pytest.raises(StateError):
        admitted.U
    assert STRATEGY_CLASS_MAPPINGS["WSO"]().admit(sentiment_sets, small_config) is sentiment_sets


def test_weak_annotator_leaves_parameters_alone(ranking_params, ranking_sets, small_config):
    before = ranking_params.copy()
    result = run_strategy("WA", ranking_sets, small_config, ranking_params)
    assert result.reports == []
    np.testing.assert_array_equal(result.params.supervision["layer0.weight"], before.supervision["layer0.weight"])


@pytest.mark.parametrize("name", sorted(set(STRATEGIES) - {"WA"}))
def test_every_strategy_trains(name, vocabulary, sentiment_params, small_config):
    sets = make_sentiment_sets(vocabulary, n_weak=24)
    result = run_strategy(name, sets, small_config.with_overrides(max_weak_batches=4, checkpoint_every=2), sentiment_params)
    assert result.reports
    assert result.curves
    assert all(np.isfinite(r.loss_t) for r in result.reports if r.loss_t is not None)


def test_weak_supervision_only_has_no_full_steps(sentiment_params, sentiment_sets, small_config):
    result = run_strategy("WSO", sentiment_sets, small_config, sentiment_params)
    assert {r.mode for r in result.reports} == {WEAK}
    assert all(r.mean_confidence == 1.0 for r in result.reports)


def test_fine_tuning_curve_continues_after_weak_phase(sentiment_params, sentiment_sets, small_config):
    result = run_strategy("WS_FT", sentiment_sets, small_config, sentiment_params)
    batches = [r.weak_batch for r in result.curves]
    assert batches == sorted(batches)
    assert batches[-1] == 20 + small_config.supervised_batches


class TestSeparateTraining:
    def test_confidence_side_matches_a_standalone_confidence_phase(self, sentiment_params, sentiment_sets, small_config):
        oracle = sentiment_params.copy()
        oracle.detach_confidence_representation()
        config = small_config.with_overrides(strategy="CWS_ST")
        train_confidence(oracle, sentiment_sets.V, config, groups=(CONFIDENCE_REPRESENTATION, CONFIDENCE), phase=0)

        result = run_strategy("CWS_ST", sentiment_sets, small_config, sentiment_params)
        for name in (CONFIDENCE_REPRESENTATION, CONFIDENCE):
            for key, value in oracle.group(name).items():
                np.testing.assert_array_equal(result.params.group(name)[key], value)

    def test_target_representation_untouched_by_confidence_phase(self, ranking_params, ranking_sets, small_config):
        before = ranking_params.representation["embeddings"].copy()
        result = run_strategy("CWS_ST", ranking_sets, small_config.with_overrides(max_weak_batches=0), ranking_params)
        np.testing.assert_array_equal(result.params.group(REPRESENTATION)["embeddings"], before)
        assert result.params.confidence_input_group() == CONFIDENCE_REPRESENTATION


class TestCircularTraining:
    def test_three_phases(self, sentiment_params, sentiment_sets, small_config):
        result = run_strategy("CWS_CT", sentiment_sets, small_config, sentiment_params)
        modes = [r.mode for r in result.reports]
        first_full = modes.index(FULL)
        assert set(modes[:first_full]) == {WEAK}
        assert modes.count(FULL) == small_config.supervised_batches
        assert modes[-1] == WEAK
        assert result.curves[-1].weak_batch == 40

    def test_confidence_phase_keeps_representation(self, sentiment_params, sentiment_sets, small_config):
        config = small_config.with_overrides(max_weak_batches=0, strategy="CWS_CT")
        before = sentiment_params.representation["conv_filters"].copy()
        run_strategy("CWS_CT", sentiment_sets, config, sentiment_params)
        np.testing.assert_array_equal(sentiment_params.representation["conv_filters"], before)


class TestLabelInference:
    @pytest.mark.parametrize("task", ["ranking", "sentiment"])
    def test_identity_generator_keeps_weak_labels(self, task, vocabulary, ranking_params, sentiment_params):
        params = ranking_params if task == "ranking" else sentiment_params
        sets = make_ranking_sets(vocabulary) if task == "ranking" else make_sentiment_sets(vocabulary)
        relabeled = nli_generate_labels(LabelGenerator.identity(params), sets)
        assert len(relabeled) == len(sets.U)
        for new, old in zip(relabeled, sets.U):
            assert new.instance is old.instance
            np.testing.assert_allclose(new.weak_label, old.weak_label, atol=1e-9)

    def test_untrained_generator_refuses(self, sentiment_params, sentiment_sets):
        generator = LabelGenerator(sentiment_params.copy())
        with pytest.raises(StateError):
            generator.relabel([sentiment_sets.V[0].instance], [sentiment_sets.V[0].weak_label])

    def test_fitted_generator_outputs_distributions(self, sentiment_params, sentiment_sets, small_config):
        generator = LabelGenerator(sentiment_params.copy(), seed=1).fit(sentiment_sets.V, small_config)
        items = sentiment_sets.V
        out = generator.relabel([i.instance for i in items], [i.weak_label for i in items])
        assert out.shape == (len(items), 3)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)

    def test_generator_leaves_model_parameters_alone(self, sentiment_params, sentiment_sets, small_config):
        before = sentiment_params.representation["embeddings"].copy()
        LabelGenerator(sentiment_params.copy()).fit(sentiment_sets.V, small_config)
        np.testing.assert_array_equal(sentiment_params.representation["embeddings"], before)

    def test_warm_up_trains_a_copy(self, sentiment_params, sentiment_sets, small_config):
        before = sentiment_params.copy()
        warmed = NeuralLabelInference().warm_up(sentiment_params, sentiment_sets, small_config.with_overrides(strategy="NLI"))
        for key, value in before.representation.items():
            np.testing.assert_array_equal(sentiment_params.representation[key], value)
        assert any(not np.array_equal(warmed.representation[k], v) for k, v in before.representation.items())
