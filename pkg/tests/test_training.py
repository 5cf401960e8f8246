# -*- coding: utf-8 -*-
import numpy as np
import pytest

from cws_tools import networks as nets
from cws_tools.errors import ConfigError, UnsupportedStrategyError
from cws_tools.networks import CONFIDENCE, REPRESENTATION, SUPERVISION
from cws_tools.node_resources import tensor_core as tc
from cws_tools.training import (
    FULL,
    WEAK,
    LabeledSets,
    TrainConfig,
    canonical_strategy,
    full_step,
    run_strategy,
    sample_full_batch,
    sample_weak_batch,
    train,
    train_confidence,
    train_supervised,
    weak_gradients,
    weak_step,
)

from conftest import make_ranking_sets, make_sentiment_sets


def _snapshot(params, name):
    return {k: v.copy() for k, v in params.group(name).items()}


def _assert_group_equal(params, name, snapshot):
    for key, value in snapshot.items():
        np.testing.assert_array_equal(params.group(name)[key], value)


def _group_changed(params, name, snapshot):
    return any(not np.array_equal(params.group(name)[k], v) for k, v in snapshot.items())


class TestConfig:
    def test_defaults_per_task(self):
        config = TrainConfig.defaults("sentiment")
        assert config.batch_weak == 64 and config.ratio_full_to_weak == (1, 10)
        assert TrainConfig.defaults("ranking", lr=0.5).lr == 0.5

    @pytest.mark.parametrize("written, key", [
        ("cws_jt+", "CWS_JT_PLUS"),
        ("CWS_JT+", "CWS_JT_PLUS"),
        ("WS+FT", "WS_FT"),
        ("ws+sft", "WS_SFT"),
        ("WS+RFT", "WS_RFT"),
        (" ws_ft ", "WS_FT"),
        ("wso", "WSO"),
        ("CWS_JT_PLUS", "CWS_JT_PLUS"),
    ])
    def test_strategy_aliases(self, written, key):
        assert canonical_strategy(written) == key
        assert TrainConfig(strategy=written).strategy == key

    def test_pretraining_strategy_is_unsupported(self):
        with pytest.raises(UnsupportedStrategyError):
            TrainConfig(strategy="CWS_PT")

    @pytest.mark.parametrize("overrides", [
        {"lr": 0.0},
        {"batch_weak": 0},
        {"ratio_full_to_weak": (0, 10)},
        {"alternation": "random"},
        {"dropout": 1.0},
        {"strategy": "MAGIC"},
    ])
    def test_invalid_values(self, overrides):
        with pytest.raises(ConfigError):
            TrainConfig(**overrides)

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            TrainConfig.defaults("ranking", momentum=0.9)


class TestSampling:
    def test_weak_batches_cover_u_once(self, sentiment_sets):
        U = sentiment_sets.U
        order = np.random.default_rng(0).permutation(len(U))
        seen, cursor = [], 0
        while True:
            batch, cursor = sample_weak_batch(U, cursor, 7, order)
            if batch is None:
                break
            seen.extend(id(item) for item in batch)
        assert len(seen) == len(U) == len(set(seen))

    def test_last_batch_is_short(self, sentiment_sets):
        batch, cursor = sample_weak_batch(sentiment_sets.U, 78, 7)
        assert len(batch) == 2 and cursor == 80

    def test_full_batches_draw_with_replacement(self, sentiment_sets):
        batch = sample_full_batch(sentiment_sets.V, 50, np.random.default_rng(0))
        assert len(batch) == 50
        with pytest.raises(ConfigError):
            sample_full_batch([], 4, np.random.default_rng(0))


class TestWeightedLoss:
    """The confidence weight scales each weak instance's gradient and nothing else."""

    @pytest.fixture(params=["ranking", "sentiment"])
    def case(self, request, ranking_params, sentiment_params, vocabulary):
        if request.param == "ranking":
            return ranking_params, make_ranking_sets(vocabulary, n_weak=6)
        return sentiment_params, make_sentiment_sets(vocabulary, n_weak=6)

    def test_unit_confidence_equals_plain_weak_supervision(self, case):
        params, sets = case
        batch = sets.U
        weighted, _, _ = weak_gradients(params, batch, np.random.default_rng(0), confidences=np.ones(len(batch)))
        plain, _, _ = weak_gradients(params, batch, np.random.default_rng(0), weighted=False)
        for group in (REPRESENTATION, SUPERVISION):
            for key in plain[group]:
                np.testing.assert_array_equal(weighted[group][key], plain[group][key])

    def test_zero_confidence_leaves_parameters_bit_identical(self, case):
        params, sets = case
        before = {g: _snapshot(params, g) for g in (REPRESENTATION, SUPERVISION)}
        grads, _, _ = weak_gradients(params, sets.U, np.random.default_rng(0), confidences=np.zeros(len(sets.U)))
        for group in (REPRESENTATION, SUPERVISION):
            tc.adam_update(params.group(group), grads[group], tc.AdamState(), lr=0.01)
            _assert_group_equal(params, group, before[group])

    def test_gradient_is_linear_in_confidence(self, case):
        params, sets = case
        rng = np.random.default_rng(4)
        n = len(sets.U)
        parts = [weak_gradients(params, sets.U, None, confidences=np.eye(n)[i])[0] for i in range(n)]
        for _ in range(200):
            c = rng.uniform(size=n)
            total, _, _ = weak_gradients(params, sets.U, None, confidences=c)
            for group in (REPRESENTATION, SUPERVISION):
                for key, value in total[group].items():
                    combined = sum(c[i] * parts[i][group][key] for i in range(len(c)))
                    np.testing.assert_allclose(value, combined, atol=1e-12)

    def test_weighted_step_uses_confidence_network(self, sentiment_params, sentiment_sets, small_config):
        report = weak_step(sentiment_params, sentiment_sets.U[:4], small_config, np.random.default_rng(0), weighted=True)
        assert report.mode == WEAK
        assert 0.0 <= report.mean_confidence <= 1.0
        assert report.loss_t <= report.loss_unweighted + 1e-12


class TestSteps:
    def test_full_step_touches_confidence_side_only(self, sentiment_params, sentiment_sets, small_config):
        sup = _snapshot(sentiment_params, SUPERVISION)
        conf = _snapshot(sentiment_params, CONFIDENCE)
        report = full_step(sentiment_params, sentiment_sets.V[:4], small_config, np.random.default_rng(0))
        assert report.mode == FULL and report.loss_c is not None
        _assert_group_equal(sentiment_params, SUPERVISION, sup)
        assert _group_changed(sentiment_params, CONFIDENCE, conf)

    def test_joint_plus_also_trains_supervision(self, sentiment_params, sentiment_sets, small_config):
        sup = _snapshot(sentiment_params, SUPERVISION)
        config = small_config.with_overrides(strategy="CWS_JT_PLUS")
        full_step(sentiment_params, sentiment_sets.V[:4], config, np.random.default_rng(0))
        assert _group_changed(sentiment_params, SUPERVISION, sup)


class TestSchedule:
    def test_deterministic_cycle_positions(self, sentiment_params, vocabulary, small_config):
        sets = make_sentiment_sets(vocabulary, n_weak=80)
        config = small_config.with_overrides(batch_weak=2, max_weak_batches=35, checkpoint_every=100)
        result = train(sentiment_params, sets, config)
        weak_seen, full_after = 0, []
        for report in result.reports:
            if report.mode == WEAK:
                weak_seen += 1
            else:
                full_after.append(weak_seen)
        assert weak_seen == 35
        assert full_after == [10, 20, 30]

    def test_ratio_two_to_five(self, sentiment_params, vocabulary, small_config):
        sets = make_sentiment_sets(vocabulary, n_weak=40)
        config = small_config.with_overrides(batch_weak=2, max_weak_batches=12, ratio_full_to_weak=(2, 5))
        modes = [r.mode for r in train(sentiment_params, sets, config).reports]
        assert modes.count(FULL) == 4

    def test_stochastic_alternation_is_seeded(self, vocabulary, sentiment_params, small_config):
        config = small_config.with_overrides(alternation="stochastic", ratio_full_to_weak=(1, 1))
        a = train(sentiment_params.copy(), make_sentiment_sets(vocabulary), config)
        b = train(sentiment_params.copy(), make_sentiment_sets(vocabulary), config)
        assert [r.mode for r in a.reports] == [r.mode for r in b.reports]
        assert FULL in [r.mode for r in a.reports]

    def test_stops_when_u_is_exhausted(self, sentiment_params, vocabulary, small_config):
        sets = make_sentiment_sets(vocabulary, n_weak=10)
        config = small_config.with_overrides(batch_weak=4, max_weak_batches=None)
        result = train(sentiment_params, sets, config)
        assert sum(r.mode == WEAK for r in result.reports) == 3

    def test_joint_training_needs_v(self, sentiment_params, vocabulary, small_config):
        sets = LabeledSets(make_sentiment_sets(vocabulary).U, [])
        with pytest.raises(ConfigError):
            train(sentiment_params, sets, small_config)


class TestCurves:
    def test_checkpoints_every_n_batches(self, sentiment_params, sentiment_sets, small_config):
        evaluators = {"test": lambda p: 0.5}
        result = train(sentiment_params, sentiment_sets, small_config, evaluators)
        assert [r.weak_batch for r in result.curves] == [5, 10, 15, 20]
        assert all(r.metric_test == 0.5 and r.split == "test" for r in result.curves)
        assert result.curves[0].loss_c is None
        assert result.curves[-1].loss_c is not None

    def test_unweighted_runs_have_no_confidence_loss(self, sentiment_params, sentiment_sets, small_config):
        config = small_config.with_overrides(strategy="WSO")
        result = train(sentiment_params, sentiment_sets, config)
        assert all(r.loss_c is None and r.split == "train" for r in result.curves)
        assert all(r.loss_t == pytest.approx(r.loss_wso) for r in result.curves)


class TestDeterminism:
    def test_same_seed_same_parameters(self, sentiment_params, vocabulary, small_config):
        config = small_config.with_overrides(dropout=0.2)
        a = run_strategy("CWS_JT", make_sentiment_sets(vocabulary), config, sentiment_params.copy())
        b = run_strategy("CWS_JT", make_sentiment_sets(vocabulary), config, sentiment_params.copy())
        for name in a.params.group_names():
            for key, value in a.params.group(name).items():
                np.testing.assert_array_equal(value, b.params.group(name)[key])


class TestFreezing:
    def test_supervision_only_fine_tuning(self, sentiment_params, sentiment_sets, small_config):
        rep = _snapshot(sentiment_params, REPRESENTATION)
        sup = _snapshot(sentiment_params, SUPERVISION)
        train_supervised(sentiment_params, sentiment_sets.V, small_config, groups=(SUPERVISION,))
        _assert_group_equal(sentiment_params, REPRESENTATION, rep)
        assert _group_changed(sentiment_params, SUPERVISION, sup)

    def test_representation_only_fine_tuning(self, ranking_params, ranking_sets, small_config):
        rep = _snapshot(ranking_params, REPRESENTATION)
        sup = _snapshot(ranking_params, SUPERVISION)
        train_supervised(ranking_params, ranking_sets.V, small_config, groups=(REPRESENTATION,))
        _assert_group_equal(ranking_params, SUPERVISION, sup)
        assert _group_changed(ranking_params, REPRESENTATION, rep)

    def test_confidence_head_only(self, sentiment_params, sentiment_sets, small_config):
        rep = _snapshot(sentiment_params, REPRESENTATION)
        train_confidence(sentiment_params, sentiment_sets.V, small_config, groups=(CONFIDENCE,))
        _assert_group_equal(sentiment_params, REPRESENTATION, rep)


class TestModeIsolation:
    def test_weak_step_never_touches_confidence(self, ranking_params, ranking_sets, small_config):
        conf = _snapshot(ranking_params, CONFIDENCE)
        for k in range(3):
            weak_step(ranking_params, ranking_sets.U[4 * k:4 * k + 4], small_config, np.random.default_rng(k))
        _assert_group_equal(ranking_params, CONFIDENCE, conf)

    def test_confidence_enters_only_through_its_scores(self, sentiment_params, sentiment_sets):
        batch = sentiment_sets.U[:6]
        perturbed = sentiment_params.copy()
        for key, value in perturbed.confidence.items():
            value += np.random.default_rng(1).normal(scale=0.3, size=value.shape)
        scores = nets.confidence_scores(
            perturbed, [i.instance for i in batch], np.vstack([i.weak_label for i in batch])
        )
        through_network, used, _ = weak_gradients(perturbed, batch, None)
        explicit, _, _ = weak_gradients(sentiment_params, batch, None, confidences=scores)
        np.testing.assert_array_equal(used, scores)
        for group in (REPRESENTATION, SUPERVISION):
            for key, value in explicit[group].items():
                np.testing.assert_array_equal(through_network[group][key], value)
