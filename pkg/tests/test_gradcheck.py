# -*- coding: utf-8 -*-
import numpy as np
import pytest

from cws_tools import gradcheck
from cws_tools.errors import ConfigError
from cws_tools.gradcheck import CHECKS, DRAWS, PERTURBATION, run_gradcheck


class TestFullRun:
    def test_every_layer_passes_at_the_reference_step(self):
        assert PERTURBATION == 1e-4
        assert DRAWS == 20
        report = run_gradcheck(seed=0)
        assert report.draws == 20
        assert report.passed, report.failures
        assert report.worst() < 1e-4
        checked = {check for check, _ in report.errors}
        assert checked == set(CHECKS)

    @pytest.mark.parametrize("seed", [1, 7])
    def test_network_checks_pass_for_other_seeds(self, seed):
        names = [n for n in CHECKS if n.startswith(("ranking/", "sentiment/")) or n == "conv+maxpool"]
        report = run_gradcheck(seed=seed, checks=names)
        assert report.passed, report.failures


class TestDraws:
    def test_injected_fault_fails(self):
        report = run_gradcheck(inject_fault=True, draws=1, checks=["dense/relu"])
        assert ("dense/relu", "weight") in report.failures
        assert report.errors[("dense/relu", "weight")] > 1e-2

    def test_subset_sees_the_same_draws(self):
        alone = run_gradcheck(draws=3, checks=["conv+maxpool"])
        mixed = run_gradcheck(draws=3, checks=["dense/relu", "conv+maxpool"])
        for key, err in alone.errors.items():
            assert mixed.errors[key] == err

    def test_bad_arguments(self):
        with pytest.raises(ConfigError):
            run_gradcheck(checks=["dense/tanh"])
        with pytest.raises(ConfigError):
            run_gradcheck(draws=0)


class TestKinkMargin:
    def test_relu_margin(self):
        assert gradcheck._relu_margin(np.array([[0.5, -0.2], [0.03, 2.0]])) == pytest.approx(0.03)

    def test_pool_tie_is_a_kink(self):
        features = np.array([[0.40, 0.40005, -1.0], [-0.3, -0.5, -0.7]])
        assert gradcheck._pool_margin(features) == pytest.approx(5e-5)
        assert gradcheck._pool_margin(features) < gradcheck.KINK_MARGIN

    def test_dead_filter_only_counts_its_relu_distance(self):
        features = np.array([[-0.3, -0.5, -0.7]])
        assert gradcheck._pool_margin(features) == pytest.approx(0.3)

    def test_draws_near_a_kink_are_redrawn(self):
        calls = []

        def build(rng, fault):
            calls.append(1)
            margin = 0.0 if len(calls) < 3 else 1.0
            return gradcheck.Draw(lambda: (0.0, {}), {}, lambda: margin)

        report = gradcheck.GradCheckReport()
        draw = gradcheck._smooth_draw("x", build, np.random.default_rng(0), False, report)
        assert draw.kink_margin() == 1.0
        assert report.rejected == {"x": 2}
