# -*- coding: utf-8 -*-
"""Controlled weak supervision: weak updates on U scaled by the confidence network."""

from typing import Optional

from ..networks import CONFIDENCE, CONFIDENCE_REPRESENTATION, ModelParameters
from ..training import Evaluators, LabeledSets, TrainConfig, TrainResult, train, train_confidence
from .base import TrainingStrategy


class JointTraining(TrainingStrategy):
    """CWS_JT: full and weak supervision modes alternate, sharing the representation layer."""

    PHASES = ("alternating full / weak supervision",)
    READS_TRUE = True

    def run(self, params: ModelParameters, sets: LabeledSets, config: TrainConfig, evaluators: Optional[Evaluators] = None) -> TrainResult:
        self._announce(config, 0)
        return train(params, sets, config, evaluators, weighted=True, joint=True)


class JointTrainingPlus(JointTraining):
    """CWS_JT+: as CWS_JT, and each full-mode batch also updates the target network on true labels."""


class SeparateTraining(TrainingStrategy):
    """CWS_ST: confidence network trained first on V with its own representation copy, then frozen."""

    PHASES = ("confidence network on V", "controlled weak supervision")
    READS_TRUE = True

    def run(self, params: ModelParameters, sets: LabeledSets, config: TrainConfig, evaluators: Optional[Evaluators] = None) -> TrainResult:
        self._announce(config, 0)
        params.detach_confidence_representation()
        result = train_confidence(params, sets.V, config, groups=(CONFIDENCE_REPRESENTATION, CONFIDENCE), phase=0)
        self._announce(config, 1)
        return result.extend(train(params, sets, config, evaluators, weighted=True, joint=False, phase=1))


class CircularTraining(TrainingStrategy):
    """CWS_CT: target on U, then confidence on V over the frozen representation, then target again under control."""

    PHASES = ("weak supervision", "confidence network on V", "controlled weak supervision")
    READS_TRUE = True

    def run(self, params: ModelParameters, sets: LabeledSets, config: TrainConfig, evaluators: Optional[Evaluators] = None) -> TrainResult:
        self._announce(config, 0)
        result = train(params, sets, config, evaluators, weighted=False, joint=False, phase=0)
        self._announce(config, 1)
        result.extend(train_confidence(params, sets.V, config, groups=(CONFIDENCE,), phase=1))
        self._announce(config, 2)
        controlled = train(
            params, sets, config, evaluators, weighted=True, joint=False, phase=2, curve_offset=self._last_batch(result)
        )
        return result.extend(controlled)
