# -*- coding: utf-8 -*-
from typing import Optional

from ..networks import ModelParameters
from ..training import Evaluators, LabeledSets, TrainConfig, TrainResult, train
from .base import TrainingStrategy


class WeakAnnotator(TrainingStrategy):
    """WA: no training; the weak annotator itself is evaluated (BM25 order or lexicon argmax)."""

    PHASES = ()
    READS_WEAK = False

    def run(self, params: ModelParameters, sets: LabeledSets, config: TrainConfig, evaluators: Optional[Evaluators] = None) -> TrainResult:
        return TrainResult(params)


class WeakSupervisionOnly(TrainingStrategy):
    """WSO: the target network trained on U with every weak label trusted equally."""

    PHASES = ("weak supervision",)

    def run(self, params: ModelParameters, sets: LabeledSets, config: TrainConfig, evaluators: Optional[Evaluators] = None) -> TrainResult:
        self._announce(config, 0)
        return train(params, sets, config, evaluators, weighted=False, joint=False)
