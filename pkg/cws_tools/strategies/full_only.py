# -*- coding: utf-8 -*-
from typing import Optional

from ..networks import ModelParameters
from ..training import Evaluators, LabeledSets, TrainConfig, TrainResult, train_supervised
from .base import TrainingStrategy


class FullSupervisionOnly(TrainingStrategy):
    """FSO: the target network trained on the true labels of V alone. U is never read."""

    PHASES = ("full supervision",)
    READS_WEAK = False
    READS_TRUE = True

    def run(self, params: ModelParameters, sets: LabeledSets, config: TrainConfig, evaluators: Optional[Evaluators] = None) -> TrainResult:
        self._announce(config, 0)
        return train_supervised(params, sets.V, config, evaluators=evaluators)
