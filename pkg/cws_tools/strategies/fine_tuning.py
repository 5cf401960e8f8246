# -*- coding: utf-8 -*-
"""Weak pre-training on U followed by fine-tuning on the true labels of V."""

from typing import Optional, Tuple

from ..networks import REPRESENTATION, SUPERVISION, ModelParameters
from ..training import Evaluators, LabeledSets, TrainConfig, TrainResult, train, train_supervised
from .base import TrainingStrategy


class _WeakThenFineTune(TrainingStrategy):
    PHASES = ("weak supervision", "fine-tuning")
    READS_TRUE = True
    TUNED_GROUPS: Tuple[str, ...] = (REPRESENTATION, SUPERVISION)

    def run(self, params: ModelParameters, sets: LabeledSets, config: TrainConfig, evaluators: Optional[Evaluators] = None) -> TrainResult:
        self._announce(config, 0)
        result = train(params, sets, config, evaluators, weighted=False, joint=False, phase=0)
        self._announce(config, 1)
        tuned = train_supervised(
            params,
            sets.V,
            config,
            groups=self.TUNED_GROUPS,
            evaluators=evaluators,
            phase=1,
            curve_offset=self._last_batch(result),
        )
        return result.extend(tuned)


class WeakThenFineTuneAll(_WeakThenFineTune):
    """WS_FT: every target-network group is fine-tuned."""

    TUNED_GROUPS = (REPRESENTATION, SUPERVISION)


class WeakThenFineTuneSupervision(_WeakThenFineTune):
    """WS_SFT: the representation layer is kept fixed while fine-tuning."""

    TUNED_GROUPS = (SUPERVISION,)


class WeakThenFineTuneRepresentation(_WeakThenFineTune):
    """WS_RFT: the supervision layer is kept fixed while fine-tuning."""

    TUNED_GROUPS = (REPRESENTATION,)
