# -*- coding: utf-8 -*-
import logging
from typing import Optional, Tuple

from ..errors import ConfigError
from ..networks import ModelParameters
from ..training import Evaluators, LabeledSets, TrainConfig, TrainResult

logger = logging.getLogger(__name__)


class TrainingStrategy:
    """
    One training strategy: an ordered sequence of phases over sets U and V.

    Subclasses list their phases in ``PHASES`` (for logs and reports) and implement
    ``run``. Parameters are updated in place and returned inside the TrainResult.
    ``READS_WEAK`` and ``READS_TRUE`` declare which sets the phases touch;
    ``admit`` enforces them before ``run`` is called.
    """

    PHASES: Tuple[str, ...] = ()
    READS_WEAK: bool = True
    READS_TRUE: bool = False

    def admit(self, sets: LabeledSets, config: TrainConfig) -> LabeledSets:
        """Check the sets this strategy reads and hide U from strategies that must not see it."""
        if self.READS_TRUE and not sets.V:
            raise ConfigError(f"strategy {config.strategy} reads true labels but set V is empty")
        if not self.READS_WEAK:
            return sets.true_only()
        if not sets.U:
            raise ConfigError(f"strategy {config.strategy} reads weak labels but set U is empty")
        return sets

    def run(
        self,
        params: ModelParameters,
        sets: LabeledSets,
        config: TrainConfig,
        evaluators: Optional[Evaluators] = None,
    ) -> TrainResult:
        raise NotImplementedError

    def _announce(self, config: TrainConfig, phase: int) -> None:
        name = self.PHASES[phase] if phase < len(self.PHASES) else f"phase {phase}"
        logger.info("[%s] %s (seed %d)", config.strategy, name, config.seed)

    @staticmethod
    def _last_batch(result: TrainResult) -> int:
        return result.curves[-1].weak_batch if result.curves else 0
