# -*- coding: utf-8 -*-
"""NLI baseline: learn a mapping from weak labels to corrected labels on V, relabel U, train on it.

The generator reads the (frozen) representation of an instance together with its weak
label and predicts a correction in logit space:

    new = sigmoid(logit(y_weak) + g(rep, y_weak))      ranking
    new = softmax(log(y_weak) + g(rep, y_weak))        sentiment

so a generator whose output layer is zero maps every weak label to itself.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np

from .. import networks as nets
from ..errors import ConfigError, StateError
from ..networks import REPRESENTATION, RANKING, Instance, ModelParameters
from ..node_resources import tensor_core as tc
from ..training import (
    Evaluators,
    LabeledSets,
    TrainConfig,
    TrainResult,
    TrueItem,
    WeakItem,
    phase_generators,
    sample_full_batch,
    train,
)
from .base import TrainingStrategy

logger = logging.getLogger(__name__)

GENERATOR_HIDDEN = (32,)
RELABEL_BATCH = 256


class LabelGenerator:
    """Residual label generator over a frozen snapshot of the representation layer."""

    def __init__(self, snapshot: ModelParameters, hidden: Sequence[int] = GENERATOR_HIDDEN, seed: int = 0):
        self.snapshot = snapshot
        self.task = snapshot.task
        self.label_width = snapshot.label_width
        widths = [snapshot.representation_width + self.label_width, *hidden, self.label_width]
        self.activations = ["relu"] * len(hidden) + ["identity"]
        rng = np.random.default_rng(seed)
        self.head: tc.Params = {}
        for i in range(len(widths) - 1):
            fan_in, fan_out = widths[i], widths[i + 1]
            last = i == len(widths) - 2
            self.head[f"layer{i}.weight"] = (
                np.zeros((fan_out, fan_in)) if last else tc.glorot_uniform(rng, (fan_out, fan_in), fan_in, fan_out)
            )
            self.head[f"layer{i}.bias"] = np.zeros(fan_out)
        self.optimizer = tc.AdamState()
        self.fitted = False

    @classmethod
    def identity(cls, params: ModelParameters) -> "LabelGenerator":
        """A fitted zero-capacity generator: relabels every instance with its own weak label."""
        generator = cls(params.copy(), hidden=())
        generator.fitted = True
        return generator

    def _base_logits(self, weak: np.ndarray) -> np.ndarray:
        clipped = np.clip(weak, tc.LOG_CLAMP, 1.0 - tc.LOG_CLAMP)
        if self.task == RANKING:
            return np.log(clipped) - np.log1p(-clipped)
        return np.log(clipped)

    def _forward(self, instances: Sequence[Instance], weak: np.ndarray, mode: str, rng):
        features, _ = nets.represent_batch(self.snapshot, REPRESENTATION, instances, tc.EVAL, None)
        correction, caches = nets.stack_forward(
            self.head, self.activations, np.hstack([features, weak]), mode, rng, self.snapshot.dropout
        )
        logits = self._base_logits(weak) + correction
        out = tc.sigmoid(logits) if self.task == RANKING else tc.softmax(logits, axis=-1)
        return out, caches

    def fit(self, V: Sequence[TrueItem], config: TrainConfig, phase: int = 0) -> "LabelGenerator":
        """Train the correction head on (representation, weak label) -> true label over V."""
        if not V:
            raise ConfigError("set V is empty")
        sample_rng, dropout_rng = phase_generators(config.seed, phase, 2)
        for step in range(1, config.supervised_batches + 1):
            batch = sample_full_batch(V, config.batch_full, sample_rng)
            instances = [item.instance for item in batch]
            weak = _labels(item.weak_label for item in batch)
            truth = _labels(item.true_label for item in batch)
            out, caches = self._forward(instances, weak, tc.TRAIN, dropout_rng)
            grads = nets.zero_grads(self.head)
            nets.stack_backward(self.head, self.activations, caches, (out - truth) / len(batch), grads)
            tc.adam_update(self.head, grads, self.optimizer, config.lr)
            if step % config.checkpoint_every == 0:
                logger.debug("label generator step %d: loss %.6f", step, float(np.mean(_task_loss(self.task, truth, out))))
        self.fitted = True
        return self

    def relabel(self, instances: Sequence[Instance], weak_labels) -> np.ndarray:
        """New labels, shape (B, K); ranking rows hold one probability, sentiment rows a distribution."""
        if not self.fitted:
            raise StateError("label generator has not been trained")
        weak = _labels(weak_labels)
        out, _ = self._forward(instances, weak, tc.EVAL, None)
        return out


def _labels(values) -> np.ndarray:
    return np.vstack([np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in values])


def _task_loss(task: str, truth: np.ndarray, out: np.ndarray) -> np.ndarray:
    if task == RANKING:
        return tc.binary_cross_entropy(truth[:, 0], out[:, 0])
    return tc.categorical_cross_entropy(truth, out)


def nli_generate_labels(generator: LabelGenerator, sets: LabeledSets) -> List[WeakItem]:
    """Set U with every weak label replaced by the generator's output (order kept)."""
    U = sets.U
    relabeled: List[WeakItem] = []
    for start in range(0, len(U), RELABEL_BATCH):
        chunk = U[start:start + RELABEL_BATCH]
        labels = generator.relabel([item.instance for item in chunk], [item.weak_label for item in chunk])
        relabeled.extend(WeakItem(item.instance, row) for item, row in zip(chunk, labels))
    return relabeled


class NeuralLabelInference(TrainingStrategy):
    """NLI: fit a label generator on V, relabel U, then train the target network on the new labels.

    The generator reads the representation of a copy of the target network that was first
    trained on U with plain weak supervision; the target network itself starts the final
    phase untouched, so its curve covers only training on the inferred labels.
    """

    PHASES = ("weak supervision warm-up", "label generator", "relabel U", "weak supervision on inferred labels")
    READS_TRUE = True

    def warm_up(self, params: ModelParameters, sets: LabeledSets, config: TrainConfig) -> ModelParameters:
        """A copy of ``params`` trained on U without weighting; ``params`` is left alone."""
        warmed = params.copy()
        train(warmed, sets, config, weighted=False, joint=False, phase=0)
        return warmed

    def run(self, params: ModelParameters, sets: LabeledSets, config: TrainConfig, evaluators: Optional[Evaluators] = None) -> TrainResult:
        self._announce(config, 0)
        snapshot = self.warm_up(params, sets, config)
        self._announce(config, 1)
        generator = LabelGenerator(snapshot, seed=config.seed).fit(sets.V, config, phase=1)
        self._announce(config, 2)
        relabeled = nli_generate_labels(generator, sets)
        self._announce(config, 3)
        return train(params, sets.with_weak(relabeled), config, evaluators, weighted=False, joint=False, phase=2)
