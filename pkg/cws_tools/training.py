# -*- coding: utf-8 -*-
"""Alternating full / weak supervision with confidence-weighted updates.

Weak mode: the confidence network scores each weakly labeled instance (eval mode,
no gradient), and the target network is updated on ``(1/b) * sum_i c_i * L_i``.
Full mode: the confidence network and the shared representation are updated on
the cross-entropy between predicted and target confidence over a batch of V.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from . import networks as nets
from .errors import ConfigError, StateError, UnsupportedStrategyError
from .networks import CONFIDENCE, REPRESENTATION, SUPERVISION, Instance, ModelParameters
from .node_resources import tensor_core as tc
from .node_resources.feature_tables import load_feature_table, overlay

logger = logging.getLogger(__name__)

STRATEGIES = (
    "WA",
    "WSO",
    "FSO",
    "WS_FT",
    "WS_SFT",
    "WS_RFT",
    "NLI",
    "CWS_JT",
    "CWS_JT_PLUS",
    "CWS_ST",
    "CWS_CT",
)
UNSUPPORTED_STRATEGIES = ("CWS_PT",)


def canonical_strategy(name: str) -> str:
    """
    Registry key for a strategy name as people write it.

    Examples:
        >>> canonical_strategy("ws+sft")
        'WS_SFT'
        >>> canonical_strategy("CWS_JT+")
        'CWS_JT_PLUS'
        >>> canonical_strategy(" wso ")
        'WSO'
    """
    key = str(name).strip().upper()
    if key.startswith("WS+"):
        key = "WS_" + key[3:]
    if key.endswith("+"):
        key = key[:-1] + "_PLUS"
    return key


ALTERNATION_MODES = ("deterministic-cycle", "stochastic")

WEAK = "weak"
FULL = "full"


@dataclass
class TrainConfig:
    """Hyperparameters for one training run; defaults from ``feature_lists/training.yaml``."""

    strategy: str = "CWS_JT"
    lr: float = 1e-3
    batch_weak: int = 64
    batch_full: int = 64
    ratio_full_to_weak: Tuple[int, int] = (1, 10)
    alternation: str = "deterministic-cycle"
    max_weak_batches: Optional[int] = None
    checkpoint_every: int = 50
    dropout: float = 0.0
    l2_weight: float = 0.0
    supervised_batches: int = 200
    seed: int = 0
    progress: bool = False

    def __post_init__(self):
        self.strategy = canonical_strategy(self.strategy)
        self.ratio_full_to_weak = tuple(int(x) for x in self.ratio_full_to_weak)
        if self.strategy in UNSUPPORTED_STRATEGIES:
            raise UnsupportedStrategyError(f"strategy '{self.strategy}' is not supported")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy '{self.strategy}', expected one of {STRATEGIES}")
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if self.batch_weak < 1 or self.batch_full < 1:
            raise ConfigError("batch sizes must be >= 1")
        if len(self.ratio_full_to_weak) != 2 or min(self.ratio_full_to_weak) < 1:
            raise ConfigError(f"ratio_full_to_weak must be two counts >= 1, got {self.ratio_full_to_weak}")
        if self.alternation not in ALTERNATION_MODES:
            raise ConfigError(f"alternation must be one of {ALTERNATION_MODES}, got '{self.alternation}'")
        if self.max_weak_batches is not None and self.max_weak_batches < 0:
            raise ConfigError("max_weak_batches must be >= 0")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be >= 1")
        if self.l2_weight < 0:
            raise ConfigError("l2_weight must be >= 0")
        if self.supervised_batches < 0:
            raise ConfigError("supervised_batches must be >= 0")
        tc.check_dropout_rate(self.dropout)

    @classmethod
    def defaults(cls, task: str, **overrides) -> "TrainConfig":
        table = load_feature_table("training", task)
        return cls(**overlay(table, overrides, "training"))

    def with_overrides(self, **overrides) -> "TrainConfig":
        values = dict(self.__dict__)
        values.update(overrides)
        return TrainConfig(**values)


@dataclass(frozen=True)
class WeakItem:
    instance: Instance
    weak_label: np.ndarray


@dataclass(frozen=True)
class TrueItem:
    instance: Instance
    weak_label: np.ndarray
    true_label: np.ndarray
    confidence_target: float

    def __post_init__(self):
        if not 0.0 <= self.confidence_target <= 1.0:
            raise ConfigError(f"confidence target {self.confidence_target} outside [0, 1]")


class LabeledSets:
    """Set U (weakly labeled) and set V (weak + true labels + confidence targets).

    Reads of U are counted so tests can assert that a strategy never touches it.
    """

    def __init__(self, weak: Sequence[WeakItem], full: Sequence[TrueItem], weak_visible: bool = True):
        self._weak = list(weak)
        self._full = list(full)
        self.weak_visible = weak_visible
        self.weak_reads = 0

    @property
    def U(self) -> List[WeakItem]:
        if not self.weak_visible:
            raise StateError("set U is hidden from this strategy")
        self.weak_reads += 1
        return self._weak

    @property
    def V(self) -> List[TrueItem]:
        return self._full

    def with_weak(self, weak: Sequence[WeakItem]) -> "LabeledSets":
        return LabeledSets(weak, self._full)

    def true_only(self) -> "LabeledSets":
        """The same V with U hidden; reading U raises StateError."""
        return LabeledSets([], self._full, weak_visible=False)


@dataclass
class TrainStepReport:
    mode: str
    batch_index: int
    loss_t: Optional[float] = None
    loss_c: Optional[float] = None
    mean_confidence: float = 1.0
    loss_unweighted: Optional[float] = None


@dataclass
class CurveRecord:
    weak_batch: int
    split: str
    loss_t: Optional[float]
    loss_c: Optional[float]
    loss_wso: Optional[float]
    metric_test: Optional[float]


@dataclass
class TrainResult:
    params: ModelParameters
    reports: List[TrainStepReport] = field(default_factory=list)
    curves: List[CurveRecord] = field(default_factory=list)

    def extend(self, other: "TrainResult") -> "TrainResult":
        self.params = other.params
        self.reports.extend(other.reports)
        self.curves.extend(other.curves)
        return self


Evaluators = Dict[str, Callable[[ModelParameters], float]]


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def phase_generators(seed: int, phase: int, count: int = 4) -> List[np.random.Generator]:
    """Independent generators for one training phase, reproducible per (seed, phase)."""
    children = np.random.SeedSequence([int(seed), int(phase)]).spawn(count)
    return [np.random.default_rng(c) for c in children]


def shuffled_order(size: int, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(size)


def sample_weak_batch(U: Sequence[WeakItem], cursor: int, batch_weak: int, order: Optional[np.ndarray] = None):
    """
    Next ``batch_weak`` items of U in epoch order, without replacement.

    Args:
        U: Weakly labeled items
        cursor: Position reached so far (0 <= cursor <= len(U))
        batch_weak: Batch size
        order: Permutation of U computed once per phase (identity when omitted)

    Returns:
        tuple: (list of items, new cursor), or (None, cursor) once U is exhausted
    """
    if not 0 <= cursor <= len(U):
        raise ConfigError(f"cursor {cursor} outside [0, {len(U)}]")
    if cursor >= len(U):
        return None, cursor
    end = min(cursor + batch_weak, len(U))
    idx = order[cursor:end] if order is not None else range(cursor, end)
    return [U[int(i)] for i in idx], end


def sample_full_batch(V: Sequence[TrueItem], batch_full: int, rng: np.random.Generator) -> List[TrueItem]:
    """Uniform draws from V with replacement."""
    if not V:
        raise ConfigError("set V is empty")
    picks = rng.integers(0, len(V), size=batch_full)
    return [V[int(i)] for i in picks]


# ---------------------------------------------------------------------------
# Steps
# ---------------------------------------------------------------------------


def _apply_updates(params: ModelParameters, grads: Dict[str, tc.Params], groups: Sequence[str], config: TrainConfig) -> None:
    for name in groups:
        group = params.group(name)
        g = grads[name]
        if config.l2_weight > 0:
            g = {k: v + config.l2_weight * group[k] for k, v in g.items()}
        tc.adam_update(group, g, params.optimizers[name], config.lr)


def _stack_labels(labels: Sequence[np.ndarray]) -> np.ndarray:
    return np.vstack([np.atleast_1d(np.asarray(y, dtype=np.float64)) for y in labels])


def weak_gradients(
    params: ModelParameters,
    batch: Sequence[WeakItem],
    rng: np.random.Generator,
    weighted: bool = True,
    confidences: Optional[np.ndarray] = None,
):
    """
    Pre-optimizer gradients of the (confidence-weighted) weak loss.

    Args:
        params: Model parameters
        batch: Items from U
        rng: Dropout generator
        weighted: Scale each instance by the confidence network output
        confidences: Explicit per-instance weights, overriding the confidence network

    Returns:
        tuple: (gradients for representation and supervision, confidences used, per-instance losses)
    """
    instances = [item.instance for item in batch]
    weak = _stack_labels([item.weak_label for item in batch])
    if confidences is None:
        confidences = nets.confidence_scores(params, instances, weak) if weighted else np.ones(len(batch))
    confidences = np.asarray(confidences, dtype=np.float64)
    grads, losses = nets.target_gradients(params, instances, weak, confidences, tc.TRAIN, rng)
    return grads, confidences, losses


def weak_step(
    params: ModelParameters,
    batch: Sequence[WeakItem],
    config: TrainConfig,
    rng: np.random.Generator,
    weighted: bool = True,
    batch_index: int = 0,
) -> TrainStepReport:
    """One weak-supervision update of the representation and supervision groups."""
    grads, confidences, losses = weak_gradients(params, batch, rng, weighted=weighted)
    _apply_updates(params, grads, (REPRESENTATION, SUPERVISION), config)
    return TrainStepReport(
        mode=WEAK,
        batch_index=batch_index,
        loss_t=float(np.mean(confidences * losses)),
        mean_confidence=float(np.mean(confidences)),
        loss_unweighted=float(np.mean(losses)),
    )


def supervised_step(
    params: ModelParameters,
    batch: Sequence[TrueItem],
    config: TrainConfig,
    rng: np.random.Generator,
    groups: Sequence[str] = (REPRESENTATION, SUPERVISION),
    batch_index: int = 0,
) -> TrainStepReport:
    """Unweighted true-label update of the target network (only ``groups`` change)."""
    instances = [item.instance for item in batch]
    targets = _stack_labels([item.true_label for item in batch])
    grads, losses = nets.target_gradients(params, instances, targets, np.ones(len(batch)), tc.TRAIN, rng)
    _apply_updates(params, grads, groups, config)
    loss = float(np.mean(losses))
    return TrainStepReport(mode=FULL, batch_index=batch_index, loss_t=loss, loss_unweighted=loss)


def full_step(
    params: ModelParameters,
    batch: Sequence[TrueItem],
    config: TrainConfig,
    rng: np.random.Generator,
    groups: Optional[Sequence[str]] = None,
    batch_index: int = 0,
) -> TrainStepReport:
    """
    One full-supervision update of the confidence network.

    Updates the confidence head and the representation it reads from (``groups``
    narrows this). Under CWS_JT_PLUS a second, unweighted true-label update of the
    target network follows on the same batch.
    """
    instances = [item.instance for item in batch]
    weak = _stack_labels([item.weak_label for item in batch])
    targets = np.array([item.confidence_target for item in batch], dtype=np.float64)
    grads, losses, predicted = nets.confidence_gradients(params, instances, weak, targets, tc.TRAIN, rng)
    if groups is None:
        groups = (params.confidence_input_group(), CONFIDENCE)
    _apply_updates(params, grads, groups, config)
    if config.strategy == "CWS_JT_PLUS":
        extra = supervised_step(params, batch, config, rng, batch_index=batch_index)
        logger.debug("true-label loss on full batch %d: %.6f", batch_index, extra.loss_t)
    return TrainStepReport(
        mode=FULL,
        batch_index=batch_index,
        loss_c=float(np.mean(losses)),
        mean_confidence=float(np.mean(predicted)),
    )


# ---------------------------------------------------------------------------
# Loops
# ---------------------------------------------------------------------------


class _CurveTracker:
    """Accumulates step losses between checkpoints and emits CurveRecords."""

    def __init__(self, evaluators: Optional[Evaluators], every: int, offset: int = 0):
        self.evaluators = evaluators or {}
        self.every = every
        self.offset = offset
        self.records: List[CurveRecord] = []
        self._weak: List[TrainStepReport] = []
        self._full: List[TrainStepReport] = []
        self.saw_full = False

    def add(self, report: TrainStepReport) -> None:
        if report.mode == FULL and report.loss_c is not None:
            self._full.append(report)
            self.saw_full = True
        else:
            self._weak.append(report)

    def checkpoint(self, params: ModelParameters, batch_count: int) -> None:
        loss_t = _mean([r.loss_t for r in self._weak])
        loss_wso = _mean([r.loss_unweighted for r in self._weak])
        loss_c = _mean([r.loss_c for r in self._full]) if self.saw_full else None
        splits = sorted(self.evaluators) or ["train"]
        for split in splits:
            fn = self.evaluators.get(split)
            metric = float(fn(params)) if fn is not None else None
            self.records.append(CurveRecord(self.offset + batch_count, split, loss_t, loss_c, loss_wso, metric))
        logger.info(
            "batch %d: loss_t=%s loss_c=%s %s",
            self.offset + batch_count,
            _fmt(loss_t),
            _fmt(loss_c),
            " ".join(f"{r.split}={_fmt(r.metric_test)}" for r in self.records[-len(splits):]),
        )
        self._weak, self._full = [], []


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    kept = [v for v in values if v is not None]
    return float(np.mean(kept)) if kept else None


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4f}"


def train(
    params: ModelParameters,
    sets: LabeledSets,
    config: TrainConfig,
    evaluators: Optional[Evaluators] = None,
    weighted: Optional[bool] = None,
    joint: Optional[bool] = None,
    phase: int = 0,
    curve_offset: int = 0,
) -> TrainResult:
    """
    Weak-supervision loop over U, optionally alternating with full-supervision steps.

    Args:
        params: Parameters, updated in place
        sets: Sets U and V
        config: Hyperparameters
        evaluators: split name -> metric function evaluated at each checkpoint
        weighted: Weight weak instances by confidence (default: CWS strategies)
        joint: Interleave full steps on V (default: CWS_JT and CWS_JT_PLUS)
        phase: Phase number, folded into the seed of every generator
        curve_offset: Added to the x-axis of emitted CurveRecords

    Returns:
        TrainResult: parameters, one report per step, learning-curve records
    """
    if weighted is None:
        weighted = config.strategy.startswith("CWS")
    if joint is None:
        joint = config.strategy in ("CWS_JT", "CWS_JT_PLUS")
    U = sets.U
    if not U:
        raise ConfigError("set U is empty")
    if joint and not sets.V:
        raise ConfigError(f"strategy {config.strategy} needs a non-empty set V")

    params.dropout = config.dropout
    shuffle_rng, dropout_rng, full_rng, alternation_rng = phase_generators(config.seed, phase)
    order = shuffled_order(len(U), shuffle_rng)
    ratio_full, ratio_weak = config.ratio_full_to_weak
    full_probability = ratio_full / (ratio_full + ratio_weak)
    limit = config.max_weak_batches
    total = -(-len(U) // config.batch_weak)
    if limit is not None:
        total = min(total, limit)

    tracker = _CurveTracker(evaluators, config.checkpoint_every, curve_offset)
    result = TrainResult(params)
    cursor, weak_count, full_count = 0, 0, 0
    with tqdm(total=total, desc=config.strategy, unit="batch", disable=not config.progress) as bar:
        while limit is None or weak_count < limit:
            if joint and config.alternation == "stochastic" and alternation_rng.random() < full_probability:
                full_count += 1
                report = full_step(params, sample_full_batch(sets.V, config.batch_full, full_rng), config, dropout_rng, batch_index=full_count)
                result.reports.append(report)
                tracker.add(report)
                continue
            batch, cursor = sample_weak_batch(U, cursor, config.batch_weak, order)
            if batch is None:
                break
            weak_count += 1
            report = weak_step(params, batch, config, dropout_rng, weighted=weighted, batch_index=weak_count)
            result.reports.append(report)
            tracker.add(report)
            bar.update(1)
            if joint and config.alternation == "deterministic-cycle" and weak_count % ratio_weak == 0:
                for _ in range(ratio_full):
                    full_count += 1
                    report = full_step(params, sample_full_batch(sets.V, config.batch_full, full_rng), config, dropout_rng, batch_index=full_count)
                    result.reports.append(report)
                    tracker.add(report)
            if weak_count % config.checkpoint_every == 0:
                tracker.checkpoint(params, weak_count)
    if weak_count % config.checkpoint_every != 0:
        tracker.checkpoint(params, weak_count)
    logger.info("%s: %d weak and %d full steps", config.strategy, weak_count, full_count)
    result.curves = tracker.records
    return result


def train_supervised(
    params: ModelParameters,
    V: Sequence[TrueItem],
    config: TrainConfig,
    groups: Sequence[str] = (REPRESENTATION, SUPERVISION),
    batches: Optional[int] = None,
    evaluators: Optional[Evaluators] = None,
    phase: int = 0,
    curve_offset: int = 0,
) -> TrainResult:
    """Plain supervised training of the target network on the true labels of V."""
    if not V:
        raise ConfigError("set V is empty")
    params.dropout = config.dropout
    batches = config.supervised_batches if batches is None else batches
    sample_rng, dropout_rng = phase_generators(config.seed, phase, 2)
    tracker = _CurveTracker(evaluators, config.checkpoint_every, curve_offset)
    result = TrainResult(params)
    for step in range(1, batches + 1):
        batch = sample_full_batch(V, config.batch_full, sample_rng)
        report = supervised_step(params, batch, config, dropout_rng, groups, batch_index=step)
        # plotted as a target-network loss
        report.mode = WEAK
        result.reports.append(report)
        tracker.add(report)
        if step % config.checkpoint_every == 0 or step == batches:
            tracker.checkpoint(params, step)
    result.curves = tracker.records
    return result


def train_confidence(
    params: ModelParameters,
    V: Sequence[TrueItem],
    config: TrainConfig,
    groups: Optional[Sequence[str]] = None,
    batches: Optional[int] = None,
    phase: int = 0,
) -> TrainResult:
    """Full-supervision steps only: fit the confidence network on V."""
    if not V:
        raise ConfigError("set V is empty")
    params.dropout = config.dropout
    batches = config.supervised_batches if batches is None else batches
    sample_rng, dropout_rng = phase_generators(config.seed, phase, 2)
    result = TrainResult(params)
    plain = config.with_overrides(strategy="CWS_JT") if config.strategy == "CWS_JT_PLUS" else config
    for step in range(1, batches + 1):
        batch = sample_full_batch(V, config.batch_full, sample_rng)
        result.reports.append(full_step(params, batch, plain, dropout_rng, groups=groups, batch_index=step))
    return result


def run_strategy(
    strategy: str,
    sets: LabeledSets,
    config: TrainConfig,
    params: ModelParameters,
    evaluators: Optional[Evaluators] = None,
) -> TrainResult:
    """Run the full phase sequence of one strategy (see ``cws_tools.strategies``)."""
    from .strategies import STRATEGY_CLASS_MAPPINGS

    name = canonical_strategy(strategy)
    if name in UNSUPPORTED_STRATEGIES:
        raise UnsupportedStrategyError(f"strategy '{name}' is not supported")
    if name not in STRATEGY_CLASS_MAPPINGS:
        raise ConfigError(f"unknown strategy '{strategy}'")
    config = config.with_overrides(strategy=name)
    strategy_obj = STRATEGY_CLASS_MAPPINGS[name]()
    return strategy_obj.run(params, strategy_obj.admit(sets, config), config, evaluators)
