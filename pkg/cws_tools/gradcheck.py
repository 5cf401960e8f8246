# -*- coding: utf-8 -*-
"""Finite-difference verification of every layer type and of both composed networks."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import networks as nets
from .errors import ConfigError
from .networks import CONFIDENCE, RANKING, REPRESENTATION, SENTIMENT, SUPERVISION, NetworkDims, RankInstance, SentenceInstance
from .node_resources import tensor_core as tc
from .node_resources.vocabulary import Vocabulary

logger = logging.getLogger(__name__)

TOLERANCE = 1e-4
PERTURBATION = 1e-4
DRAWS = 20
# pre-activations and max-pool gaps must clear this many units (ten steps)
KINK_MARGIN = 10 * PERTURBATION
MAX_ATTEMPTS = 50


@dataclass
class GradCheckReport:
    tolerance: float = TOLERANCE
    draws: int = DRAWS
    # (check, parameter) -> max relative error over all draws
    errors: Dict[Tuple[str, str], float] = field(default_factory=dict)
    # draws thrown away because they sat on a relu or max-pool kink
    rejected: Dict[str, int] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(err < self.tolerance for err in self.errors.values())

    @property
    def failures(self) -> List[Tuple[str, str]]:
        return [key for key, err in self.errors.items() if err >= self.tolerance]

    def worst(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    def record(self, check: str, errors: Dict[str, float]) -> None:
        for name, err in errors.items():
            key = (check, name)
            self.errors[key] = max(self.errors.get(key, 0.0), err)

    def lines(self) -> List[str]:
        out = []
        for (check, name), err in self.errors.items():
            status = "ok" if err < self.tolerance else "FAIL"
            out.append(f"{check:<28} {name:<22} {err:.3e} {status}")
        return out


@dataclass
class Draw:
    """One random parameter draw: the loss closure, the arrays it reads, and its kink distance."""

    closure: Callable
    params: tc.Params
    kink_margin: Callable[[], float] = lambda: np.inf


Check = Callable[[np.random.Generator, bool], Draw]


def _relu_margin(z: np.ndarray) -> float:
    z = np.asarray(z)
    return float(np.min(np.abs(z))) if z.size else np.inf


def _pool_margin(features: np.ndarray) -> float:
    """Distance of conv features (f, p) from a relu kink or from a tie for the pooled maximum."""
    margin = _relu_margin(features)
    if features.shape[1] > 1:
        ranked = np.sort(np.maximum(features, 0.0), axis=1)
        live = ranked[:, -1] > 0
        if np.any(live):
            margin = min(margin, float(np.min(ranked[live, -1] - ranked[live, -2])))
    return margin


def _stack_margin(group: tc.Params, activations: Sequence[str], x: np.ndarray) -> float:
    _, caches = nets.stack_forward(group, activations, x, tc.EVAL, None, 0.0)
    margins = [_relu_margin(cache[1]) for (cache, _), act in zip(caches, activations) if act == "relu"]
    return min(margins, default=np.inf)


def _random_direction(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.normal(size=shape)


def _dense_check(activation: str) -> Check:
    def build(rng: np.random.Generator, fault: bool) -> Draw:
        params = {"weight": rng.normal(scale=0.5, size=(4, 5)), "bias": rng.normal(scale=0.1, size=4), "x": rng.normal(size=(3, 5))}
        direction = _random_direction(rng, (3, 4))

        def closure():
            layer = tc.DenseLayer(params["weight"], params["bias"], activation)
            out, cache = tc.dense_forward(layer, params["x"])
            grad_x, grad_w, grad_b = tc.dense_backward(layer, cache, direction)
            if fault:
                grad_w = 2.0 * grad_w
            return float(np.sum(out * direction)), {"weight": grad_w, "bias": grad_b, "x": grad_x}

        def margin():
            if activation != "relu":
                return np.inf
            return _relu_margin(params["x"] @ params["weight"].T + params["bias"])

        return Draw(closure, params, margin)

    return build


def _composition_check(rng: np.random.Generator, fault: bool) -> Draw:
    params = {"embeddings": rng.normal(size=(10, 4)), "term_weights": rng.normal(size=10)}
    tokens = np.array([2, 3, 3, 5, 9])
    direction = _random_direction(rng, 4)

    def closure():
        table = tc.EmbeddingTable(params["embeddings"])
        embeds = tc.embedding_lookup(table, tokens)
        out, cache = tc.composition_forward(embeds, params["term_weights"][tokens])
        grad_embeds, grad_weights = tc.composition_backward(cache, direction)
        grads = {k: np.zeros_like(v) for k, v in params.items()}
        tc.embedding_backward(grad_embeds, tokens, grads["embeddings"])
        np.add.at(grads["term_weights"], tokens, grad_weights)
        return float(out @ direction), grads

    return Draw(closure, params)


def _conv_check(rng: np.random.Generator, fault: bool) -> Draw:
    params = {"filters": rng.normal(size=(3, 4, 2)), "bias": rng.normal(scale=0.1, size=3), "sentence": rng.normal(size=(4, 6))}
    direction = _random_direction(rng, 3)

    def forward():
        bank = tc.ConvBank(params["filters"], params["bias"])
        return bank, tc.conv_forward(bank, params["sentence"])

    def closure():
        bank, (pooled, cache) = forward()
        grad_sentence, grad_filters, grad_bias = tc.conv_backward(bank, cache, direction)
        return float(pooled @ direction), {"filters": grad_filters, "bias": grad_bias, "sentence": grad_sentence}

    def margin():
        _, (_, cache) = forward()
        return _pool_margin(cache[2])

    return Draw(closure, params, margin)


def _dropout_check(rng: np.random.Generator, fault: bool) -> Draw:
    params = {"x": rng.normal(size=(3, 6))}
    direction = _random_direction(rng, (3, 6))

    def closure():
        # same mask on every call
        out, mask = tc.dropout_forward(params["x"], 0.4, tc.TRAIN, np.random.default_rng(11))
        return float(np.sum(out * direction)), {"x": tc.dropout_backward(direction, mask)}

    return Draw(closure, params)


def _loss_check(kind: str) -> Check:
    def build(rng: np.random.Generator, fault: bool) -> Draw:
        if kind == "bce":
            params = {"logits": rng.normal(size=5)}
            target = rng.uniform(size=5)

            def closure():
                p = tc.sigmoid(params["logits"])
                return float(np.sum(tc.binary_cross_entropy(target, p))), {"logits": tc.bce_logit_grad(target, p)}

        else:
            params = {"logits": rng.normal(size=(2, 3))}
            target = rng.dirichlet(np.ones(3), size=2)

            def closure():
                p = tc.softmax(params["logits"])
                return float(np.sum(tc.categorical_cross_entropy(target, p))), {"logits": tc.cce_logit_grad(target, p)}

        return Draw(closure, params)

    return build


def _small_network(task: str, rng: np.random.Generator):
    dims = NetworkDims(embedding_dim=4, filter_count=3, window=2, supervision_hidden=(5,), confidence_hidden=(6,))
    vocabulary = Vocabulary.build([[f"w{i}" for i in range(12)]])
    params = nets.init_parameters(task, dims, seed=int(rng.integers(0, 2**31)), vocabulary=vocabulary)
    # biases start at zero; draw them so no unit sits on its relu kink by construction
    for group in (params.representation, params.supervision, params.confidence):
        for name in group:
            if name.endswith("bias"):
                group[name] = rng.normal(scale=0.1, size=group[name].shape)
    ids = np.arange(2, len(vocabulary))
    if task == RANKING:
        params.representation["term_weights"] = rng.normal(size=len(vocabulary))
        instances = [
            RankInstance(tuple(rng.choice(ids, 2)), tuple(rng.choice(ids, 4)), tuple(rng.choice(ids, 3)))
            for _ in range(3)
        ]
        targets = rng.uniform(size=(3, 1))
        weak = rng.uniform(size=(3, 1))
    else:
        instances = [SentenceInstance(tuple(rng.choice(ids, 5))) for _ in range(3)]
        targets = rng.dirichlet(np.ones(3), size=3)
        weak = rng.dirichlet(np.ones(3), size=3)
    return params, instances, targets, weak


def _network_margin(
    params: nets.ModelParameters,
    rep_group: str,
    instances,
    stack: tc.Params,
    activations: Sequence[str],
    labels: Optional[np.ndarray] = None,
) -> float:
    x, rep_caches = nets.represent_batch(params, rep_group, instances, tc.EVAL, None)
    margins = []
    if params.task == SENTIMENT:
        # sentence cache: (ids, bank, conv cache, mask); conv cache holds the features third
        margins.extend(_pool_margin(cache[2][2]) for cache in rep_caches)
    if labels is not None:
        x = np.hstack([x, labels])
    margins.append(_stack_margin(stack, activations, x))
    return min(margins)


def _target_check(task: str, group: str) -> Check:
    def build(rng: np.random.Generator, fault: bool) -> Draw:
        params, instances, targets, _ = _small_network(task, rng)
        weights = rng.uniform(size=len(instances))

        def closure():
            grads, losses = nets.target_gradients(params, instances, targets, weights, tc.EVAL, None)
            return float(np.sum(weights * losses) / len(instances)), grads[group]

        def margin():
            return _network_margin(params, REPRESENTATION, instances, params.supervision, params.supervision_activations)

        return Draw(closure, params.group(group), margin)

    return build


def _confidence_check(task: str, group: str) -> Check:
    def build(rng: np.random.Generator, fault: bool) -> Draw:
        params, instances, _, weak = _small_network(task, rng)
        confidence_targets = rng.uniform(size=len(instances))

        def closure():
            grads, losses, _ = nets.confidence_gradients(params, instances, weak, confidence_targets, tc.EVAL, None)
            return float(np.mean(losses)), grads[group]

        def margin():
            return _network_margin(
                params, params.confidence_input_group(), instances, params.confidence, params.confidence_activations, weak
            )

        return Draw(closure, params.group(group), margin)

    return build


CHECKS: Dict[str, Check] = {
    "dense/relu": _dense_check("relu"),
    "dense/sigmoid": _dense_check("sigmoid"),
    "dense/softmax": _dense_check("softmax"),
    "dense/identity": _dense_check("identity"),
    "embedding+composition": _composition_check,
    "conv+maxpool": _conv_check,
    "dropout": _dropout_check,
    "loss/bce+sigmoid": _loss_check("bce"),
    "loss/cce+softmax": _loss_check("cce"),
}
for _task in (RANKING, SENTIMENT):
    for _group in (REPRESENTATION, SUPERVISION):
        CHECKS[f"{_task}/target/{_group}"] = _target_check(_task, _group)
    for _group in (REPRESENTATION, CONFIDENCE):
        CHECKS[f"{_task}/confidence/{_group}"] = _confidence_check(_task, _group)

FAULT_TARGET = "dense/relu"


def _smooth_draw(name: str, build: Check, rng: np.random.Generator, fault: bool, report: GradCheckReport) -> Draw:
    """Draw until every kink is at least ``KINK_MARGIN`` away; the last attempt is kept regardless."""
    for _ in range(MAX_ATTEMPTS - 1):
        draw = build(rng, fault)
        if draw.kink_margin() >= KINK_MARGIN:
            return draw
        report.rejected[name] = report.rejected.get(name, 0) + 1
    logger.warning("%s: no kink-free draw in %d attempts, checking the last one", name, MAX_ATTEMPTS)
    return build(rng, fault)


def run_gradcheck(
    inject_fault: bool = False,
    seed: int = 0,
    tolerance: float = TOLERANCE,
    draws: int = DRAWS,
    checks: Optional[Sequence[str]] = None,
) -> GradCheckReport:
    """
    Run registered checks over random parameter draws and collect per-parameter max relative errors.

    Args:
        inject_fault: Double the weight gradient of one dense check (the report must fail)
        seed: Seed for the random inputs of every check
        tolerance: Pass threshold on the relative error
        draws: Random parameter draws per check
        checks: Names from ``CHECKS`` to run (all when omitted)
    """
    if draws < 1:
        raise ConfigError(f"draws must be at least 1, got {draws}")
    names = list(CHECKS) if checks is None else list(checks)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown gradient checks: {', '.join(unknown)}")
    report = GradCheckReport(tolerance=tolerance, draws=draws)
    # one child per registered check, so a subset sees the same draws as a full run
    children = dict(zip(CHECKS, np.random.SeedSequence(seed).spawn(len(CHECKS))))
    for name in names:
        rng = np.random.default_rng(children[name])
        fault = inject_fault and name == FAULT_TARGET
        for _ in range(draws):
            draw = _smooth_draw(name, CHECKS[name], rng, fault, report)
            errors = tc.grad_check_detailed(draw.closure, draw.params, perturbation=PERTURBATION)
            report.record(name, errors)
        logger.debug(
            "%s: max error %.3e over %d draws (%d rejected)",
            name,
            max(v for (c, _), v in report.errors.items() if c == name),
            draws,
            report.rejected.get(name, 0),
        )
    logger.info("gradcheck: %d arrays checked, worst relative error %.3e", len(report.errors), report.worst())
    return report
