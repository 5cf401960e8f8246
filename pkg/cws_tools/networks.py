# -*- coding: utf-8 -*-
"""Target and confidence networks for the ranking and sentiment tasks.

Both networks sit on one representation learning layer:

* ranking: embeddings + per-term weights, composed into query / doc+ / doc- blocks;
* sentiment: embeddings + one convolution bank with max-over-time pooling.

The target network adds a supervision stack (relu hidden layers, sigmoid or
softmax output). The confidence network reads the representation concatenated
with the weak label and ends in a single sigmoid unit. Parameters are kept in
named groups so training strategies can update or freeze each one.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, DegenerateInputError, ShapeError, ValidationError
from .node_resources import tensor_core as tc
from .node_resources.bm25 import InvertedIndex, idf
from .node_resources.feature_tables import load_feature_table, overlay
from .node_resources.sentiment_lexicon import NUM_CLASSES
from .node_resources.vocabulary import PAD_INDEX, UNK_INDEX, Vocabulary

logger = logging.getLogger(__name__)

RANKING = "ranking"
SENTIMENT = "sentiment"
TASKS = (RANKING, SENTIMENT)

REPRESENTATION = "representation"
SUPERVISION = "supervision"
CONFIDENCE = "confidence"
CONFIDENCE_REPRESENTATION = "confidence_representation"


@dataclass(frozen=True)
class RankInstance:
    query: Tuple[int, ...]
    doc_pos: Tuple[int, ...]
    doc_neg: Tuple[int, ...]

    def __post_init__(self):
        if not self.query or not self.doc_pos or not self.doc_neg:
            raise DegenerateInputError("ranking instance needs a non-empty query and two non-empty documents")

    def swapped(self) -> "RankInstance":
        return RankInstance(self.query, self.doc_neg, self.doc_pos)


@dataclass(frozen=True)
class SentenceInstance:
    tokens: Tuple[int, ...]

    def __post_init__(self):
        if not self.tokens:
            raise DegenerateInputError("sentence instance needs at least one token")

    def padded(self, window: int, pad_index: int = PAD_INDEX) -> Tuple[int, ...]:
        if len(self.tokens) >= window:
            return self.tokens
        return self.tokens + (pad_index,) * (window - len(self.tokens))


Instance = Union[RankInstance, SentenceInstance]


@dataclass
class NetworkDims:
    """Layer sizes; defaults come from ``feature_lists/networks.yaml``."""

    embedding_dim: int = 32
    filter_count: int = 16
    window: int = 3
    supervision_hidden: Tuple[int, ...] = (32, 32)
    confidence_hidden: Tuple[int, ...] = (64, 64)
    embedding_init_scale: float = 0.05

    def __post_init__(self):
        self.supervision_hidden = tuple(int(w) for w in self.supervision_hidden)
        self.confidence_hidden = tuple(int(w) for w in self.confidence_hidden)
        if self.embedding_dim < 1 or self.filter_count < 1 or self.window < 1:
            raise ConfigError("embedding_dim, filter_count and window must all be >= 1")
        if any(w < 1 for w in self.supervision_hidden + self.confidence_hidden):
            raise ConfigError("hidden layer widths must be >= 1")

    @classmethod
    def defaults(cls, task: str, **overrides) -> "NetworkDims":
        table = load_feature_table("networks", task)
        table.setdefault("filter_count", cls.filter_count)
        table.setdefault("window", cls.window)
        return cls(**overlay(table, overrides, "network"))


# ---------------------------------------------------------------------------
# Parameter container
# ---------------------------------------------------------------------------


def _layer_key(i: int, part: str) -> str:
    return f"layer{i}.{part}"


@dataclass
class ModelParameters:
    """All trainable arrays, split into groups, plus one Adam state per group."""

    task: str
    representation: tc.Params
    supervision: tc.Params
    confidence: tc.Params
    supervision_activations: List[str]
    confidence_activations: List[str]
    optimizers: Dict[str, tc.AdamState] = field(default_factory=dict)
    confidence_representation: Optional[tc.Params] = None
    dropout: float = 0.0
    pad_index: int = PAD_INDEX
    unk_index: int = UNK_INDEX

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task '{self.task}'")
        for name in self.group_names():
            self.optimizers.setdefault(name, tc.AdamState())

    def group_names(self) -> List[str]:
        names = [REPRESENTATION, SUPERVISION, CONFIDENCE]
        if self.confidence_representation is not None:
            names.append(CONFIDENCE_REPRESENTATION)
        return names

    def group(self, name: str) -> tc.Params:
        if name == REPRESENTATION:
            return self.representation
        if name == SUPERVISION:
            return self.supervision
        if name == CONFIDENCE:
            return self.confidence
        if name == CONFIDENCE_REPRESENTATION and self.confidence_representation is not None:
            return self.confidence_representation
        raise ConfigError(f"no parameter group '{name}'")

    def confidence_input_group(self) -> str:
        """Representation group the confidence network reads from."""
        return REPRESENTATION if self.confidence_representation is None else CONFIDENCE_REPRESENTATION

    def detach_confidence_representation(self) -> None:
        """Give the confidence network a private copy of the representation layer."""
        self.confidence_representation = {k: v.copy() for k, v in self.representation.items()}
        self.optimizers[CONFIDENCE_REPRESENTATION] = tc.AdamState()

    @property
    def vocab_size(self) -> int:
        return int(self.representation["embeddings"].shape[0])

    @property
    def embedding_dim(self) -> int:
        return int(self.representation["embeddings"].shape[1])

    @property
    def window(self) -> int:
        return int(self.representation["conv_filters"].shape[2]) if self.task == SENTIMENT else 1

    @property
    def label_width(self) -> int:
        return 1 if self.task == RANKING else NUM_CLASSES

    @property
    def representation_width(self) -> int:
        if self.task == RANKING:
            return 3 * self.embedding_dim
        return int(self.representation["conv_filters"].shape[0])

    def copy(self) -> "ModelParameters":
        return ModelParameters(
            task=self.task,
            representation={k: v.copy() for k, v in self.representation.items()},
            supervision={k: v.copy() for k, v in self.supervision.items()},
            confidence={k: v.copy() for k, v in self.confidence.items()},
            supervision_activations=list(self.supervision_activations),
            confidence_activations=list(self.confidence_activations),
            optimizers={k: s.copy() for k, s in self.optimizers.items()},
            confidence_representation=(
                None
                if self.confidence_representation is None
                else {k: v.copy() for k, v in self.confidence_representation.items()}
            ),
            dropout=self.dropout,
            pad_index=self.pad_index,
            unk_index=self.unk_index,
        )

    def save(self, path: str) -> None:
        """Store every group, activation list and Adam state in one ``.npz`` file."""
        arrays: Dict[str, np.ndarray] = {}
        meta = {
            "task": self.task,
            "supervision_activations": self.supervision_activations,
            "confidence_activations": self.confidence_activations,
            "dropout": self.dropout,
            "pad_index": self.pad_index,
            "unk_index": self.unk_index,
            "groups": self.group_names(),
            "optimizers": {},
        }
        for name in self.group_names():
            for key, value in self.group(name).items():
                arrays[f"{name}/{key}"] = value
        for name, state in self.optimizers.items():
            meta["optimizers"][name] = {
                "step": state.step,
                "beta1": state.beta1,
                "beta2": state.beta2,
                "epsilon": state.epsilon,
            }
            for key, value in state.first_moment.items():
                arrays[f"adam_m/{name}/{key}"] = value
            for key, value in state.second_moment.items():
                arrays[f"adam_v/{name}/{key}"] = value
        arrays["__meta__"] = np.array(json.dumps(meta))
        with open(path, "wb") as f:
            np.savez(f, **arrays)

    @classmethod
    def load(cls, path: str) -> "ModelParameters":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["__meta__"]))
            groups: Dict[str, tc.Params] = {name: {} for name in meta["groups"]}
            moments: Dict[str, Dict[str, tc.Params]] = {}
            for full_key in data.files:
                if full_key == "__meta__":
                    continue
                parts = full_key.split("/")
                if parts[0] in ("adam_m", "adam_v"):
                    moments.setdefault(parts[1], {"adam_m": {}, "adam_v": {}})[parts[0]][parts[2]] = data[full_key].copy()
                else:
                    groups[parts[0]][parts[1]] = data[full_key].copy()
        optimizers = {}
        for name, info in meta["optimizers"].items():
            m = moments.get(name, {"adam_m": {}, "adam_v": {}})
            optimizers[name] = tc.AdamState(
                step=int(info["step"]),
                first_moment=m["adam_m"],
                second_moment=m["adam_v"],
                beta1=float(info["beta1"]),
                beta2=float(info["beta2"]),
                epsilon=float(info["epsilon"]),
            )
        return cls(
            task=meta["task"],
            representation=groups[REPRESENTATION],
            supervision=groups[SUPERVISION],
            confidence=groups[CONFIDENCE],
            supervision_activations=list(meta["supervision_activations"]),
            confidence_activations=list(meta["confidence_activations"]),
            optimizers=optimizers,
            confidence_representation=groups.get(CONFIDENCE_REPRESENTATION),
            dropout=float(meta["dropout"]),
            pad_index=int(meta["pad_index"]),
            unk_index=int(meta["unk_index"]),
        )


def dense_layers(group: tc.Params, activations: Sequence[str]) -> List[tc.DenseLayer]:
    """DenseLayer views over a group's arrays (no copies)."""
    return [
        tc.DenseLayer(group[_layer_key(i, "weight")], group[_layer_key(i, "bias")], act)
        for i, act in enumerate(activations)
    ]


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def load_embedding_file(path: str, dim: int) -> Dict[str, np.ndarray]:
    """Read ``word v1 ... vm`` lines into a dict; every row must have ``dim`` values."""
    vectors: Dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_number, raw in enumerate(f, start=1):
            parts = raw.rstrip("\n").split(" ")
            if not parts or not parts[0]:
                continue
            if len(parts) - 1 != dim:
                raise ValidationError(
                    f"{path}:{line_number}: embedding for '{parts[0]}' has {len(parts) - 1} values, expected {dim}"
                )
            try:
                vectors[parts[0]] = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError as e:
                raise ValidationError(f"{path}:{line_number}: {e}") from e
    return vectors


def _init_stack(rng: np.random.Generator, widths: Sequence[int], activations: Sequence[str]) -> tc.Params:
    group: tc.Params = {}
    for i, act in enumerate(activations):
        fan_in, fan_out = widths[i], widths[i + 1]
        group[_layer_key(i, "weight")] = tc.glorot_uniform(rng, (fan_out, fan_in), fan_in, fan_out)
        group[_layer_key(i, "bias")] = np.zeros(fan_out)
    return group


def init_parameters(
    task: str,
    dims: NetworkDims,
    seed: int,
    vocabulary: Vocabulary,
    pretrained_embeddings: Optional[str] = None,
    idf_index: Optional[InvertedIndex] = None,
    dropout: float = 0.0,
) -> ModelParameters:
    """
    Build fresh parameters for one task.

    Args:
        task: "ranking" or "sentiment"
        dims: Layer sizes
        seed: Seed for every random draw; same seed gives bit-identical parameters
        vocabulary: Vocabulary the token ids refer to
        pretrained_embeddings: Optional text embedding file (``word v1 ... vm``)
        idf_index: Optional index whose idf values initialize the term weights (ranking)
        dropout: Dropout rate used by train-mode forward passes

    Returns:
        ModelParameters: initialized groups with fresh Adam states
    """
    if task not in TASKS:
        raise ConfigError(f"unknown task '{task}', expected one of {TASKS}")
    tc.check_dropout_rate(dropout)
    rng = np.random.default_rng(seed)
    vocab_size, m = len(vocabulary), dims.embedding_dim

    embeddings = rng.uniform(-dims.embedding_init_scale, dims.embedding_init_scale, size=(vocab_size, m))
    if pretrained_embeddings:
        loaded = load_embedding_file(pretrained_embeddings, m)
        hits = 0
        for term, vector in loaded.items():
            term_id = vocabulary.term_to_id.get(term)
            if term_id is not None and term_id != PAD_INDEX:
                embeddings[term_id] = vector
                hits += 1
        logger.info("loaded %d of %d pretrained vectors into the vocabulary", hits, len(loaded))
    embeddings[PAD_INDEX] = 0.0

    representation: tc.Params = {"embeddings": embeddings}
    if task == RANKING:
        term_weights = np.zeros(vocab_size)
        if idf_index is not None:
            for term_id, term in enumerate(vocabulary.id_to_term):
                term_weights[term_id] = idf(idf_index, term)
        representation["term_weights"] = term_weights
        rep_width = 3 * m
        sup_out, sup_act = 1, "sigmoid"
    else:
        fan = m * dims.window
        representation["conv_filters"] = tc.glorot_uniform(rng, (dims.filter_count, m, dims.window), fan, fan)
        representation["conv_bias"] = np.zeros(dims.filter_count)
        rep_width = dims.filter_count
        sup_out, sup_act = NUM_CLASSES, "softmax"
    label_width = 1 if task == RANKING else NUM_CLASSES

    sup_widths = [rep_width, *dims.supervision_hidden, sup_out]
    sup_acts = ["relu"] * len(dims.supervision_hidden) + [sup_act]
    conf_widths = [rep_width + label_width, *dims.confidence_hidden, 1]
    conf_acts = ["relu"] * len(dims.confidence_hidden) + ["sigmoid"]

    return ModelParameters(
        task=task,
        representation=representation,
        supervision=_init_stack(rng, sup_widths, sup_acts),
        confidence=_init_stack(rng, conf_widths, conf_acts),
        supervision_activations=sup_acts,
        confidence_activations=conf_acts,
        dropout=dropout,
    )


# ---------------------------------------------------------------------------
# Representation layer
# ---------------------------------------------------------------------------


def _compose_block(rep: tc.Params, tokens: Sequence[int]):
    ids = np.asarray(tokens, dtype=np.int64)
    table = tc.EmbeddingTable(rep["embeddings"], unk_index=UNK_INDEX)
    embeds = tc.embedding_lookup(table, ids)
    out, cache = tc.composition_forward(embeds, rep["term_weights"][ids])
    return out, (ids, cache)


def _rank_forward(rep: tc.Params, instance: RankInstance):
    blocks, caches = [], []
    for tokens in (instance.query, instance.doc_pos, instance.doc_neg):
        out, cache = _compose_block(rep, tokens)
        blocks.append(out)
        caches.append(cache)
    return np.concatenate(blocks), caches


def _rank_backward(rep: tc.Params, caches, grad: np.ndarray, acc: tc.Params) -> None:
    m = rep["embeddings"].shape[1]
    for b, (ids, cache) in enumerate(caches):
        grad_embeds, grad_weights = tc.composition_backward(cache, grad[b * m:(b + 1) * m])
        tc.embedding_backward(grad_embeds, ids, acc["embeddings"])
        np.add.at(acc["term_weights"], ids, grad_weights)


def _sentence_forward(rep: tc.Params, instance: SentenceInstance, mode: str, rng, dropout: float):
    bank = tc.ConvBank(rep["conv_filters"], rep["conv_bias"])
    ids = np.asarray(instance.padded(bank.window), dtype=np.int64)
    table = tc.EmbeddingTable(rep["embeddings"], unk_index=UNK_INDEX)
    sentence = tc.embedding_lookup(table, ids)
    pooled, conv_cache = tc.conv_forward(bank, sentence)
    out, mask = tc.dropout_forward(pooled, dropout, mode, rng)
    return out, (ids, bank, conv_cache, mask)


def _sentence_backward(cache, grad: np.ndarray, acc: tc.Params) -> None:
    ids, bank, conv_cache, mask = cache
    grad_pooled = tc.dropout_backward(grad, mask)
    grad_sentence, grad_filters, grad_bias = tc.conv_backward(bank, conv_cache, grad_pooled)
    acc["conv_filters"] += grad_filters
    acc["conv_bias"] += grad_bias
    tc.embedding_backward(grad_sentence, ids, acc["embeddings"])


def represent(params: ModelParameters, group: str, instance: Instance, mode: str, rng):
    """Forward pass of the representation layer held in ``group``; returns (vector, cache)."""
    rep = params.group(group)
    if params.task == RANKING:
        return _rank_forward(rep, instance)
    return _sentence_forward(rep, instance, mode, rng, params.dropout)


def represent_backward(params: ModelParameters, cache, grad: np.ndarray, acc: tc.Params) -> None:
    """Accumulate representation gradients into ``acc``; the pad row never trains."""
    _represent_backward_group(params, params.representation, cache, grad, acc)


def rank_representation(params: ModelParameters, instance: RankInstance) -> np.ndarray:
    """Concatenated [query | doc+ | doc-] compositions, width 3m."""
    if params.task != RANKING:
        raise ConfigError("rank_representation needs ranking parameters")
    out, _ = _rank_forward(params.representation, instance)
    return out


def compose_text(params: ModelParameters, tokens: Sequence[int]) -> np.ndarray:
    """One composition block (used to cache document blocks during reranking)."""
    out, _ = _compose_block(params.representation, tokens)
    return out


def sentence_representation(params: ModelParameters, instance: SentenceInstance, mode: str = tc.EVAL, rng=None) -> np.ndarray:
    if params.task != SENTIMENT:
        raise ConfigError("sentence_representation needs sentiment parameters")
    out, _ = _sentence_forward(params.representation, instance, mode, rng, params.dropout)
    return out


# ---------------------------------------------------------------------------
# Dense stacks
# ---------------------------------------------------------------------------


def stack_forward(group: tc.Params, activations: Sequence[str], x: np.ndarray, mode: str, rng, dropout: float):
    """Hidden layers with dropout in train mode, then the output layer."""
    layers = dense_layers(group, activations)
    caches = []
    out = x
    for i, layer in enumerate(layers):
        out, cache = tc.dense_forward(layer, out)
        mask = None
        if i < len(layers) - 1:
            out, mask = tc.dropout_forward(out, dropout, mode, rng)
        caches.append((cache, mask))
    return out, caches


def stack_backward(group: tc.Params, activations: Sequence[str], caches, grad_logits: np.ndarray, acc: tc.Params) -> np.ndarray:
    """Backward from the output-layer logits; returns the gradient w.r.t. the stack input."""
    layers = dense_layers(group, activations)
    grad = grad_logits
    for i in range(len(layers) - 1, -1, -1):
        cache, mask = caches[i]
        if i < len(layers) - 1:
            grad = tc.dropout_backward(grad, mask)
        grad, grad_w, grad_b = tc.dense_backward(layers[i], cache, grad, grad_is_logit=(i == len(layers) - 1))
        acc[_layer_key(i, "weight")] += grad_w
        acc[_layer_key(i, "bias")] += grad_b
    return grad


def supervision_forward(params: ModelParameters, representation: np.ndarray, mode: str = tc.EVAL, rng=None) -> np.ndarray:
    """Target-network prediction: a probability (ranking) or a class distribution (sentiment).

    Accepts one representation vector or a batch of rows.
    """
    x = np.asarray(representation, dtype=np.float64)
    if x.shape[-1] != params.representation_width:
        raise ShapeError(f"representation width {x.shape[-1]}, expected {params.representation_width}")
    out, _ = stack_forward(params.supervision, params.supervision_activations, x, mode, rng, params.dropout)
    if params.task == RANKING:
        return out[..., 0]
    return out


def _label_matrix(params: ModelParameters, labels) -> np.ndarray:
    arr = np.asarray(labels, dtype=np.float64)
    if params.task == RANKING and arr.ndim <= 1:
        arr = arr.reshape(-1, 1) if arr.ndim == 1 else arr.reshape(1, 1)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.shape[1] != params.label_width:
        raise ShapeError(f"weak label width {arr.shape[1]}, expected {params.label_width}")
    return arr


def confidence_forward(params: ModelParameters, representation: np.ndarray, weak_label, mode: str = tc.EVAL, rng=None):
    """Confidence score in [0, 1] for (representation, weak label); batches return a vector."""
    x = np.asarray(representation, dtype=np.float64)
    single = x.ndim == 1
    x = x.reshape(1, -1) if single else x
    if x.shape[1] != params.representation_width:
        raise ShapeError(f"representation width {x.shape[1]}, expected {params.representation_width}")
    labels = _label_matrix(params, weak_label)
    if labels.shape[0] != x.shape[0]:
        raise ShapeError(f"{x.shape[0]} representations but {labels.shape[0]} weak labels")
    out, _ = stack_forward(
        params.confidence, params.confidence_activations, np.hstack([x, labels]), mode, rng, params.dropout
    )
    scores = out[:, 0]
    return float(scores[0]) if single else scores


# ---------------------------------------------------------------------------
# Batched losses and gradients
# ---------------------------------------------------------------------------


def zero_grads(group: tc.Params) -> tc.Params:
    return {k: np.zeros_like(v) for k, v in group.items()}


def task_losses(params: ModelParameters, targets: np.ndarray, predictions: np.ndarray) -> np.ndarray:
    """Per-instance task cross-entropy; ``predictions`` are (B, K) output activations."""
    if params.task == RANKING:
        return tc.binary_cross_entropy(targets[:, 0], predictions[:, 0])
    return tc.categorical_cross_entropy(targets, predictions)


def represent_batch(params: ModelParameters, group: str, instances: Sequence[Instance], mode: str, rng):
    vectors, caches = [], []
    for inst in instances:
        vec, cache = represent(params, group, inst, mode, rng)
        vectors.append(vec)
        caches.append(cache)
    return np.vstack(vectors), caches


def confidence_scores(params: ModelParameters, instances: Sequence[Instance], weak_labels) -> np.ndarray:
    """Eval-mode confidence for a batch; values are plain constants for the caller."""
    x, _ = represent_batch(params, params.confidence_input_group(), instances, tc.EVAL, None)
    return np.atleast_1d(confidence_forward(params, x, weak_labels, tc.EVAL, None))


def predict(params: ModelParameters, instances: Sequence[Instance]) -> np.ndarray:
    """Eval-mode target-network outputs, shape (B,) for ranking, (B, K) for sentiment."""
    x, _ = represent_batch(params, REPRESENTATION, instances, tc.EVAL, None)
    return supervision_forward(params, x, tc.EVAL, None)


def target_gradients(
    params: ModelParameters,
    instances: Sequence[Instance],
    targets,
    weights: np.ndarray,
    mode: str,
    rng,
) -> Tuple[Dict[str, tc.Params], np.ndarray]:
    """
    Gradients of ``(1/b) * sum_i weights_i * L_i`` for the target network.

    Args:
        params: Model parameters
        instances: Batch of b instances
        targets: (b, K) label targets (weak or true labels)
        weights: (b,) per-instance multipliers, treated as constants
        mode: "train" enables dropout
        rng: Generator for dropout masks

    Returns:
        tuple: ({"representation": ..., "supervision": ...} gradients, per-instance unweighted losses)
    """
    b = len(instances)
    if b == 0:
        raise DegenerateInputError("empty batch")
    targets = _label_matrix(params, targets)
    weights = np.asarray(weights, dtype=np.float64)
    x, rep_caches = represent_batch(params, REPRESENTATION, instances, mode, rng)
    out, caches = stack_forward(params.supervision, params.supervision_activations, x, mode, rng, params.dropout)
    losses = task_losses(params, targets, out)

    grads = {REPRESENTATION: zero_grads(params.representation), SUPERVISION: zero_grads(params.supervision)}
    grad_logits = (out - targets) * (weights / b)[:, None]
    grad_x = stack_backward(params.supervision, params.supervision_activations, caches, grad_logits, grads[SUPERVISION])
    for i in range(b):
        represent_backward(params, rep_caches[i], grad_x[i], grads[REPRESENTATION])
    return grads, np.atleast_1d(losses)


def confidence_gradients(
    params: ModelParameters,
    instances: Sequence[Instance],
    weak_labels,
    confidence_targets: np.ndarray,
    mode: str,
    rng,
) -> Tuple[Dict[str, tc.Params], np.ndarray, np.ndarray]:
    """
    Gradients of the mean binary cross-entropy between predicted and target confidence.

    Returns:
        tuple: (gradients keyed by the confidence input group and "confidence",
        per-instance losses, predicted confidences)
    """
    b = len(instances)
    if b == 0:
        raise DegenerateInputError("empty batch")
    rep_group = params.confidence_input_group()
    labels = _label_matrix(params, weak_labels)
    targets = np.asarray(confidence_targets, dtype=np.float64)
    x, rep_caches = represent_batch(params, rep_group, instances, mode, rng)
    out, caches = stack_forward(
        params.confidence, params.confidence_activations, np.hstack([x, labels]), mode, rng, params.dropout
    )
    predicted = out[:, 0]
    losses = np.atleast_1d(tc.binary_cross_entropy(targets, predicted))

    rep_params = params.group(rep_group)
    grads = {rep_group: zero_grads(rep_params), CONFIDENCE: zero_grads(params.confidence)}
    grad_logits = tc.bce_logit_grad(targets, predicted)[:, None] / b
    grad_in = stack_backward(params.confidence, params.confidence_activations, caches, grad_logits, grads[CONFIDENCE])
    width = params.representation_width
    for i in range(b):
        _represent_backward_group(params, rep_params, rep_caches[i], grad_in[i, :width], grads[rep_group])
    return grads, losses, predicted


def _represent_backward_group(params: ModelParameters, rep: tc.Params, cache, grad: np.ndarray, acc: tc.Params) -> None:
    if params.task == RANKING:
        _rank_backward(rep, cache, grad, acc)
    else:
        _sentence_backward(cache, grad, acc)
    acc["embeddings"][params.pad_index] = 0.0
