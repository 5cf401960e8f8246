# -*- coding: utf-8 -*-
"""Dense numeric layer shared by the ranking and sentiment networks.

Every forward transform comes with an exact backward pass. Forward functions that
feed a backward pass return ``(output, cache)``; the ``*_apply`` / ``*_encode`` /
``*_lookup`` entry points return the output only. Arrays are float64 throughout.

A "Matrix" in this module is a 2-D float64 ``numpy.ndarray``; the sentence and
embedding matrices are stored column-per-token (m x n).
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, DegenerateInputError, DeterminismError, ShapeError, ValidationError

TRAIN = "train"
EVAL = "eval"
MODES = (TRAIN, EVAL)

ACTIVATIONS = ("relu", "sigmoid", "softmax", "identity")

LOG_CLAMP = 1e-7

Params = Dict[str, np.ndarray]


@dataclass
class DenseLayer:
    """Affine map followed by an activation: ``activation(W x + b)``."""

    weights: np.ndarray
    bias: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ShapeError(f"dense weights must be 2-D, got shape {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"dense bias length {self.bias.shape} does not match weight rows {self.weights.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation '{self.activation}', expected one of {ACTIVATIONS}")

    @property
    def fan_in(self) -> int:
        return int(self.weights.shape[1])

    @property
    def fan_out(self) -> int:
        return int(self.weights.shape[0])


@dataclass
class EmbeddingTable:
    vectors: np.ndarray
    unk_index: int = 1

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[1] < 1:
            raise ShapeError(f"embedding table must be vocab x dim with dim >= 1, got {self.vectors.shape}")
        if not 0 <= self.unk_index < self.vectors.shape[0]:
            raise ValidationError(f"unk_index {self.unk_index} outside vocabulary of {self.vectors.shape[0]}")

    @property
    def vocab_size(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


@dataclass
class TermWeights:
    """One real weight per vocabulary term (the IDF-like omega table)."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 1:
            raise ShapeError(f"term weights must be a vector, got shape {self.weights.shape}")

    def check_against(self, table: EmbeddingTable) -> None:
        if self.weights.shape[0] != table.vocab_size:
            raise ShapeError(
                f"term weights cover {self.weights.shape[0]} terms, embedding table {table.vocab_size}"
            )


@dataclass
class ConvBank:
    """``filter_count`` filters of shape m x window with one bias per filter."""

    filters: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.filters = np.asarray(self.filters, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.filters.ndim != 3:
            raise ShapeError(f"conv filters must be (f, m, h), got {self.filters.shape}")
        if self.filters.shape[0] < 1 or self.filters.shape[2] < 1:
            raise ConfigError("conv bank needs filter_count >= 1 and window >= 1")
        if self.bias.shape != (self.filters.shape[0],):
            raise ShapeError(f"conv bias {self.bias.shape} does not match {self.filters.shape[0]} filters")

    @property
    def filter_count(self) -> int:
        return int(self.filters.shape[0])

    @property
    def window(self) -> int:
        return int(self.filters.shape[2])


@dataclass
class AdamState:
    """Moment estimates for one parameter group.

    Moments are created lazily (zero-filled) the first time a key is updated.
    """

    step: int = 0
    first_moment: Params = field(default_factory=dict)
    second_moment: Params = field(default_factory=dict)
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def copy(self) -> "AdamState":
        return AdamState(
            step=self.step,
            first_moment={k: v.copy() for k, v in self.first_moment.items()},
            second_moment={k: v.copy() for k, v in self.second_moment.items()},
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
        )


# ---------------------------------------------------------------------------
# Elementwise helpers
# ---------------------------------------------------------------------------


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function (exact 0/1 in the saturated tails)."""
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    ex = np.exp(shifted)
    return ex / np.sum(ex, axis=axis, keepdims=True)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return relu(z)
    if activation == "sigmoid":
        return sigmoid(z)
    if activation == "softmax":
        return softmax(z, axis=-1)
    if activation == "identity":
        return np.array(z, dtype=np.float64)
    raise ConfigError(f"unknown activation '{activation}'")


def activation_backward(z: np.ndarray, out: np.ndarray, grad_out: np.ndarray, activation: str) -> np.ndarray:
    """Gradient w.r.t. the pre-activation ``z`` given the gradient w.r.t. ``out``."""
    if activation == "relu":
        # derivative at exactly 0 is 0
        return grad_out * (z > 0)
    if activation == "sigmoid":
        return grad_out * out * (1.0 - out)
    if activation == "softmax":
        dot = np.sum(out * grad_out, axis=-1, keepdims=True)
        return out * (grad_out - dot)
    if activation == "identity":
        return grad_out
    raise ConfigError(f"unknown activation '{activation}'")


def glorot_uniform(rng: np.random.Generator, shape: Sequence[int], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=tuple(shape))


# ---------------------------------------------------------------------------
# Embeddings and composition
# ---------------------------------------------------------------------------


def _token_array(tokens: Sequence[int], vocab_size: int) -> np.ndarray:
    ids = np.asarray(tokens, dtype=np.int64)
    if ids.ndim != 1 or ids.size == 0:
        raise DegenerateInputError("embedding lookup needs a non-empty token sequence")
    if ids.min() < 0 or ids.max() >= vocab_size:
        raise ValidationError(f"token id outside vocabulary of size {vocab_size}")
    return ids


def embedding_lookup(table: EmbeddingTable, tokens: Sequence[int]) -> np.ndarray:
    """Gather embedding columns: column i is the vector of ``tokens[i]`` (m x n)."""
    ids = _token_array(tokens, table.vocab_size)
    return table.vectors[ids].T.copy()


def embedding_backward(grad: np.ndarray, tokens: Sequence[int], accumulator: np.ndarray) -> None:
    """Scatter-add an (m x n) gradient into the looked-up rows of ``accumulator``."""
    ids = np.asarray(tokens, dtype=np.int64)
    np.add.at(accumulator, ids, grad.T)


def term_weighted_composition(embeds: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Softmax(weights)-weighted sum of the columns of ``embeds``."""
    out, _ = composition_forward(embeds, weights)
    return out


def composition_forward(embeds: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    embeds = np.asarray(embeds, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if embeds.ndim != 2 or embeds.shape[1] < 1:
        raise DegenerateInputError("composition needs at least one term")
    if weights.shape != (embeds.shape[1],):
        raise ShapeError(f"{embeds.shape[1]} embeddings but {weights.shape} weights")
    attention = softmax(weights)
    return embeds @ attention, (embeds, attention)


def composition_backward(cache: Tuple[np.ndarray, np.ndarray], grad_out: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Returns gradients w.r.t. (embeds, weights)."""
    embeds, attention = cache
    grad_embeds = np.outer(grad_out, attention)
    grad_attention = embeds.T @ grad_out
    grad_weights = attention * (grad_attention - np.dot(attention, grad_attention))
    return grad_embeds, grad_weights


# ---------------------------------------------------------------------------
# Dense layers
# ---------------------------------------------------------------------------


def dense_apply(layer: DenseLayer, input: np.ndarray) -> np.ndarray:
    out, _ = dense_forward(layer, input)
    return out


def dense_forward(layer: DenseLayer, x: np.ndarray) -> Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Apply a dense layer to a vector (in,) or a batch of rows (B, in)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != layer.fan_in:
        raise ShapeError(f"dense layer expects width {layer.fan_in}, got input shape {x.shape}")
    z = x @ layer.weights.T + layer.bias
    out = activate(z, layer.activation)
    return out, (x, z, out)


def dense_backward(
    layer: DenseLayer,
    cache: Tuple[np.ndarray, np.ndarray, np.ndarray],
    grad_out: np.ndarray,
    grad_is_logit: bool = False,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Backward pass of ``dense_forward``.

    Args:
        layer: The layer used in the forward pass.
        cache: Cache returned by ``dense_forward``.
        grad_out: Gradient w.r.t. the layer output, or w.r.t. the pre-activation when
            ``grad_is_logit`` is set (the fused sigmoid/softmax + cross-entropy case).

    Returns:
        tuple: (grad_input, grad_weights, grad_bias); batch gradients are summed over rows.
    """
    x, z, out = cache
    grad_z = grad_out if grad_is_logit else activation_backward(z, out, grad_out, layer.activation)
    if x.ndim == 1:
        grad_w = np.outer(grad_z, x)
        grad_b = np.array(grad_z, dtype=np.float64)
    else:
        grad_w = grad_z.T @ x
        grad_b = grad_z.sum(axis=0)
    grad_x = grad_z @ layer.weights
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------------------
# Convolution with max-over-time pooling
# ---------------------------------------------------------------------------


def conv_encode(bank: ConvBank, sentence: np.ndarray) -> np.ndarray:
    out, _ = conv_forward(bank, sentence)
    return out


def conv_forward(bank: ConvBank, sentence: np.ndarray):
    """Sliding-window convolution, relu, then max over positions.

    Args:
        bank: Filters (f, m, h) and bias (f,).
        sentence: Sentence matrix of shape (m, n) with n >= h.

    Returns:
        tuple: pooled vector (f,) and the cache for ``conv_backward``.
    """
    sentence = np.asarray(sentence, dtype=np.float64)
    m, n = sentence.shape
    if m != bank.filters.shape[1]:
        raise ShapeError(f"sentence has {m} rows, filters expect {bank.filters.shape[1]}")
    h = bank.window
    if n < h:
        raise DegenerateInputError(f"sentence of length {n} is shorter than the conv window {h}")
    windows = np.lib.stride_tricks.sliding_window_view(sentence, h, axis=1)  # (m, n-h+1, h)
    features = np.einsum("mph,fmh->fp", windows, bank.filters) + bank.bias[:, None]
    activated = np.maximum(features, 0.0)
    positions = np.argmax(activated, axis=1)
    rows = np.arange(bank.filter_count)
    pooled = activated[rows, positions]
    return pooled, (sentence, windows, features, positions)


def conv_backward(bank: ConvBank, cache, grad_out: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns gradients w.r.t. (sentence, filters, bias)."""
    sentence, windows, features, positions = cache
    h = bank.window
    rows = np.arange(bank.filter_count)
    live = features[rows, positions] > 0
    g = np.where(live, grad_out, 0.0)
    grad_filters = g[:, None, None] * windows[:, positions, :].transpose(1, 0, 2)
    grad_bias = g.copy()
    grad_sentence = np.zeros_like(sentence)
    for k in np.flatnonzero(live):
        p = positions[k]
        grad_sentence[:, p:p + h] += g[k] * bank.filters[k]
    return grad_sentence, grad_filters, grad_bias


# ---------------------------------------------------------------------------
# Dropout
# ---------------------------------------------------------------------------


def check_dropout_rate(rate: float) -> None:
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")


def dropout_apply(input: np.ndarray, rate: float, mode: str, rng: Optional[np.random.Generator]) -> np.ndarray:
    out, _ = dropout_forward(input, rate, mode, rng)
    return out


def dropout_forward(x: np.ndarray, rate: float, mode: str, rng: Optional[np.random.Generator]):
    """Inverted dropout; the returned mask already carries the 1/(1-rate) scale."""
    check_dropout_rate(rate)
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got '{mode}'")
    x = np.asarray(x, dtype=np.float64)
    if mode == EVAL or rate == 0.0:
        return x, None
    if rng is None:
        raise ConfigError("train-mode dropout needs a random generator")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(grad_out: np.ndarray, mask: Optional[np.ndarray]) -> np.ndarray:
    return grad_out if mask is None else grad_out * mask


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def binary_cross_entropy(target, predicted):
    """``-t log p - (1-t) log(1-p)`` with p clamped to [1e-7, 1-1e-7].

    Works elementwise on arrays. The gradient w.r.t. the pre-sigmoid logit is
    ``p - t`` (see ``bce_logit_grad``).
    """
    t = np.asarray(target, dtype=np.float64)
    p = np.clip(np.asarray(predicted, dtype=np.float64), LOG_CLAMP, 1.0 - LOG_CLAMP)
    loss = -t * np.log(p) - (1.0 - t) * np.log1p(-p)
    return float(loss) if loss.ndim == 0 else loss


def bce_logit_grad(target, predicted) -> np.ndarray:
    return np.asarray(predicted, dtype=np.float64) - np.asarray(target, dtype=np.float64)


def _check_distribution(values: np.ndarray, name: str) -> None:
    if np.any(values < 0) or np.any(np.abs(values.sum(axis=-1) - 1.0) > 1e-6):
        raise ValidationError(f"{name} must be a probability distribution summing to 1")


def categorical_cross_entropy(target, predicted):
    """``-sum_k t_k log p_k`` over the last axis; both inputs must be distributions."""
    t = np.asarray(target, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if t.shape != p.shape:
        raise ShapeError(f"target shape {t.shape} differs from prediction shape {p.shape}")
    _check_distribution(t, "target")
    _check_distribution(p, "prediction")
    loss = -np.sum(t * np.log(np.clip(p, LOG_CLAMP, 1.0 - LOG_CLAMP)), axis=-1)
    return float(loss) if loss.ndim == 0 else loss


def cce_logit_grad(target, predicted) -> np.ndarray:
    return np.asarray(predicted, dtype=np.float64) - np.asarray(target, dtype=np.float64)


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


def adam_update(params: Params, grads: Params, state: AdamState, lr: float) -> Tuple[Params, AdamState]:
    """One bias-corrected Adam step over every key of ``grads`` (in place).

    Keys missing from ``grads`` are left untouched; the step counter advances once.
    """
    for key, g in grads.items():
        if key not in params:
            raise ShapeError(f"gradient for unknown parameter '{key}'")
        if params[key].shape != g.shape:
            raise ShapeError(f"parameter '{key}' has shape {params[key].shape}, gradient {g.shape}")
        m = state.first_moment.get(key)
        if m is not None and m.shape != g.shape:
            raise ShapeError(f"moment for '{key}' has shape {m.shape}, gradient {g.shape}")

    state.step += 1
    t = state.step
    for key in sorted(grads):
        g = grads[key]
        if key not in state.first_moment:
            state.first_moment[key] = np.zeros_like(params[key])
            state.second_moment[key] = np.zeros_like(params[key])
        m = state.first_moment[key]
        v = state.second_moment[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        params[key] -= lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params, state


# ---------------------------------------------------------------------------
# Finite-difference gradient checker
# ---------------------------------------------------------------------------

LossClosure = Callable[[], Tuple[float, Params]]


def grad_check_detailed(
    closure: LossClosure,
    params: Params,
    perturbation: float = 1e-4,
    max_coordinates: Optional[int] = None,
    seed: int = 0,
) -> Dict[str, float]:
    """Central-difference check of every array in ``params``.

    Args:
        closure: Deterministic function returning ``(loss, analytic_grads)`` for the
            current contents of ``params`` (dropout must be in eval mode).
        params: Arrays the closure reads; perturbed in place and restored.
        perturbation: Step size, within [1e-6, 1e-3].
        max_coordinates: Optional cap on checked coordinates per array (sampled with ``seed``).

    Returns:
        dict: max relative error ``|a-n| / max(1, |a|+|n|)`` per parameter name.
    """
    if not 1e-6 <= perturbation <= 1e-3:
        raise ConfigError(f"perturbation must lie in [1e-6, 1e-3], got {perturbation}")
    loss_a, analytic = closure()
    loss_b, _ = closure()
    if loss_a != loss_b:
        raise DeterminismError(f"loss closure is not deterministic ({loss_a!r} != {loss_b!r})")

    rng = np.random.default_rng(seed)
    report: Dict[str, float] = {}
    for name in sorted(params):
        array = params[name]
        grad = analytic.get(name, np.zeros_like(array))
        flat_count = array.size
        coords = np.arange(flat_count)
        if max_coordinates is not None and flat_count > max_coordinates:
            coords = np.sort(rng.choice(flat_count, size=max_coordinates, replace=False))
        worst = 0.0
        for flat in coords:
            idx = np.unravel_index(flat, array.shape)
            original = array[idx]
            array[idx] = original + perturbation
            plus, _ = closure()
            array[idx] = original - perturbation
            minus, _ = closure()
            array[idx] = original
            numeric = (plus - minus) / (2.0 * perturbation)
            a = float(grad[idx])
            err = abs(a - numeric) / max(1.0, abs(a) + abs(numeric))
            worst = max(worst, err)
        report[name] = worst
    return report


def grad_check(
    closure: LossClosure,
    params: Params,
    perturbation: float = 1e-4,
    max_coordinates: Optional[int] = None,
    seed: int = 0,
) -> float:
    """Maximum relative error over all coordinates (see ``grad_check_detailed``)."""
    report = grad_check_detailed(closure, params, perturbation, max_coordinates, seed)
    return max(report.values()) if report else 0.0
