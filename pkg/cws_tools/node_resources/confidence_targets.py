# -*- coding: utf-8 -*-
"""Training targets for the confidence network: how close a weak label is to the truth."""

import numpy as np

from ..errors import ShapeError, ValidationError


def _check_probability(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {value}")
    return value


def confidence_target_rank(true_label: float, weak_label: float) -> float:
    """``1 - |y - y_weak|`` for scalar pairwise labels."""
    y = _check_probability(true_label, "true label")
    y_weak = _check_probability(weak_label, "weak label")
    return 1.0 - abs(y - y_weak)


def confidence_target_class(true_onehot, weak) -> float:
    """``1 - mean_k |y_k - y_weak_k|`` for class distributions, clamped into [0, 1]."""
    y = np.asarray(true_onehot, dtype=np.float64)
    y_weak = np.asarray(weak, dtype=np.float64)
    if y.shape != y_weak.shape or y.ndim != 1:
        raise ShapeError(f"label shapes differ: {y.shape} vs {y_weak.shape}")
    value = 1.0 - float(np.mean(np.abs(y - y_weak)))
    return min(1.0, max(0.0, value))
