# -*- coding: utf-8 -*-
"""Controlled weak supervision: confidence-weighted learning from weak annotators."""

__version__ = "1.0.0"

from .strategies import STRATEGY_CLASS_MAPPINGS  # noqa: E402

__all__ = ["__version__", "STRATEGY_CLASS_MAPPINGS"]
