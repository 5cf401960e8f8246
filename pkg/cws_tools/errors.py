# -*- coding: utf-8 -*-
"""Exception types raised across cws_tools.

Everything derives from CwsError plus the closest builtin, so callers that only
know about ValueError / RuntimeError / KeyError keep working.
"""

from typing import Optional


class CwsError(Exception):
    """Base class for all cws_tools errors."""


class DegenerateInputError(CwsError, ValueError):
    """Input is empty or too short for the requested operation."""


class ShapeError(CwsError, ValueError):
    """Array shapes or vector lengths do not agree."""


class ConfigError(CwsError, ValueError):
    """A configuration value is missing, out of range or inconsistent."""


class ValidationError(CwsError, ValueError):
    """A data value violates a documented invariant."""


class DeterminismError(CwsError, RuntimeError):
    """A closure expected to be deterministic returned different values."""


class UnsupportedStrategyError(CwsError, ValueError):
    """The requested training strategy is not implemented."""


class StateError(CwsError, RuntimeError):
    """An object was used before it reached the required state."""


class UnknownDocumentError(CwsError, KeyError):
    """A document id is not present in the index."""


class CorpusParseError(CwsError, ValueError):
    """A corpus file line could not be parsed.

    Attributes:
        path: File the line came from.
        line_number: 1-based line number, or None when the whole file is at fault.
    """

    def __init__(self, path: str, line_number: Optional[int], message: str):
        self.path = path
        self.line_number = line_number
        where = f"{path}:{line_number}" if line_number is not None else path
        super().__init__(f"{where}: {message}")
