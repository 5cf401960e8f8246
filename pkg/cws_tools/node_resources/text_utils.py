# -*- coding: utf-8 -*-
"""Shared text utilities: tokenization and query-log cleanup."""

import re
from typing import Iterable, List

_TOKEN_PATTERN = re.compile(r"[^\W_]+", re.UNICODE)

_URL_MARKERS = ("http", "www.", ".com", ".net", ".org", ".edu", ".gov")


def tokenize(text: str) -> List[str]:
    """
    Lowercase text and split it on runs of non-alphanumeric characters.

    Args:
        text (str): Raw UTF-8 text

    Returns:
        list[str]: Tokens in order of appearance, empties dropped

    Examples:
        >>> tokenize("The cat, the CAT!")
        ['the', 'cat', 'the', 'cat']
        >>> tokenize("a1-b2")
        ['a1', 'b2']
        >>> tokenize("")
        []
    """
    if not text or not isinstance(text, str):
        return []
    return _TOKEN_PATTERN.findall(text.lower())


def looks_like_url(query: str) -> bool:
    lowered = query.lower()
    return any(marker in lowered for marker in _URL_MARKERS)


def filter_query_log(lines: Iterable[str]) -> List[str]:
    """
    Clean a raw query log before it is used to harvest weak labels.

    Drops navigational (URL-like) queries and queries with no alphanumeric token,
    then deduplicates on the normalized token form while preserving the order of
    first occurrence.

    Examples:
        >>> filter_query_log(["Cheap flights", "cheap  FLIGHTS", "www.example.com", "!!"])
        ['cheap flights']
    """
    seen = set()
    kept: List[str] = []
    for raw in lines:
        if not raw or looks_like_url(raw):
            continue
        tokens = tokenize(raw)
        if not tokens:
            continue
        normalized = " ".join(tokens)
        if normalized not in seen:
            seen.add(normalized)
            kept.append(normalized)
    return kept
