# -*- coding: utf-8 -*-
"""Lexicon-based weak annotator for sentence sentiment."""

import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, Sequence

import numpy as np

from ..errors import CorpusParseError, ValidationError

CLASSES = ("positive", "negative", "neutral")
NUM_CLASSES = len(CLASSES)
POSITIVE, NEGATIVE, NEUTRAL = range(NUM_CLASSES)


@dataclass
class SentimentLexicon:
    """Term -> distribution over (positive, negative, neutral)."""

    entries: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        checked = {}
        for term, dist in self.entries.items():
            checked[term] = _normalized(term, dist)
        self.entries = checked

    def __contains__(self, term: str) -> bool:
        return term in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def _normalized(term: str, dist) -> np.ndarray:
    arr = np.asarray(dist, dtype=np.float64)
    if arr.shape != (NUM_CLASSES,):
        raise ValidationError(f"lexicon entry '{term}' must have {NUM_CLASSES} values, got {arr.shape}")
    if np.any(arr < 0) or abs(arr.sum() - 1.0) > 1e-6:
        raise ValidationError(f"lexicon entry '{term}' is not a probability distribution")
    return arr


def lexicon_annotate(lexicon: SentimentLexicon, sentence: Sequence[str]) -> np.ndarray:
    """
    Average the distributions of the sentence terms found in the lexicon.

    Terms missing from the lexicon are skipped; a sentence with no hit gets the
    uniform distribution.

    Args:
        lexicon: Term distributions
        sentence: Tokenized sentence

    Returns:
        np.ndarray: Weak label distribution over the three classes
    """
    hits = [lexicon.entries[t] for t in sentence if t in lexicon.entries]
    if not hits:
        return np.full(NUM_CLASSES, 1.0 / NUM_CLASSES)
    mean = np.mean(hits, axis=0)
    return mean / mean.sum()


def load_lexicon_tsv(path: str) -> SentimentLexicon:
    """Read ``term<TAB>p_pos<TAB>p_neg<TAB>p_neu`` lines; '#' lines are comments."""
    entries: Dict[str, np.ndarray] = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line_number, raw in enumerate(f, start=1):
                line = raw.rstrip("\n")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 4:
                    raise CorpusParseError(path, line_number, f"expected 4 tab-separated fields, got {len(parts)}")
                try:
                    values = [float(x) for x in parts[1:]]
                    entries[parts[0]] = _normalized(parts[0], values)
                except (ValueError, ValidationError) as e:
                    raise CorpusParseError(path, line_number, str(e)) from e
    except OSError as e:
        raise CorpusParseError(path, None, f"cannot read lexicon: {e}") from e
    return SentimentLexicon(entries)


def write_lexicon_tsv(lexicon: SentimentLexicon, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write("# term\tp_pos\tp_neg\tp_neu\n")
        for term in sorted(lexicon.entries):
            values = "\t".join(repr(float(v)) for v in lexicon.entries[term])
            f.write(f"{term}\t{values}\n")


def weak_class(distribution: Iterable[float]) -> int:
    """Argmax with lowest-index tie-break."""
    return int(np.argmax(np.asarray(list(distribution), dtype=np.float64)))
