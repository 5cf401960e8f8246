# -*- coding: utf-8 -*-
"""Term <-> id mapping with reserved pad and unk ids."""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

PAD_TERM = "<pad>"
UNK_TERM = "<unk>"
PAD_INDEX = 0
UNK_INDEX = 1


@dataclass
class Vocabulary:
    term_to_id: Dict[str, int] = field(default_factory=lambda: {PAD_TERM: PAD_INDEX, UNK_TERM: UNK_INDEX})
    id_to_term: List[str] = field(default_factory=lambda: [PAD_TERM, UNK_TERM])

    pad_index = PAD_INDEX
    unk_index = UNK_INDEX

    def __len__(self) -> int:
        return len(self.id_to_term)

    def __contains__(self, term: str) -> bool:
        return term in self.term_to_id

    def add(self, term: str) -> int:
        existing = self.term_to_id.get(term)
        if existing is not None:
            return existing
        new_id = len(self.id_to_term)
        self.term_to_id[term] = new_id
        self.id_to_term.append(term)
        return new_id

    def encode(self, tokens: Sequence[str]) -> Tuple[int, ...]:
        """Map tokens to ids; out-of-vocabulary terms become the unk id."""
        return tuple(self.term_to_id.get(t, UNK_INDEX) for t in tokens)

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.id_to_term[i] for i in ids]

    @classmethod
    def build(cls, token_streams: Iterable[Sequence[str]]) -> "Vocabulary":
        """Vocabulary over all streams, ids assigned in order of first appearance."""
        vocab = cls()
        for tokens in token_streams:
            for t in tokens:
                vocab.add(t)
        return vocab
