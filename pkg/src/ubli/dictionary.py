"""Index-pair dictionaries and their TSV serialization."""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass
from os import PathLike

import numpy as np

from .embeddings import Vocabulary

logger = logging.getLogger(__name__)

__all__ = ["Dictionary", "save_dictionary", "load_dictionary"]


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Unique ``(src_index, trg_index)`` pairs in first-seen order."""

    src: np.ndarray
    trg: np.ndarray

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.int64).ravel()
        trg = np.asarray(self.trg, dtype=np.int64).ravel()
        if src.shape != trg.shape:
            raise ValueError("src and trg index arrays differ in length")
        if src.size and (src.min() < 0 or trg.min() < 0):
            raise ValueError("dictionary indices must be non-negative")
        if src.size:
            # np.unique sorts; recover first-occurrence order from the returned indices
            _, first = np.unique(np.stack([src, trg], axis=1), axis=0, return_index=True)
            first.sort()
            src, trg = src[first], trg[first]
        src.setflags(write=False)
        trg.setflags(write=False)
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "trg", trg)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]]) -> "Dictionary":
        pairs = list(pairs)
        if not pairs:
            return cls(np.empty(0, np.int64), np.empty(0, np.int64))
        src, trg = zip(*pairs)
        return cls(np.array(src), np.array(trg))

    @classmethod
    def identity(cls, n: int) -> "Dictionary":
        return cls(np.arange(n), np.arange(n))

    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.trg.tolist()))

    def as_set(self) -> set[tuple[int, int]]:
        return set(self.pairs())

    def check_bounds(self, n_src: int, n_trg: int) -> None:
        if len(self) and (self.src.max() >= n_src or self.trg.max() >= n_trg):
            raise ValueError(f"dictionary index out of bounds for vocab sizes ({n_src}, {n_trg})")

    def __len__(self):
        return int(self.src.size)

    def __eq__(self, other):
        if not isinstance(other, Dictionary):
            return NotImplemented
        return np.array_equal(self.src, other.src) and np.array_equal(self.trg, other.trg)

    def __hash__(self):
        return hash((self.src.tobytes(), self.trg.tobytes()))

    def __repr__(self):
        return f"Dictionary({len(self)} pairs)"


def save_dictionary(path: str | PathLike, d: Dictionary, src_vocab: Vocabulary, trg_vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for i, j in d.pairs():
            f.write(f"{src_vocab.words[i]}\t{trg_vocab.words[j]}\n")


def load_dictionary(path: str | PathLike, src_vocab: Vocabulary, trg_vocab: Vocabulary) -> Dictionary:
    """Read a ``<src>\\t<trg>`` file; pairs with an out-of-vocabulary side are skipped."""
    pairs = []
    skipped = 0
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            src, trg = line.split("\t")
            if src in src_vocab.index and trg in trg_vocab.index:
                pairs.append((src_vocab.index[src], trg_vocab.index[trg]))
            else:
                skipped += 1
    if skipped:
        logger.info("%s: skipped %d out-of-vocabulary pairs", path, skipped)
    return Dictionary.from_pairs(pairs)
