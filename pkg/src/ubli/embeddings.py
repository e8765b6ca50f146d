"""Reading, writing and frequency filtering of monolingual word embeddings.

Embedding matrices are plain ``float64`` numpy arrays of shape ``(n_words, dim)``;
row ``i`` belongs to ``vocab.words[i]``. The text format is the usual
word2vec/fastText layout::

    <count> <dim>
    <word> <f1> ... <fdim>
"""

from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from os import PathLike
from types import MappingProxyType

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "EmbeddingFormatError",
    "Vocabulary",
    "FrequencyTable",
    "check_matrix",
    "load_embeddings",
    "save_embeddings",
    "load_frequencies",
    "save_frequencies",
    "read_tokens",
    "build_frequency_table",
    "filter_by_frequency",
    "SELECTED_MIN_FREQ",
    "restrict_to_words",
]

# 9 significant digits: enough for text round-trips to be stable after one save.
FLOAT_FORMAT = "%.9g"


class EmbeddingFormatError(ValueError):
    """Raised when an embedding or frequency file does not follow the text format."""


@dataclass(frozen=True)
class Vocabulary:
    """Ordered word list with its inverse index and optional corpus counts."""

    words: tuple[str, ...]
    freq: Mapping[str, int] = field(default_factory=dict)
    index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        words = tuple(self.words)
        if not words:
            raise ValueError("vocabulary must contain at least one word")
        index = {w: i for i, w in enumerate(words)}
        if len(index) != len(words):
            dupes = [w for w, c in Counter(words).items() if c > 1]
            raise ValueError(f"duplicate words in vocabulary: {dupes[:5]}")
        for w, c in self.freq.items():
            if c < 0:
                raise ValueError(f"negative frequency for {w!r}: {c}")
        object.__setattr__(self, "words", words)
        object.__setattr__(self, "freq", MappingProxyType(dict(self.freq)))
        object.__setattr__(self, "index", MappingProxyType(index))

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    def __iter__(self):
        return iter(self.words)

    def with_frequencies(self, freq: Mapping[str, int]) -> "Vocabulary":
        return Vocabulary(self.words, freq)

    @property
    def has_frequencies(self) -> bool:
        return bool(self.freq)


@dataclass(frozen=True)
class FrequencyTable:
    counts: Mapping[str, int]
    total_tokens: int

    def __post_init__(self):
        if any(c < 1 for c in self.counts.values()):
            raise ValueError("frequency counts must be >= 1")
        if sum(self.counts.values()) != self.total_tokens:
            raise ValueError("total_tokens does not match the sum of counts")
        object.__setattr__(self, "counts", MappingProxyType(dict(self.counts)))

    def __getitem__(self, word):
        return self.counts.get(word, 0)

    def __len__(self):
        return len(self.counts)

    def most_common(self, n: int | None = None) -> list[tuple[str, int]]:
        return Counter(self.counts).most_common(n)


def check_matrix(emb, n_rows: int | None = None, name: str = "embedding matrix") -> np.ndarray:
    """Return ``emb`` as a 2-D float64 array, raising if it is malformed.

    Rejects non-2-D input, empty matrices, non-finite entries and (when
    ``n_rows`` is given) a row count different from the vocabulary size.
    """
    arr = np.asarray(emb, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if n_rows is not None and arr.shape[0] != n_rows:
        raise ValueError(f"{name} has {arr.shape[0]} rows, expected {n_rows}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.argwhere(~np.isfinite(arr))[0, 0])
        raise ValueError(f"{name} contains non-finite values (first at row {bad})")
    return arr


def _has_space(word: str) -> bool:
    return any(ch.isspace() for ch in word)


def load_embeddings(path: str | PathLike, expect_dim: int | None = None,
                    freq_path: str | PathLike | None = None) -> tuple[Vocabulary, np.ndarray]:
    """Load a text embedding file.

    Parameters
    ----------
    path : path-like
        UTF-8 file with a ``<count> <dim>`` header followed by one
        ``<word> <floats...>`` line per word.
    expect_dim : int, optional
        If given, the header dimension must match it.
    freq_path : path-like, optional
        ``<word>\\t<count>`` sidecar; counts are attached to the vocabulary.

    Returns
    -------
    vocab : Vocabulary
        Words in file order. Duplicate words keep their first occurrence.
    emb : ndarray of shape (count, dim)

    Raises
    ------
    EmbeddingFormatError
        Malformed header, wrong row arity, non-finite values, a word
        containing whitespace, a row count that disagrees with the header,
        or a dimension mismatch against ``expect_dim``.
    """
    with open(path, encoding="utf-8", newline="\n") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise EmbeddingFormatError(f"{path}: malformed header {header!r}, expected '<count> <dim>'")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise EmbeddingFormatError(f"{path}: malformed header {header!r}") from None
        if count < 1 or dim < 1:
            raise EmbeddingFormatError(f"{path}: header declares count={count}, dim={dim}")
        if expect_dim is not None and dim != expect_dim:
            raise EmbeddingFormatError(f"{path}: dimension {dim} does not match expected {expect_dim}")

        words: list[str] = []
        seen: set[str] = set()
        rows: list[np.ndarray] = []
        n_lines = 0
        for lineno, line in enumerate(f, start=2):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            n_lines += 1
            parts = line.rstrip(" ").split(" ")
            if len(parts) != dim + 1:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: row arity mismatch, got {len(parts) - 1} values for dim {dim}")
            word = parts[0]
            if not word or _has_space(word):
                raise EmbeddingFormatError(f"{path}:{lineno}: word {word!r} is empty or contains whitespace")
            try:
                vec = np.array(parts[1:], dtype=np.float64)
            except ValueError:
                raise EmbeddingFormatError(f"{path}:{lineno}: unparsable value in row for {word!r}") from None
            if not np.all(np.isfinite(vec)):
                raise EmbeddingFormatError(f"{path}:{lineno}: non-finite value in row for {word!r}")
            if word in seen:
                logger.warning("%s:%d: duplicate word %r ignored (first occurrence kept)", path, lineno, word)
                continue
            seen.add(word)
            words.append(word)
            rows.append(vec)
    if n_lines != count:
        raise EmbeddingFormatError(f"{path}: header declares {count} rows but file has {n_lines}")

    freq = load_frequencies(freq_path) if freq_path is not None else {}
    return Vocabulary(tuple(words), freq), np.vstack(rows)


def save_embeddings(path: str | PathLike, vocab: Vocabulary | Sequence[str], emb) -> None:
    """Write ``emb`` in the text format, one row per word, 9 significant digits."""
    words = vocab.words if isinstance(vocab, Vocabulary) else tuple(vocab)
    emb = check_matrix(emb, n_rows=len(words))
    for w in words:
        if not w or _has_space(w):
            raise EmbeddingFormatError(f"word {w!r} cannot be represented in the text format")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{emb.shape[0]} {emb.shape[1]}\n")
        for word, row in zip(words, emb):
            f.write(word + " " + " ".join(FLOAT_FORMAT % v for v in row) + "\n")


def load_frequencies(path: str | PathLike) -> dict[str, int]:
    counts: dict[str, int] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                word, count = line.split("\t")
                counts[word] = int(count)
            except ValueError:
                raise EmbeddingFormatError(f"{path}:{lineno}: expected '<word>\\t<count>'") from None
    return counts


def save_frequencies(path: str | PathLike, counts: Mapping[str, int]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for word, count in counts.items():
            f.write(f"{word}\t{count}\n")


def read_tokens(path: str | PathLike) -> Iterable[str]:
    """Yield whitespace-separated tokens from a UTF-8 corpus file, lazily."""
    with open(path, encoding="utf-8") as f:
        for line in f:
            yield from line.split()


def build_frequency_table(tokens: Iterable[str]) -> FrequencyTable:
    counts = Counter()
    for tok in tokens:
        if not tok:
            raise ValueError("tokens must be non-empty strings")
        counts[tok] += 1
    return FrequencyTable(dict(counts), sum(counts.values()))


# Thresholds used for the English-Sinhala/Tamil/Punjabi corpora.
SELECTED_MIN_FREQ = {"en-si": 8, "en-ta": 6, "en-pa": 6}


def filter_by_frequency(vocab: Vocabulary, emb, min_freq: int) -> tuple[Vocabulary, np.ndarray]:
    """Keep the words whose corpus count is at least ``min_freq``.

    Words missing from ``vocab.freq`` count as zero. Relative order is kept
    and the embedding rows are sliced with the same indices.
    """
    if min_freq < 1:
        raise ValueError(f"min_freq must be >= 1, got {min_freq}")
    if not vocab.has_frequencies:
        raise ValueError("vocabulary carries no frequency data")
    emb = check_matrix(emb, n_rows=len(vocab))
    keep = [i for i, w in enumerate(vocab.words) if vocab.freq.get(w, 0) >= min_freq]
    if not keep:
        raise ValueError(f"no word reaches min_freq={min_freq}")
    words = tuple(vocab.words[i] for i in keep)
    freq = {w: vocab.freq[w] for w in words}
    return Vocabulary(words, freq), emb[keep]


def restrict_to_words(vocab: Vocabulary, emb, allowed: Iterable[str]) -> tuple[Vocabulary, np.ndarray]:
    """Slice ``(vocab, emb)`` down to the words in ``allowed``, preserving vocab order."""
    allowed = set(allowed)
    keep = [i for i, w in enumerate(vocab.words) if w in allowed]
    if not keep:
        raise ValueError("no overlap between vocabulary and the allowed word set")
    words = tuple(vocab.words[i] for i in keep)
    freq = {w: vocab.freq[w] for w in words if w in vocab.freq}
    return Vocabulary(words, freq), np.asarray(emb)[keep]
