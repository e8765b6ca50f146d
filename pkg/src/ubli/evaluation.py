"""Precision@k against gold dictionaries, and gold-dictionary curation filters."""

from __future__ import annotations

import csv
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from os import PathLike

from .embeddings import Vocabulary

__all__ = [
    "GoldDictionary",
    "EvalReport",
    "load_gold",
    "precision_at_k",
    "curate_pairs",
    "load_pairs",
    "save_pairs",
    "write_report_csv",
]


@dataclass(frozen=True)
class GoldDictionary:
    """Source word -> set of acceptable translations."""

    entries: Mapping[str, frozenset[str]]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("gold dictionary is empty")
        for src, trgs in self.entries.items():
            if not src or not trgs or any(not t for t in trgs):
                raise ValueError(f"invalid gold entry for {src!r}")
        object.__setattr__(self, "entries", {k: frozenset(v) for k, v in self.entries.items()})

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "GoldDictionary":
        entries: dict[str, set[str]] = {}
        for src, trg in pairs:
            entries.setdefault(src, set()).add(trg)
        return cls(entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass(frozen=True)
class EvalReport:
    precision_at: dict[int, float]
    evaluated: int
    skipped_oov: int
    coverage: float
    hits: dict[int, int] = field(default_factory=dict)


def load_pairs(path: str | PathLike) -> list[tuple[str, str]]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected '<src>\\t<trg>'")
            pairs.append((parts[0], parts[1]))
    return pairs


def save_pairs(path: str | PathLike, pairs: Iterable[tuple[str, str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for src, trg in pairs:
            f.write(f"{src}\t{trg}\n")


def load_gold(path: str | PathLike) -> GoldDictionary:
    """Gold TSV; repeated source lines accumulate into one acceptable set."""
    return GoldDictionary.from_pairs(load_pairs(path))


def precision_at_k(ranked: Mapping[str, Sequence[str]], gold: GoldDictionary,
                   k: int | Iterable[int] = 1, trg_vocab: Vocabulary | Iterable[str] | None = None) -> EvalReport:
    """Fraction of evaluable gold sources with an acceptable translation in their top ``k``.

    A gold source is evaluable when it has a ranked list; with ``trg_vocab``
    it additionally needs at least one acceptable target inside that
    vocabulary. Non-evaluable sources are counted in ``skipped_oov`` and
    left out of the denominator.

    Raises
    ------
    ValueError
        If ``k < 1`` or no gold source is evaluable.
    """
    ks = sorted({k} if isinstance(k, int) else set(k))
    if not ks or ks[0] < 1:
        raise ValueError("k must be >= 1")
    if trg_vocab is not None and not isinstance(trg_vocab, Vocabulary):
        trg_vocab = set(trg_vocab)
    hits = dict.fromkeys(ks, 0)
    evaluated = 0
    for src, acceptable in gold.entries.items():
        if src not in ranked:
            continue
        if trg_vocab is not None and not any(t in trg_vocab for t in acceptable):
            continue
        evaluated += 1
        preds = ranked[src]
        for kk in ks:
            if not acceptable.isdisjoint(preds[:kk]):
                hits[kk] += 1
    if evaluated == 0:
        raise ValueError("no gold source word is covered by the ranked output")
    return EvalReport(
        precision_at={kk: hits[kk] / evaluated for kk in ks},
        evaluated=evaluated,
        skipped_oov=len(gold) - evaluated,
        coverage=evaluated / len(gold),
        hits=hits,
    )


def curate_pairs(raw_pairs: Iterable[tuple[str, str]], src_vocab, trg_vocab,
                 roundtrip: Mapping[str, str] | None = None,
                 proper_nouns: Iterable[str] | None = None) -> list[tuple[str, str]]:
    """Drop candidate translation pairs that fail any curation rule.

    A pair is discarded when its back-translation differs from the source
    word (only if ``roundtrip`` is given), when either side is outside its
    vocabulary, when the target is a multi-word phrase, or when the source
    is listed in ``proper_nouns``. Order is preserved.
    """
    proper = set(proper_nouns or ())
    kept = []
    for src, trg in raw_pairs:
        if roundtrip is not None and roundtrip.get(src) != src:
            continue
        if src not in src_vocab or trg not in trg_vocab:
            continue
        if not trg or any(ch.isspace() for ch in trg):
            continue
        if src in proper:
            continue
        kept.append((src, trg))
    return kept


def write_report_csv(path: str | PathLike, rows: Iterable[tuple[str, EvalReport]]) -> None:
    """One CSV row per ``(experiment, k)``."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["experiment", "k", "precision", "hits", "evaluated", "skipped_oov", "coverage"])
        for name, report in rows:
            for kk, p in sorted(report.precision_at.items()):
                w.writerow([name, kk, repr(p), report.hits.get(kk, ""), report.evaluated,
                            report.skipped_oov, repr(report.coverage)])
