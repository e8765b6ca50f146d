"""Planted-alignment fixtures with a known ground-truth permutation.

The target space is a row-permuted, rotated (and optionally noisy) copy of
the source space: ``Z = P X O + noise``. ``perm[i]`` is the target row that
translates source row ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from os import PathLike
from pathlib import Path

import numpy as np

from .embeddings import Vocabulary, save_embeddings, save_frequencies

__all__ = [
    "PlantedPair",
    "SpringFixture",
    "random_orthogonal",
    "planted_pair",
    "planted_contextual",
    "spring_fixture",
    "recovery",
    "write_fixture",
]


@dataclass(frozen=True)
class PlantedPair:
    x: np.ndarray
    z: np.ndarray
    perm: np.ndarray  # source row i <-> target row perm[i]
    rotation: np.ndarray

    @property
    def n(self):
        return self.x.shape[0]


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR of a Gaussian with sign fix)."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def planted_pair(n: int = 300, d: int = 20, noise: float = 0.0, seed: int = 0,
                 permute: bool = True) -> PlantedPair:
    """Gaussian source space and its permuted, rotated copy.

    ``noise`` is the half-width of i.i.d. uniform noise added to the target.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    o = random_orthogonal(d, rng)
    perm = rng.permutation(n) if permute else np.arange(n)
    z = np.empty_like(x)
    z[perm] = x @ o
    if noise:
        z = z + rng.uniform(-noise, noise, size=z.shape)
    return PlantedPair(x=x, z=z, perm=perm, rotation=o)


def planted_contextual(pair: PlantedPair, d0: int = 32, noise: float = 0.0,
                       seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Contextual spaces sharing the planted permutation: ``A_y[perm] = A_x O_ctx``."""
    rng = np.random.default_rng(seed + 7919)
    a_x = rng.standard_normal((pair.n, d0))
    a_y = np.empty_like(a_x)
    a_y[pair.perm] = a_x @ random_orthogonal(d0, rng)
    if noise:
        a_y = a_y + rng.uniform(-noise, noise, size=a_y.shape)
    return a_x, a_y


@dataclass(frozen=True)
class SpringFixture:
    e_x: np.ndarray
    e_y: np.ndarray
    a_x: np.ndarray
    a_y: np.ndarray
    perm: np.ndarray


def spring_fixture(n: int = 200, d: int = 20, d0: int = 32, scale: float = 0.5,
                   seed: int = 0) -> SpringFixture:
    """Static spaces already in a shared frame but corrupted by a contextual-predictable offset.

    ``E_y[perm] = E_x + scale * tanh(A_x B)`` and ``A_y[perm] = A_x``: the
    contextual side is a clean copy of the planted alignment, while static
    retrieval alone confuses a share of rows. A spring network can learn to
    cancel the offset, so recovery after training should beat static-only.
    """
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    a_x = rng.standard_normal((n, d0))
    b = rng.standard_normal((d0, d)) / np.sqrt(d0)
    e_x = rng.standard_normal((n, d))
    e_x /= np.linalg.norm(e_x, axis=1, keepdims=True)
    e_y = np.empty_like(e_x)
    e_y[perm] = e_x + scale * np.tanh(a_x @ b)
    a_y = np.empty_like(a_x)
    a_y[perm] = a_x
    return SpringFixture(e_x, e_y, a_x, a_y, perm)


def recovery(pred, perm) -> float:
    """Fraction of source rows whose predicted target equals the planted one."""
    pred = np.asarray(pred)
    return float(np.mean(pred == np.asarray(perm)[: pred.shape[0]]))


def write_fixture(directory: str | PathLike, pair: PlantedPair, src_prefix: str = "s",
                  trg_prefix: str = "t", contextual: tuple[np.ndarray, np.ndarray] | None = None,
                  frequencies: np.ndarray | None = None) -> dict[str, Path]:
    """Write the planted pair as embedding files, frequency sidecars and a gold dictionary.

    Source word ``s{i}`` translates to target word ``t{i}``; target rows are
    stored in planted (permuted) order. Frequencies decrease with row index
    so that the file order is also frequency order, unless ``frequencies``
    (one count per source row, shared by its translation) is given.
    ``contextual`` adds ``src_ctx.vec`` and ``trg_ctx.vec``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n = pair.n
    inv = np.empty(n, dtype=np.int64)
    inv[pair.perm] = np.arange(n)
    src_words = [f"{src_prefix}{i}" for i in range(n)]
    trg_words = [f"{trg_prefix}{inv[j]}" for j in range(n)]
    paths = {
        "src": directory / "src.vec",
        "trg": directory / "trg.vec",
        "src_freq": directory / "src.freq",
        "trg_freq": directory / "trg.freq",
        "gold": directory / "gold.tsv",
    }
    save_embeddings(paths["src"], Vocabulary(tuple(src_words)), pair.x)
    save_embeddings(paths["trg"], Vocabulary(tuple(trg_words)), pair.z)
    counts = np.arange(10 * n, 9 * n, -1) if frequencies is None else np.asarray(frequencies)
    save_frequencies(paths["src_freq"], {w: int(counts[i]) for i, w in enumerate(src_words)})
    save_frequencies(paths["trg_freq"], {w: int(counts[inv[j]]) for j, w in enumerate(trg_words)})
    if contextual is not None:
        paths["src_ctx"] = directory / "src_ctx.vec"
        paths["trg_ctx"] = directory / "trg_ctx.vec"
        save_embeddings(paths["src_ctx"], Vocabulary(tuple(src_words)), contextual[0])
        save_embeddings(paths["trg_ctx"], Vocabulary(tuple(trg_words)), contextual[1])
    with open(paths["gold"], "w", encoding="utf-8") as f:
        for i in range(n):
            f.write(f"{src_prefix}{i}\t{trg_prefix}{i}\n")
    return paths
