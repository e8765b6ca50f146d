"""Unsupervised seed dictionaries.

The seed comes from comparing *sorted similarity rows*: under an exact
isometry the similarity matrices of the two languages are row/column
permutations of each other, so sorting each row removes the unknown column
permutation and leaves a language-independent signature per word.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dictionary import Dictionary
from .embeddings import check_matrix
from .preprocess import normalize, pca_reduce
from .retrieval import best_matches, pair_scores

logger = logging.getLogger(__name__)

__all__ = [
    "InitConfig",
    "signed_sqrt",
    "sorted_similarity",
    "unsupervised_init",
    "dimred_sweep",
    "iterative_dimred_init",
]


@dataclass(frozen=True)
class InitConfig:
    vocab_cutoff: int = 4000
    csls_neighborhood: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.vocab_cutoff < 2:
            raise ValueError("vocab_cutoff must be >= 2")
        if self.csls_neighborhood < 1:
            raise ValueError("csls_neighborhood must be >= 1")


def signed_sqrt(m):
    return np.sign(m) * np.sqrt(np.abs(m))


def sorted_similarity(emb) -> np.ndarray:
    """Row-sorted (ascending), signed-square-rooted self-similarity matrix, LN-MC-LN normalized."""
    sim = emb @ emb.T
    # signed sqrt is strictly increasing, so applying it before the sort is equivalent
    return normalize(np.sort(signed_sqrt(sim), axis=1))


def _init_with_score(x, z, cfg: InitConfig) -> tuple[Dictionary, float]:
    x = check_matrix(x, name="source matrix")
    z = check_matrix(z, name="target matrix")
    n = min(cfg.vocab_cutoff, x.shape[0], z.shape[0])
    try:
        sx = sorted_similarity(x[:n])
        sz = sorted_similarity(z[:n])
    except ValueError as exc:
        raise ValueError(f"degenerate input for unsupervised initialization: {exc}") from exc
    k = cfg.csls_neighborhood
    fwd, _ = best_matches(sx, sz, "csls", k)
    bwd, _ = best_matches(sz, sx, "csls", k)
    src = np.concatenate([np.arange(n), bwd])
    trg = np.concatenate([fwd, np.arange(n)])
    d = Dictionary(src, trg)
    score = float(pair_scores(sx, sz, d.src, d.trg, "csls", k).mean())
    return d, score


def unsupervised_init(x, z, cfg: InitConfig = InitConfig()) -> Dictionary:
    """Seed dictionary from sorted similarity rows of the first ``cfg.vocab_cutoff`` words.

    Both inputs should already be normalized and ordered by decreasing
    frequency. Matching is CSLS in both directions; the union of the two
    directions is returned without duplicates.
    """
    return _init_with_score(x, z, cfg)[0]


def _dims(start_dim, target_dim, step):
    if step < 1:
        raise ValueError("step must be >= 1")
    if target_dim > start_dim:
        raise ValueError(f"target_dim ({target_dim}) exceeds start_dim ({start_dim})")
    dims = list(range(start_dim, target_dim - 1, -step))
    if dims[-1] != target_dim:
        dims.append(target_dim)
    return dims


def dimred_sweep(x, z, start_dim: int, target_dim: int, step: int,
                 k_freq: int | None = None, cfg: InitConfig = InitConfig()) -> list[tuple[int, Dictionary, float]]:
    """Run PCA reduction + :func:`unsupervised_init` at each dimension of the sweep.

    Returns ``(dim, dictionary, score)`` for every visited dimension, largest
    first; ``score`` is the mean CSLS similarity of the dictionary's pairs.
    ``k_freq`` overrides ``cfg.vocab_cutoff`` (the number of most frequent
    words matched at each step).
    """
    if k_freq is not None:
        cfg = InitConfig(vocab_cutoff=k_freq, csls_neighborhood=cfg.csls_neighborhood, seed=cfg.seed)
    results = []
    for dim in _dims(start_dim, target_dim, step):
        xr = normalize(pca_reduce(x, dim)[0])
        zr = normalize(pca_reduce(z, dim)[0])
        d, score = _init_with_score(xr, zr, cfg)
        logger.debug("dimred init: dim=%d pairs=%d score=%.6f", dim, len(d), score)
        results.append((dim, d, score))
    return results


def iterative_dimred_init(x, z, start_dim: int, target_dim: int, step: int,
                          k_freq: int | None = None, cfg: InitConfig = InitConfig()) -> Dictionary:
    """Best seed dictionary across a descending sweep of PCA dimensions.

    Ties keep the larger dimension.
    """
    sweep = dimred_sweep(x, z, start_dim, target_dim, step, k_freq, cfg)
    best_dim, best, best_score = sweep[0]
    for dim, d, score in sweep[1:]:
        if score > best_score:
            best_dim, best, best_score = dim, d, score
    logger.info("dimred init selected dim=%d (score %.6f)", best_dim, best_score)
    return best
