"""Cosine and CSLS scoring between two embedding spaces, computed in row blocks.

Scores are never materialized beyond ``block_size`` rows at a time, so
retrieval over tens of thousands of words fits in desk-scale memory.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "RETRIEVAL_METHODS",
    "unit_rows",
    "topk_mean",
    "knn_mean_similarity",
    "score_matrix",
    "best_matches",
    "rank_targets",
    "top_indices",
    "pair_scores",
]

RETRIEVAL_METHODS = ("nearest_neighbor", "csls")
DEFAULT_BLOCK = 1024


def _check_method(method):
    if method not in RETRIEVAL_METHODS:
        raise ValueError(f"unknown retrieval method {method!r}, expected one of {RETRIEVAL_METHODS}")


def unit_rows(emb) -> np.ndarray:
    """Scale rows to unit length; all-zero rows are left at zero."""
    emb = np.asarray(emb, dtype=np.float64)
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return emb / norms


def topk_mean(sim: np.ndarray, k: int) -> np.ndarray:
    """Mean of the ``k`` largest entries of each row (``k`` clipped to the row length)."""
    k = min(k, sim.shape[1])
    if k <= 0:
        return np.zeros(sim.shape[0])
    part = np.partition(sim, sim.shape[1] - k, axis=1)[:, -k:]
    return part.mean(axis=1)


def knn_mean_similarity(a, b, k: int, block_size: int = DEFAULT_BLOCK) -> np.ndarray:
    """For each row of ``a``, mean cosine to its ``k`` nearest rows of ``b``."""
    a = unit_rows(a)
    b = unit_rows(b)
    out = np.empty(a.shape[0])
    for start in range(0, a.shape[0], block_size):
        stop = start + block_size
        out[start:stop] = topk_mean(a[start:stop] @ b.T, k)
    return out


def score_matrix(a, b, method: str = "csls", k: int = 10) -> np.ndarray:
    """Full ``(len(a), len(b))`` score table. Only for small inputs.

    ``nearest_neighbor`` gives cosines; ``csls`` gives
    ``2 cos(a_i, b_j) - r_b(a_i) - r_a(b_j)`` where ``r`` is the mean cosine
    to the ``k`` nearest neighbours in the other space.
    """
    _check_method(method)
    a = unit_rows(a)
    b = unit_rows(b)
    sim = a @ b.T
    if method == "nearest_neighbor":
        return sim
    return 2 * sim - topk_mean(sim, k)[:, None] - topk_mean(sim.T, k)[None, :]


def best_matches(a, b, method: str = "csls", k: int = 10, keep_prob: float = 1.0,
                 rng: np.random.Generator | None = None,
                 block_size: int = DEFAULT_BLOCK) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise argmax of the (optionally dropped-out) score table.

    Each score is independently set to zero with probability ``1 - keep_prob``
    before the argmax. The random stream is consumed row-major, so results do
    not depend on ``block_size``. Ties go to the lowest column index.

    Returns
    -------
    index : ndarray of int, shape (len(a),)
    score : ndarray of float, shape (len(a),)
        The winning (post-dropout) score of each row.
    """
    _check_method(method)
    if not 0.0 < keep_prob <= 1.0:
        raise ValueError(f"keep_prob must be in (0, 1], got {keep_prob}")
    if keep_prob < 1.0 and rng is None:
        raise ValueError("a random generator is required when keep_prob < 1")
    a = unit_rows(a)
    b = unit_rows(b)
    if method == "csls":
        r_a = knn_mean_similarity(a, b, k, block_size)
        r_b = knn_mean_similarity(b, a, k, block_size)
    idx = np.empty(a.shape[0], dtype=np.int64)
    best = np.empty(a.shape[0])
    for start in range(0, a.shape[0], block_size):
        stop = min(start + block_size, a.shape[0])
        scores = a[start:stop] @ b.T
        if method == "csls":
            scores = 2 * scores - r_a[start:stop, None] - r_b[None, :]
        if keep_prob < 1.0:
            scores = scores * (rng.random(scores.shape) < keep_prob)
        idx[start:stop] = scores.argmax(axis=1)
        best[start:stop] = scores[np.arange(stop - start), idx[start:stop]]
    return idx, best


def rank_targets(a, b, src_indices=None, topn: int = 10, method: str = "nearest_neighbor",
                 k: int = 10, block_size: int = DEFAULT_BLOCK) -> np.ndarray:
    """Top-``topn`` target indices for each requested source row, best first.

    Ordering is by descending score with ties to the lower target index.
    CSLS penalties are computed against the full spaces even when only a
    subset of sources is ranked.
    """
    _check_method(method)
    a = unit_rows(a)
    b = unit_rows(b)
    rows = np.arange(a.shape[0]) if src_indices is None else np.asarray(src_indices, dtype=np.int64)
    topn = min(topn, b.shape[0])
    if method == "csls":
        r_a = knn_mean_similarity(a[rows], b, k, block_size)
        r_b = knn_mean_similarity(b, a, k, block_size)
    out = np.empty((rows.size, topn), dtype=np.int64)
    for start in range(0, rows.size, block_size):
        stop = min(start + block_size, rows.size)
        scores = a[rows[start:stop]] @ b.T
        if method == "csls":
            scores = 2 * scores - r_a[start:stop, None] - r_b[None, :]
        out[start:stop] = top_indices(scores, topn)
    return out


def top_indices(scores: np.ndarray, topn: int) -> np.ndarray:
    """Column indices of the ``topn`` best entries per row, descending, stable on ties."""
    return np.argsort(-scores, axis=1, kind="stable")[:, :topn]


def pair_scores(a, b, src, trg, method: str = "csls", k: int = 10,
                block_size: int = DEFAULT_BLOCK) -> np.ndarray:
    """Scores of the given ``(src[i], trg[i])`` pairs under ``method``."""
    _check_method(method)
    a = unit_rows(a)
    b = unit_rows(b)
    src = np.asarray(src, dtype=np.int64)
    trg = np.asarray(trg, dtype=np.int64)
    sim = np.einsum("ij,ij->i", a[src], b[trg])
    if method == "nearest_neighbor":
        return sim
    r_a = knn_mean_similarity(a, b, k, block_size)
    r_b = knn_mean_similarity(b, a, k, block_size)
    return 2 * sim - r_a[src] - r_b[trg]
