"""Embedding-space transformations applied before initialization.

All functions are pure: inputs are never modified in place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import check_matrix

__all__ = [
    "LinearTransformSpec",
    "SELECTED_ALPHAS",
    "PcaModel",
    "length_normalize",
    "mean_center",
    "normalize",
    "pca_reduce",
    "linear_transform",
    "fuse",
]

EIGEN_FLOOR = 1e-12
RANK_TOL = 1e-10
CENTERED_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class LinearTransformSpec:
    """Per-language exponents for :func:`linear_transform`."""

    alpha_src: float = 0.0
    alpha_trg: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.alpha_src) and np.isfinite(self.alpha_trg)):
            raise ValueError("alpha values must be finite")

    @classmethod
    def selected(cls, language_pair: str, embedding_kind: str) -> "LinearTransformSpec":
        """Published grid-search pick, e.g. ``selected("en-si", "word2vec")``."""
        key = (language_pair.lower(), embedding_kind.lower())
        if key not in SELECTED_ALPHAS:
            raise KeyError(f"no selected alphas for {key}; known: {sorted(SELECTED_ALPHAS)}")
        return cls(*SELECTED_ALPHAS[key])


# (alpha_src, alpha_trg) chosen by grid search for the English-Sinhala/Tamil/Punjabi setups.
SELECTED_ALPHAS: dict[tuple[str, str], tuple[float, float]] = {
    ("en-si", "word2vec"): (0.15, 0.25),
    ("en-si", "fasttext"): (0.0, 0.25),
    ("en-si", "xlmr+word2vec"): (0.0, -0.5),
    ("en-si", "xlmr+fasttext"): (-0.15, 0.25),
    ("en-ta", "word2vec"): (0.15, 0.0),
    ("en-ta", "fasttext"): (0.15, 0.15),
    ("en-ta", "xlmr+word2vec"): (0.15, 0.0),
    ("en-ta", "xlmr+fasttext"): (0.15, 0.15),
    ("en-pa", "word2vec"): (-0.25, 0.0),
    ("en-pa", "fasttext"): (-0.15, 0.25),
    ("en-pa", "xlmr+word2vec"): (0.25, 0.0),
    ("en-pa", "xlmr+fasttext"): (0.25, 0.0),
}


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (d, r), orthonormal columns
    explained_variance: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    def transform(self, emb) -> np.ndarray:
        return (np.asarray(emb, dtype=np.float64) - self.mean) @ self.components


def length_normalize(emb, tol: float = 0.0) -> np.ndarray:
    """Scale rows to unit norm; rows with norm ``<= tol`` are an error."""
    emb = check_matrix(emb)
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    zero = np.flatnonzero(norms[:, 0] <= tol)
    if zero.size:
        raise ValueError(f"cannot length-normalize zero row at index {int(zero[0])}")
    return emb / norms


def mean_center(emb) -> np.ndarray:
    emb = check_matrix(emb)
    return emb - emb.mean(axis=0, keepdims=True)


def normalize(emb) -> np.ndarray:
    """Length-normalize, mean-center each dimension, then length-normalize again.

    Raises ``ValueError`` naming the first row that is zero at either
    normalization step (a single-row matrix always fails: centering it
    produces the zero vector).
    """
    # after centering unit rows, round-off alone can leave ~1e-16 residue
    return length_normalize(mean_center(length_normalize(emb)), tol=CENTERED_ZERO_TOL)


def _orient_columns(u: np.ndarray) -> np.ndarray:
    """Sign per column so that its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def pca_reduce(emb, target_dim: int) -> tuple[np.ndarray, PcaModel]:
    """Project centered embeddings onto their top ``target_dim`` principal axes.

    Uses an exact thin SVD of the centered matrix. Component signs are fixed
    so that the largest-magnitude entry of each left singular vector is
    positive, which makes the output reproducible across LAPACK builds.

    Returns
    -------
    reduced : ndarray of shape (n, target_dim)
    model : PcaModel
    """
    emb = check_matrix(emb)
    n, d = emb.shape
    if not 1 <= target_dim <= d:
        raise ValueError(f"target_dim must be in [1, {d}], got {target_dim}")
    if n <= target_dim:
        raise ValueError(f"need more rows ({n}) than target_dim ({target_dim})")
    mean = emb.mean(axis=0)
    centered = emb - mean
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    signs = _orient_columns(u)
    components = (vt.T * signs)[:, :target_dim]
    variance = s[:target_dim] ** 2 / (n - 1)
    model = PcaModel(mean=mean, components=components, explained_variance=variance)
    return centered @ components, model


def linear_transform(emb, alpha: float, eigen_floor: float = EIGEN_FLOOR) -> np.ndarray:
    """Re-weight ``emb`` by powers of its Gram eigenvalues: ``X @ Q @ diag(eig**alpha)``.

    With ``X.T @ X = Q diag(eig) Q.T`` the first-order similarity of the
    output equals the ``(2*alpha + 1)``-th order similarity of the input,
    ``(X X^T)^(2*alpha + 1)``. Eigenvalues are floored at ``eigen_floor``
    so negative ``alpha`` stays defined on rank-deficient input. ``alpha == 0``
    is a pure rotation and returns a copy of the input, so rankings stay
    bitwise identical to the untransformed space.
    """
    emb = check_matrix(emb)
    if not np.isfinite(alpha):
        raise ValueError(f"alpha must be finite, got {alpha}")
    if alpha == 0:
        return emb.copy()
    eig, q = np.linalg.eigh(emb.T @ emb)
    q = q * _orient_columns(q)
    with np.errstate(over="ignore", invalid="ignore"):
        scale = np.maximum(eig, eigen_floor) ** alpha
        out = (emb @ q) * scale
    if not np.all(np.isfinite(out)):
        raise ValueError(f"linear transform with alpha={alpha} produced non-finite values")
    return out


def _oriented_svd(emb):
    u, s, vt = np.linalg.svd(emb, full_matrices=False)
    signs = _orient_columns(u)
    return u * signs, s, (vt.T * signs)


def fuse(x, z) -> tuple[np.ndarray, np.ndarray]:
    """Rotate both spaces onto their right singular bases and equalize singular values.

    ``X' = X V_X diag(sqrt(S_Z / S_X))`` and ``Z' = Z V_Z diag(sqrt(S_X / S_Z))``,
    so both outputs end up with singular values ``sqrt(S_X * S_Z)``.
    """
    x = check_matrix(x, name="source matrix")
    z = check_matrix(z, name="target matrix")
    if x.shape[1] != z.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {z.shape[1]}")
    d = x.shape[1]
    if x.shape[0] < d or z.shape[0] < d:
        raise ValueError("fusion needs at least as many rows as dimensions in both spaces")
    _, s_x, v_x = _oriented_svd(x)
    _, s_z, v_z = _oriented_svd(z)
    if s_x[-1] <= RANK_TOL or s_z[-1] <= RANK_TOL:
        raise ValueError(
            f"rank-deficient input (smallest singular values {s_x[-1]:.3g}, {s_z[-1]:.3g})")
    x_new = (x @ v_x) * np.sqrt(s_z / s_x)
    z_new = (z @ v_z) * np.sqrt(s_x / s_z)
    return x_new, z_new
