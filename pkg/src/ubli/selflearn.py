"""Self-learning loop: orthogonal mapping, re-weighting and stochastic dictionary induction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path

import numpy as np

from .dictionary import Dictionary, save_dictionary
from .embeddings import Vocabulary, check_matrix
from .preprocess import normalize
from .retrieval import RETRIEVAL_METHODS, best_matches

logger = logging.getLogger(__name__)

__all__ = [
    "MappingPair",
    "SelfLearnConfig",
    "AlignmentResult",
    "solve_orthogonal_mapping",
    "mapping_objective",
    "reweight",
    "induce_dictionary",
    "self_learn",
    "save_matrix",
    "load_matrix",
    "save_alignment",
]


@dataclass(frozen=True)
class MappingPair:
    w_x: np.ndarray
    w_z: np.ndarray
    s: np.ndarray

    def apply(self, x, z) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(x) @ self.w_x, np.asarray(z) @ self.w_z


@dataclass(frozen=True)
class SelfLearnConfig:
    dict_vocab_cutoff: int = 20000
    retrieval: str = "csls"
    csls_neighborhood: int = 10
    keep_prob_initial: float = 0.1
    keep_prob_factor: float = 2.0
    stall_patience: int = 50
    convergence_eps: float = 1e-6
    max_iters: int = 1000
    reweight_exponent: float = 0.5
    bidirectional: bool = True
    renormalize_each_iter: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.retrieval not in RETRIEVAL_METHODS:
            raise ValueError(f"retrieval must be one of {RETRIEVAL_METHODS}")
        if self.dict_vocab_cutoff < 1 or self.csls_neighborhood < 1:
            raise ValueError("dict_vocab_cutoff and csls_neighborhood must be >= 1")
        if not 0.0 < self.keep_prob_initial <= 1.0:
            raise ValueError("keep_prob_initial must be in (0, 1]")
        if self.keep_prob_factor <= 1.0:
            raise ValueError("keep_prob_factor must be > 1")
        if self.stall_patience < 1 or self.max_iters < 1:
            raise ValueError("stall_patience and max_iters must be >= 1")
        if not np.isfinite(self.reweight_exponent):
            raise ValueError("reweight_exponent must be finite")


@dataclass(frozen=True)
class AlignmentResult:
    mapping: MappingPair
    dictionary: Dictionary
    objective_trace: list[float]
    keep_prob_trace: list[float]
    iterations: int
    converged: bool
    reweight_exponent: float = 0.5
    renormalized: bool = field(default=False, repr=False)

    def transform(self, x, z) -> tuple[np.ndarray, np.ndarray]:
        """Map and re-weight full spaces exactly as the final retrieval step saw them."""
        xw, zw = self.mapping.apply(x, z)
        xr, zr = reweight(xw, zw, self.mapping.s, self.reweight_exponent)
        if self.renormalized:
            xr, zr = normalize(xr), normalize(zr)
        return xr, zr


def solve_orthogonal_mapping(x, z, d: Dictionary) -> MappingPair:
    """Orthogonal maps maximizing the summed similarity of dictionary pairs.

    With ``U S V^T = X^T D Z`` the solution is ``W_X = U`` and ``W_Z = V``.
    ``X^T D Z`` is accumulated directly from the indexed rows, so ``D`` is
    never materialized.
    """
    x = check_matrix(x, name="source matrix")
    z = check_matrix(z, name="target matrix")
    if x.shape[1] != z.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {z.shape[1]}")
    if len(d) == 0:
        raise ValueError("cannot solve the mapping for an empty dictionary")
    d.check_bounds(x.shape[0], z.shape[0])
    m = x[d.src].T @ z[d.trg]
    u, s, vt = np.linalg.svd(m)
    return MappingPair(w_x=u, w_z=vt.T, s=s)


def mapping_objective(x, z, d: Dictionary, w_x, w_z) -> float:
    """Sum over dictionary pairs of ``cos(X_i W_X, Z_j W_Z)``."""
    a = np.asarray(x)[d.src] @ w_x
    b = np.asarray(z)[d.trg] @ w_z
    num = np.einsum("ij,ij->i", a, b)
    return float(np.sum(num / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))))


def reweight(x_mapped, z_mapped, s, exponent: float) -> tuple[np.ndarray, np.ndarray]:
    """Scale both mapped spaces column-wise by ``s ** (exponent / 2)``.

    The cross-similarity ``X' Z'^T`` then equals ``X diag(s**exponent) Z^T``.
    """
    s = np.asarray(s, dtype=np.float64)
    if not np.isfinite(exponent):
        raise ValueError("exponent must be finite")
    if s.shape[0] != np.shape(x_mapped)[1]:
        raise ValueError("singular value vector length does not match the dimension")
    if exponent == 0:
        return np.array(x_mapped, dtype=np.float64), np.array(z_mapped, dtype=np.float64)
    scale = s ** (exponent / 2)
    return np.asarray(x_mapped) * scale, np.asarray(z_mapped) * scale


def _induce(x_al, z_al, cfg: SelfLearnConfig, keep_prob: float, rng) -> tuple[Dictionary, float]:
    n_x = min(cfg.dict_vocab_cutoff, x_al.shape[0])
    n_z = min(cfg.dict_vocab_cutoff, z_al.shape[0])
    xs, zs = x_al[:n_x], z_al[:n_z]
    k = cfg.csls_neighborhood
    fwd, fwd_score = best_matches(xs, zs, cfg.retrieval, k, keep_prob, rng)
    src, trg = [np.arange(n_x)], [fwd]
    objective = float(fwd_score.mean())
    if cfg.bidirectional:
        bwd, bwd_score = best_matches(zs, xs, cfg.retrieval, k, keep_prob, rng)
        src.append(bwd)
        trg.append(np.arange(n_z))
        objective = (objective + float(bwd_score.mean())) / 2
    return Dictionary(np.concatenate(src), np.concatenate(trg)), objective


def induce_dictionary(x_al, z_al, cfg: SelfLearnConfig, keep_prob: float = 1.0,
                      rng: np.random.Generator | None = None) -> Dictionary:
    """Induce a dictionary from two aligned spaces.

    Only the first ``cfg.dict_vocab_cutoff`` rows of each side take part.
    Every score is dropped (zeroed) with probability ``1 - keep_prob``
    before the per-row argmax. With ``cfg.bidirectional`` the target-to-source
    matches are added as ``(src, trg)`` pairs.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    return _induce(np.asarray(x_al, dtype=np.float64), np.asarray(z_al, dtype=np.float64),
                   cfg, keep_prob, rng)[0]


def self_learn(x, z, d0: Dictionary, cfg: SelfLearnConfig = SelfLearnConfig()) -> AlignmentResult:
    """Alternate Procrustes mapping and dictionary induction until convergence.

    The objective of an iteration is the mean winning retrieval score of the
    induced dictionary (averaged over both directions when bidirectional).
    After ``stall_patience`` consecutive iterations without an improvement of
    at least ``convergence_eps`` the keep probability is multiplied by
    ``keep_prob_factor`` (capped at 1); a stall at keep probability 1 ends the
    loop. If ``max_iters`` is reached first, the best-scoring iterate is
    returned with ``converged=False``.
    """
    x = check_matrix(x, name="source matrix")
    z = check_matrix(z, name="target matrix")
    if len(d0) == 0:
        raise ValueError("seed dictionary is empty")
    d0.check_bounds(x.shape[0], z.shape[0])
    rng = np.random.default_rng(cfg.seed)

    d = d0
    keep_prob = cfg.keep_prob_initial
    best_objective = -np.inf
    stall = 0
    objectives: list[float] = []
    keep_probs: list[float] = []
    best_state = None
    converged = False
    mapping = None
    for it in range(cfg.max_iters):
        mapping = solve_orthogonal_mapping(x, z, d)
        xw, zw = mapping.apply(x, z)
        xr, zr = reweight(xw, zw, mapping.s, cfg.reweight_exponent)
        if cfg.renormalize_each_iter:
            xr, zr = normalize(xr), normalize(zr)
        d, objective = _induce(xr, zr, cfg, keep_prob, rng)
        objectives.append(objective)
        keep_probs.append(keep_prob)
        logger.debug("iter %d keep_prob=%.3f objective=%.8f pairs=%d", it + 1, keep_prob, objective, len(d))

        if best_state is None or objective > best_state[0]:
            best_state = (objective, mapping, d)
        if objective - best_objective >= cfg.convergence_eps:
            best_objective = objective
            stall = 0
        else:
            stall += 1
        if stall >= cfg.stall_patience:
            if keep_prob >= 1.0:
                converged = True
                break
            keep_prob = min(1.0, keep_prob * cfg.keep_prob_factor)
            stall = 0

    if not converged:
        logger.warning("self-learning did not converge in %d iterations; returning best iterate", cfg.max_iters)
        _, mapping, d = best_state
    return AlignmentResult(
        mapping=mapping,
        dictionary=d,
        objective_trace=objectives,
        keep_prob_trace=keep_probs,
        iterations=len(objectives),
        converged=converged,
        reweight_exponent=cfg.reweight_exponent,
        renormalized=cfg.renormalize_each_iter,
    )


def save_matrix(path: str | PathLike, m) -> None:
    """Text matrix: ``<rows> <cols>`` header, then one whitespace-separated row per line."""
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{m.shape[0]} {m.shape[1]}\n")
        for row in m:
            f.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_matrix(path: str | PathLike) -> np.ndarray:
    with open(path, encoding="utf-8") as f:
        rows, cols = (int(t) for t in f.readline().split())
        m = np.loadtxt(f, dtype=np.float64, ndmin=2)
    if m.shape != (rows, cols):
        raise ValueError(f"{path}: header says {rows}x{cols}, found {m.shape}")
    return m


def save_alignment(directory: str | PathLike, result: AlignmentResult,
                   src_vocab: Vocabulary, trg_vocab: Vocabulary) -> None:
    """Write ``w_x.txt``, ``w_z.txt``, ``s.txt``, ``dictionary.tsv`` and ``trace.csv``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix(directory / "w_x.txt", result.mapping.w_x)
    save_matrix(directory / "w_z.txt", result.mapping.w_z)
    save_matrix(directory / "s.txt", result.mapping.s[None, :])
    save_dictionary(directory / "dictionary.tsv", result.dictionary, src_vocab, trg_vocab)
    with open(directory / "trace.csv", "w", encoding="utf-8", newline="\n") as f:
        f.write("iter,keep_prob,objective\n")
        for i, (p, obj) in enumerate(zip(result.keep_prob_trace, result.objective_trace), start=1):
            f.write(f"{i},{p!r},{obj!r}\n")

