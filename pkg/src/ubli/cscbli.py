"""Static + contextual combination for lexicon induction.

Each language gets a small two-layer tanh "spring" network that turns a
contextual vector into an offset for the mapped static vector::

    U = E' + gamma * tanh(tanh(A @ W0 + b0) @ W1 + b1)

The springs are trained with a margin contrastive loss over the current
dictionary, the dictionary is re-induced from the unified spaces, and the
two steps repeat until the dictionary stops changing. Final rankings mix
unified and contextual cosines: ``S = cos(U_x, U_y) + lam * cos(A0_x, A0_y)``.

Gradients are written out by hand (numpy only).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path

import numpy as np

from .dictionary import Dictionary
from .embeddings import check_matrix
from .preprocess import normalize
from .retrieval import best_matches, top_indices, unit_rows
from .selflearn import load_matrix, save_matrix, solve_orthogonal_mapping

logger = logging.getLogger(__name__)

__all__ = [
    "SpringParams",
    "CscbliConfig",
    "CscbliResult",
    "spring_forward",
    "build_unified",
    "map_contextual",
    "contrastive_loss",
    "contrastive_loss_and_grads",
    "train_cscbli",
    "interpolated_scores",
    "interpolate_rank",
    "save_spring_params",
    "load_spring_params",
]

PARAM_NAMES = ("w0", "b0", "w1", "b1", "gamma")


@dataclass
class SpringParams:
    w0: np.ndarray  # (d0, d)
    b0: np.ndarray  # (d,)
    w1: np.ndarray  # (d, d)
    b1: np.ndarray  # (d,)
    gamma: np.ndarray  # (d,)

    @classmethod
    def init(cls, d0: int, d: int, rng: np.random.Generator) -> "SpringParams":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, zero gains."""
        lim0, lim1 = 1 / np.sqrt(d0), 1 / np.sqrt(d)
        return cls(
            w0=rng.uniform(-lim0, lim0, (d0, d)),
            b0=np.zeros(d),
            w1=rng.uniform(-lim1, lim1, (d, d)),
            b1=np.zeros(d),
            gamma=np.zeros(d),
        )

    @classmethod
    def zeros(cls, d0: int, d: int) -> "SpringParams":
        return cls(np.zeros((d0, d)), np.zeros(d), np.zeros((d, d)), np.zeros(d), np.zeros(d))

    @property
    def dims(self) -> tuple[int, int]:
        return self.w0.shape

    def copy(self) -> "SpringParams":
        return SpringParams(*(getattr(self, n).copy() for n in PARAM_NAMES))

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in PARAM_NAMES}

    def check(self) -> None:
        d0, d = self.w0.shape
        shapes = {"b0": (d,), "w1": (d, d), "b1": (d,), "gamma": (d,)}
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"spring parameter {name} has shape {getattr(self, name).shape}, expected {shape}")
        for name, arr in self.arrays().items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"spring parameter {name} is not finite")


@dataclass(frozen=True)
class CscbliConfig:
    learning_rate: float = 1.0
    margin: float = 1.0
    negatives_per_pair: int = 5
    batch_size: int = 128
    epochs_per_round: int = 20
    refine_rounds: int = 10
    lam: float = 0.2
    csls_neighborhood: int = 10
    dict_vocab_cutoff: int = 20000
    bidirectional: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.negatives_per_pair < 1 or self.batch_size < 1:
            raise ValueError("negatives_per_pair and batch_size must be >= 1")
        if self.refine_rounds < 0 or self.epochs_per_round < 1:
            raise ValueError("refine_rounds must be >= 0 and epochs_per_round >= 1")


@dataclass
class CscbliResult:
    params_x: SpringParams
    params_y: SpringParams
    dictionary: Dictionary
    initial_dictionary: Dictionary
    loss_trace: list[float] = field(default_factory=list)
    rounds: int = 0
    stabilized: bool = False

    def __iter__(self):
        # unpacks as (params_x, params_y, dictionary)
        return iter((self.params_x, self.params_y, self.dictionary))


def _forward(a, p: SpringParams):
    h = np.tanh(a @ p.w0 + p.b0)
    out = np.tanh(h @ p.w1 + p.b1)
    return h, out


def spring_forward(a, p: SpringParams) -> np.ndarray:
    """Offsets ``tanh(tanh(A W0 + b0) W1 + b1)``, shape ``(len(a), d)``."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != p.w0.shape[0]:
        raise ValueError(f"contextual dimension {a.shape[-1]} does not match spring input {p.w0.shape[0]}")
    return _forward(a, p)[1]


def build_unified(e_mapped, a, p: SpringParams) -> np.ndarray:
    e_mapped = np.asarray(e_mapped, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if e_mapped.shape[0] != a.shape[0]:
        raise ValueError(f"row mismatch: {e_mapped.shape[0]} static vs {a.shape[0]} contextual")
    if e_mapped.shape[1] != p.w0.shape[1]:
        raise ValueError(f"static dimension {e_mapped.shape[1]} does not match spring output {p.w0.shape[1]}")
    return e_mapped + p.gamma * spring_forward(a, p)


def map_contextual(a_x, a_y, d: Dictionary) -> tuple[np.ndarray, np.ndarray]:
    """Normalize both contextual spaces and align them with Procrustes on ``d``."""
    a_x = normalize(check_matrix(a_x, name="source contextual matrix"))
    a_y = normalize(check_matrix(a_y, name="target contextual matrix"))
    mapping = solve_orthogonal_mapping(a_x, a_y, d)
    return mapping.apply(a_x, a_y)


def _cos_and_grad(u, v):
    """Row-wise cosine of ``u`` and ``v`` plus its gradients w.r.t. both."""
    nu = np.linalg.norm(u, axis=1, keepdims=True)
    nv = np.linalg.norm(v, axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):  # zero rows surface as a NaN loss
        uh, vh = u / nu, v / nv
        c = np.sum(uh * vh, axis=1, keepdims=True)
        du = (vh - c * uh) / nu
        dv = (uh - c * vh) / nv
    return c[:, 0], du, dv


def _unify_rows(e, a, p, rows):
    a_rows = a[rows]
    pre0 = a_rows @ p.w0 + p.b0
    h = np.tanh(pre0)
    off = np.tanh(h @ p.w1 + p.b1)
    return e[rows] + p.gamma * off, (a_rows, h, off)


def _backprop(p, cache, g_u, grads):
    """Accumulate parameter gradients given dL/dU for the cached rows."""
    a_rows, h, off = cache
    grads["gamma"] += np.sum(g_u * off, axis=0)
    g_pre1 = g_u * p.gamma * (1 - off ** 2)
    grads["w1"] += h.T @ g_pre1
    grads["b1"] += g_pre1.sum(axis=0)
    g_pre0 = (g_pre1 @ p.w1.T) * (1 - h ** 2)
    grads["w0"] += a_rows.T @ g_pre0
    grads["b0"] += g_pre0.sum(axis=0)


def contrastive_loss_and_grads(e_x, e_y, a_x, a_y, px: SpringParams, py: SpringParams,
                               src, trg, neg, margin: float):
    """Mean hinge loss ``max(0, margin - cos(Ux_i, Uy_j) + cos(Ux_i, Uy_n))`` and its gradients.

    ``src``, ``trg`` have shape ``(m,)``; ``neg`` has shape ``(m, k)`` and
    holds ``k`` negative target rows per pair. Returns
    ``(loss, grads_x, grads_y)`` where the gradient dicts are keyed like
    :class:`SpringParams` fields.
    """
    src = np.asarray(src)
    trg = np.asarray(trg)
    neg = np.asarray(neg).reshape(src.shape[0], -1)
    m, k = neg.shape
    ux, cache_x = _unify_rows(e_x, a_x, px, src)
    y_rows = np.concatenate([trg, neg.ravel()])
    uy, cache_y = _unify_rows(e_y, a_y, py, y_rows)
    uy_pos, uy_neg = uy[:m], uy[m:]

    ux_rep = np.repeat(ux, k, axis=0)
    uy_pos_rep = np.repeat(uy_pos, k, axis=0)
    c_pos, dpos_x, dpos_y = _cos_and_grad(ux_rep, uy_pos_rep)
    c_neg, dneg_x, dneg_y = _cos_and_grad(ux_rep, uy_neg)
    hinge = margin - c_pos + c_neg
    active = (hinge > 0).astype(np.float64)[:, None]
    n_terms = m * k
    loss = float(np.sum(np.maximum(hinge, 0.0)) / n_terms)

    w = active / n_terms
    g_ux = ((-dpos_x + dneg_x) * w).reshape(m, k, -1).sum(axis=1)
    g_uy_pos = (-dpos_y * w).reshape(m, k, -1).sum(axis=1)
    g_uy_neg = dneg_y * w
    g_uy = np.concatenate([g_uy_pos, g_uy_neg])

    grads_x = {n: np.zeros_like(v) for n, v in px.arrays().items()}
    grads_y = {n: np.zeros_like(v) for n, v in py.arrays().items()}
    _backprop(px, cache_x, g_ux, grads_x)
    _backprop(py, cache_y, g_uy, grads_y)
    return loss, grads_x, grads_y


def contrastive_loss(e_x, e_y, a_x, a_y, px, py, src, trg, neg, margin) -> float:
    """Loss only; recomputed from scratch (no shared code path with the gradient cache)."""
    ux = np.asarray(e_x)[src] + px.gamma * spring_forward(np.asarray(a_x)[src], px)
    neg = np.asarray(neg).reshape(len(src), -1)
    total = 0.0
    for r, (i, j) in enumerate(zip(src, trg)):
        uy_j = e_y[j] + py.gamma * spring_forward(a_y[j][None, :], py)[0]
        for n in neg[r]:
            uy_n = e_y[n] + py.gamma * spring_forward(a_y[n][None, :], py)[0]
            cp = ux[r] @ uy_j / (np.linalg.norm(ux[r]) * np.linalg.norm(uy_j))
            cn = ux[r] @ uy_n / (np.linalg.norm(ux[r]) * np.linalg.norm(uy_n))
            total += max(0.0, margin - cp + cn)
    return total / neg.size


def _sample_negatives(trg, n_trg, k, rng):
    """``k`` random target rows per pair, never equal to the pair's own target."""
    neg = rng.integers(0, n_trg - 1, size=(trg.shape[0], k))
    return neg + (neg >= trg[:, None])


def _induce(u_x, u_y, cfg: CscbliConfig) -> Dictionary:
    n_x = min(cfg.dict_vocab_cutoff, u_x.shape[0])
    n_y = min(cfg.dict_vocab_cutoff, u_y.shape[0])
    fwd, _ = best_matches(u_x[:n_x], u_y[:n_y], "csls", cfg.csls_neighborhood)
    src, trg = [np.arange(n_x)], [fwd]
    if cfg.bidirectional:
        bwd, _ = best_matches(u_y[:n_y], u_x[:n_x], "csls", cfg.csls_neighborhood)
        src.append(bwd)
        trg.append(np.arange(n_y))
    return Dictionary(np.concatenate(src), np.concatenate(trg))


def train_cscbli(e_x, e_y, a_x, a_y, cfg: CscbliConfig = CscbliConfig(),
                 init_params: tuple[SpringParams, SpringParams] | None = None) -> CscbliResult:
    """Train both spring networks and refine the dictionary until it stabilizes.

    ``e_x``, ``e_y`` are the mapped static spaces and ``a_x``, ``a_y`` the
    (mapped) contextual spaces, row-aligned with them. The starting
    dictionary is the CSLS induction on the static spaces alone. Each round
    runs ``epochs_per_round`` passes of plain SGD over the dictionary pairs
    with fresh random negatives, then re-induces the dictionary from the
    unified spaces. Training stops early once two consecutive rounds produce
    the same dictionary.
    """
    e_x = check_matrix(e_x, name="source static matrix")
    e_y = check_matrix(e_y, name="target static matrix")
    a_x = check_matrix(a_x, n_rows=e_x.shape[0], name="source contextual matrix")
    a_y = check_matrix(a_y, n_rows=e_y.shape[0], name="target contextual matrix")
    if e_x.shape[1] != e_y.shape[1] or a_x.shape[1] != a_y.shape[1]:
        raise ValueError("source and target spaces must share dimensions")
    if e_y.shape[0] < 2:
        raise ValueError("need at least two target words to sample negatives")
    rng = np.random.default_rng(cfg.seed)
    d0, d = a_x.shape[1], e_x.shape[1]
    if init_params is None:
        px = SpringParams.init(d0, d, np.random.default_rng(cfg.seed))
        py = px.copy()  # same starting point on both sides
    else:
        px, py = init_params[0].copy(), init_params[1].copy()
        px.check()
        py.check()

    dictionary = _induce(e_x, e_y, cfg)
    initial = dictionary
    losses: list[float] = []
    stabilized = False
    rounds = 0
    for _ in range(cfg.refine_rounds):
        rounds += 1
        for _ in range(cfg.epochs_per_round):
            order = rng.permutation(len(dictionary))
            for start in range(0, order.size, cfg.batch_size):
                batch = order[start:start + cfg.batch_size]
                src, trg = dictionary.src[batch], dictionary.trg[batch]
                neg = _sample_negatives(trg, e_y.shape[0], cfg.negatives_per_pair, rng)
                loss, gx, gy = contrastive_loss_and_grads(e_x, e_y, a_x, a_y, px, py, src, trg, neg, cfg.margin)
                if not np.isfinite(loss):
                    raise FloatingPointError(
                        f"contrastive loss diverged at round {rounds} (batch of {batch.size}, "
                        f"|gamma_x|={np.linalg.norm(px.gamma):.3g}, |gamma_y|={np.linalg.norm(py.gamma):.3g})")
                losses.append(loss)
                for name in PARAM_NAMES:
                    getattr(px, name)[...] -= cfg.learning_rate * gx[name]
                    getattr(py, name)[...] -= cfg.learning_rate * gy[name]
        new = _induce(build_unified(e_x, a_x, px), build_unified(e_y, a_y, py), cfg)
        logger.debug("cscbli round %d: loss=%.6f changed_pairs=%d", rounds,
                     losses[-1] if losses else float("nan"), len(new.as_set() ^ dictionary.as_set()))
        if new == dictionary:
            stabilized = True
            break
        dictionary = new
    return CscbliResult(px, py, dictionary, initial, losses, rounds, stabilized)


def _cosine_block(a, b):
    return unit_rows(a) @ unit_rows(b).T


def interpolated_scores(u_x, u_y, a0_x, a0_y, lam: float, src_indices=None) -> np.ndarray:
    """``cos(U_x, U_y) + lam * cos(A0_x, A0_y)`` for the requested source rows."""
    u_x, u_y = np.asarray(u_x, dtype=np.float64), np.asarray(u_y, dtype=np.float64)
    a0_x, a0_y = np.asarray(a0_x, dtype=np.float64), np.asarray(a0_y, dtype=np.float64)
    if u_x.shape[0] != a0_x.shape[0] or u_y.shape[0] != a0_y.shape[0]:
        raise ValueError("unified and contextual spaces are not row-aligned")
    rows = slice(None) if src_indices is None else np.asarray(src_indices, dtype=np.int64)
    return _cosine_block(u_x[rows], u_y) + lam * _cosine_block(a0_x[rows], a0_y)


def interpolate_rank(u_x, u_y, a0_x, a0_y, lam: float, src_indices=None, topn: int = 10,
                     block_size: int = 1024) -> np.ndarray:
    """Top-``topn`` targets per source by interpolated score, best first (ties to lower index)."""
    rows = np.arange(np.shape(u_x)[0]) if src_indices is None else np.asarray(src_indices, dtype=np.int64)
    topn = min(topn, np.shape(u_y)[0])
    out = np.empty((rows.size, topn), dtype=np.int64)
    for start in range(0, rows.size, block_size):
        block = rows[start:start + block_size]
        out[start:start + block.size] = top_indices(interpolated_scores(u_x, u_y, a0_x, a0_y, lam, block), topn)
    return out


def save_spring_params(directory: str | PathLike, px: SpringParams, py: SpringParams) -> None:
    """Bundle both networks: a ``manifest.txt`` with ``d0 d`` plus one text matrix per array."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    d0, d = px.dims
    (directory / "manifest.txt").write_text(f"{d0} {d}\n", encoding="utf-8")
    for side, p in (("x", px), ("y", py)):
        for name, arr in p.arrays().items():
            save_matrix(directory / f"{side}_{name}.txt", np.atleast_2d(arr))


def load_spring_params(directory: str | PathLike) -> tuple[SpringParams, SpringParams]:
    directory = Path(directory)
    d0, d = (int(t) for t in (directory / "manifest.txt").read_text(encoding="utf-8").split())
    out = []
    for side in ("x", "y"):
        arrs = {name: load_matrix(directory / f"{side}_{name}.txt") for name in PARAM_NAMES}
        for name in ("b0", "b1", "gamma"):
            arrs[name] = arrs[name][0]
        p = SpringParams(**arrs)
        if p.dims != (d0, d):
            raise ValueError(f"{directory}: parameter shapes do not match manifest {d0} {d}")
        p.check()
        out.append(p)
    return out[0], out[1]

