"""Spectral community detectors.

Graph Laplacians, the Bethe Hessian BH(r) = (r^2 - 1) I - r A + D, the
non-backtracking operator, deflated power iteration for extremal eigenpairs,
and a k-means readout. The eigensolver is deliberately a shifted, deflated
power iteration (not Lanczos): it is adequate at the scales used here and it
is the exact computation the unrolled neural model mimics.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graphs import SparseGraph

OPERATOR_KINDS = (
    "laplacian_unnormalized",
    "laplacian_symmetric_normalized",
    "bethe_hessian",
    "adjacency",
)


@dataclass
class SpectralConfig:
    num_vectors: int = 2
    max_iter: int = 10000
    tol: float = 1e-8
    iter_budget: int | None = None  # hard step cap for the truncated baseline

    def __post_init__(self):
        if self.num_vectors < 1:
            raise ValueError("num_vectors must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


class GraphOperator:
    """Matrix-free symmetric operator on node signals."""

    def __init__(self, kind, G: SparseGraph, r: float | None = None):
        if kind not in OPERATOR_KINDS:
            raise ValueError(f"unknown operator kind {kind!r}")
        if kind == "bethe_hessian" and r is None:
            raise ValueError("bethe_hessian requires the scalar r")
        self.kind = kind
        self.G = G
        self.r = r
        self._deg = G.degrees()
        if kind == "laplacian_symmetric_normalized":
            with np.errstate(divide="ignore"):
                inv_sqrt = 1.0 / np.sqrt(self._deg)
            inv_sqrt[~np.isfinite(inv_sqrt)] = 0.0  # deg-0 rows stay zero
            self._inv_sqrt = inv_sqrt

    @property
    def n(self):
        return self.G.n

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        squeeze = X.ndim == 1
        if squeeze:
            X = X[:, None]
        if X.shape[0] != self.G.n:
            raise ValueError("operator/signal shape mismatch")
        A = self.G.adjacency
        if self.kind == "adjacency":
            Y = A @ X
        elif self.kind == "laplacian_unnormalized":
            Y = self._deg[:, None] * X - A @ X
        elif self.kind == "laplacian_symmetric_normalized":
            s = self._inv_sqrt[:, None]
            Y = s * (A @ (s * X))
            Y = np.where(self._deg[:, None] > 0, X - Y, 0.0)
        else:  # bethe_hessian
            r = self.r
            Y = (r * r - 1.0) * X - r * (A @ X) + self._deg[:, None] * X
        return Y[:, 0] if squeeze else Y

    def dense(self) -> np.ndarray:
        """Dense reference matrix (small graphs / tests only)."""
        return self.apply(np.eye(self.n))


def bethe_hessian_operator(G: SparseGraph, assoc: bool = True) -> GraphOperator:
    """BH(+sqrt(d)) for associative graphs, BH(-sqrt(d)) for disassociative,
    with d estimated from the realized graph as 2m/n."""
    d_avg = 2.0 * G.m / G.n
    r = np.sqrt(max(d_avg, 1.0))
    return GraphOperator("bethe_hessian", G, r=r if assoc else -r)


def operator_norm_estimate(op: GraphOperator, seed=0, steps=20, margin=1.05) -> float:
    """Spectral-norm estimate by a short power iteration, with a safety margin."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.n)
    v /= np.linalg.norm(v)
    est = 1.0
    for _ in range(steps):
        w = op.apply(v)
        est = np.linalg.norm(w)
        if est == 0:
            return margin
        v = w / est
    return margin * est


def power_fiedler(op: GraphOperator, deflate_against: np.ndarray,
                  cfg: SpectralConfig | None = None, seed=0, shift=None):
    """Second-extremal (smallest, after the deflated direction) eigenpair of a
    symmetric operator M via power iteration on shift*I - M.

    Returns (vector, value, converged). Convergence is alignment of successive
    iterates within cfg.tol. On non-convergence the best iterate is returned
    flagged.
    """
    cfg = cfg or SpectralConfig()
    V = np.asarray(deflate_against, dtype=np.float64).reshape(op.n, -1)
    vec, val, ok = _deflated_smallest(op, V, cfg, seed, shift)
    return vec, val, ok


def _deflated_smallest(op, V, cfg, seed, shift=None):
    """Smallest eigenpair of M orthogonal to the columns of V (may be empty)."""
    if shift is None:
        shift = operator_norm_estimate(op, seed=seed)
    rng = np.random.default_rng(seed + 1)
    w = rng.standard_normal(op.n)
    w = _orthogonalize(w, V)
    nrm = np.linalg.norm(w)
    if nrm == 0:
        raise ValueError("deflation space spans the whole space")
    w /= nrm
    converged = False
    for _ in range(cfg.max_iter):
        y = shift * w - op.apply(w)
        y = _orthogonalize(y, V)
        nrm = np.linalg.norm(y)
        if nrm < 1e-300:
            # iterate annihilated: restart from fresh noise
            y = _orthogonalize(rng.standard_normal(op.n), V)
            nrm = np.linalg.norm(y)
        y /= nrm
        if 1.0 - abs(float(w @ y)) < cfg.tol:
            w = y
            converged = True
            break
        w = y
    val = float(w @ op.apply(w))
    return w, val, converged


def _orthogonalize(w, V):
    if V.size:
        w = w - V @ (V.T @ w)
        w = w - V @ (V.T @ w)  # second pass for numerical orthogonality
    return w


def smallest_eigenpairs(op: GraphOperator, m: int,
                        cfg: SpectralConfig | None = None, seed=0):
    """The m algebraically smallest eigenpairs of a symmetric operator.

    Computed by iterated deflated power iteration on the spectrally shifted
    operator. Returns (values ascending, vectors as columns, converged flags).
    """
    cfg = cfg or SpectralConfig()
    shift = operator_norm_estimate(op, seed=seed)
    vectors = np.zeros((op.n, 0))
    values, flags = [], []
    for i in range(m):
        vec, val, ok = _deflated_smallest(op, vectors, cfg, seed + 7 * i, shift)
        vectors = np.hstack([vectors, vec[:, None]])
        values.append(val)
        flags.append(ok)
    order = np.argsort(values, kind="stable")
    return (np.asarray(values)[order], vectors[:, order],
            np.asarray(flags)[order])


def spectral_cluster(G: SparseGraph, k: int, method: str = "bh_assoc",
                     cfg: SpectralConfig | None = None, seed=0) -> np.ndarray:
    """Spectral clustering into k communities.

    method: 'laplacian_sym' (symmetric normalized Laplacian),
            'bh_assoc'  (Bethe Hessian at +sqrt(2m/n)),
            'bh_disassoc' (Bethe Hessian at -sqrt(2m/n)).
    Embeds nodes with the k bottom eigenvectors, then runs k-means.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if method == "laplacian_sym":
        op = GraphOperator("laplacian_symmetric_normalized", G)
    elif method == "bh_assoc":
        op = bethe_hessian_operator(G, assoc=True)
    elif method == "bh_disassoc":
        op = bethe_hessian_operator(G, assoc=False)
    else:
        raise ValueError(f"unknown method {method!r}")
    cfg = cfg or SpectralConfig(num_vectors=k)
    _, vectors, flags = smallest_eigenpairs(op, max(cfg.num_vectors, k), cfg, seed)
    if not np.all(flags):
        warnings.warn(f"eigensolver did not converge for {int((~flags).sum())} "
                      "vector(s); clustering on the best iterates")
    return kmeans(vectors, k, seed=seed)


def truncated_pm_baseline(G: SparseGraph, k: int, layers: int = 30,
                          seed=0) -> np.ndarray:
    """Fixed-budget power-method baseline on norm(BH)*I - BH(+sqrt(2m/n)).

    Runs exactly `layers` deflated power-iteration steps per embedding vector
    (no convergence check), then k-means. The step budget is meant to match
    the depth of the learned model it is compared against.
    """
    if layers < 1:
        raise ValueError("layers must be >= 1")
    op = bethe_hessian_operator(G, assoc=True)
    shift = operator_norm_estimate(op, seed=seed)
    rng = np.random.default_rng(seed + 1)
    vectors = np.zeros((G.n, 0))
    for i in range(k):
        w = _orthogonalize(rng.standard_normal(G.n), vectors)
        w /= np.linalg.norm(w)
        for _ in range(layers):
            w = shift * w - op.apply(w)
            w = _orthogonalize(w, vectors)
            nrm = np.linalg.norm(w)
            if nrm < 1e-300:
                w = _orthogonalize(rng.standard_normal(G.n), vectors)
                nrm = np.linalg.norm(w)
            w /= nrm
        vectors = np.hstack([vectors, w[:, None]])
    return kmeans(vectors, k, seed=seed)


# ---------------------------------------------------------------------------
# non-backtracking operator (diagnostics: calibrates BH's r via sqrt(rho(B)))
# ---------------------------------------------------------------------------

def nonbacktracking_matrix(G: SparseGraph) -> sp.csr_matrix:
    """Directed-edge operator B[(i->j),(k->l)] = [j == k][l != i], 2m x 2m.

    Directed edge 2e is i->j and 2e+1 is j->i for canonical edge e = (i, j).
    """
    if G.m < 1:
        raise ValueError("non-backtracking matrix requires at least one edge")
    m = G.m
    src = np.empty(2 * m, dtype=np.int64)
    dst = np.empty(2 * m, dtype=np.int64)
    src[0::2], dst[0::2] = G.edge_list[:, 0], G.edge_list[:, 1]
    src[1::2], dst[1::2] = G.edge_list[:, 1], G.edge_list[:, 0]
    rev = np.arange(2 * m) ^ 1
    # out-edges grouped by source node
    order = np.argsort(src, kind="stable")
    starts = np.searchsorted(src[order], np.arange(G.n + 1))
    rows, cols = [], []
    for d in range(2 * m):
        v = dst[d]
        conts = order[starts[v]:starts[v + 1]]
        conts = conts[conts != rev[d]]
        rows.append(np.full(len(conts), d))
        cols.append(conts)
    rows = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)),
                         shape=(2 * m, 2 * m))


def nb_spectral_radius(G: SparseGraph, iters: int = 500, seed=0) -> float:
    """Power-iteration estimate of rho(B) for the non-backtracking matrix.

    B is nonnegative but not symmetric, so the estimate is the converged
    growth factor ||B v|| / ||v|| of the iteration (a Rayleigh quotient would
    be wrong for non-normal B).
    """
    B = nonbacktracking_matrix(G)
    rng = np.random.default_rng(seed)
    v = np.abs(rng.standard_normal(B.shape[0])) + 1e-3
    v /= np.linalg.norm(v)
    rho = 0.0
    for _ in range(iters):
        w = B @ v
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0
        rho = nrm
        v = w / nrm
    return float(rho)


# ---------------------------------------------------------------------------
# k-means readout
# ---------------------------------------------------------------------------

def kmeans(points: np.ndarray, k: int, seed=0, restarts: int = 10,
           max_iter: int = 300) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding, best inertia over restarts.

    Deterministic given the seed. Ties in assignment go to the lowest-index
    centroid; an emptied cluster is reseeded from the point farthest from its
    centroid. Degenerate inputs (fewer distinct points than k) are allowed and
    flagged with a warning.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if k > n:
        raise ValueError("k exceeds number of points")
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        labels, inertia = _lloyd_once(X, k, rng, max_iter)
        if inertia < best_inertia - 1e-12:
            best_labels, best_inertia = labels, inertia
    if len(np.unique(best_labels)) < k:
        warnings.warn(f"k-means produced fewer than k={k} nonempty clusters")
    return best_labels


def _lloyd_once(X, k, rng, max_iter):
    n = X.shape[0]
    centroids = _kmeanspp(X, k, rng)
    labels = np.zeros(n, dtype=np.int64)
    for it in range(max_iter):
        d2 = _sqdist(X, centroids)
        new_labels = np.argmin(d2, axis=1)  # argmin ties -> lowest index
        if it > 0 and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            mask = labels == c
            if mask.any():
                centroids[c] = X[mask].mean(axis=0)
            else:
                far = np.argmax(np.take_along_axis(d2, labels[:, None], 1)[:, 0])
                centroids[c] = X[far]
                labels[far] = c
    d2 = _sqdist(X, centroids)
    labels = np.argmin(d2, axis=1)
    inertia = float(np.take_along_axis(d2, labels[:, None], 1).sum())
    return labels, inertia


def _kmeanspp(X, k, rng):
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = _sqdist(X, centroids[:1]).ravel()
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[c] = X[rng.integers(n)]
        else:
            centroids[c] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, _sqdist(X, centroids[c:c + 1]).ravel())
    return centroids


def _sqdist(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
