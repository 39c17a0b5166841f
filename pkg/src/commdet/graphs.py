"""Immutable sparse graph representation and the local linear operators.

All graphs are simple and undirected, stored in CSR form with sorted column
indices. The canonical edge list is lexicographically sorted with i < j, which
fixes the node order of line graphs and the column order of the edge-incidence
matrix across runs.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class GraphConstructionError(ValueError):
    pass


class SparseGraph:
    """Simple undirected graph in CSR form.

    Attributes:
        n: node count.
        row_offsets, col_indices: CSR structure of the symmetric adjacency.
        edge_list: (m, 2) array of undirected edges with i < j, lex-sorted.
        m: undirected edge count.
    """

    __slots__ = ("n", "row_offsets", "col_indices", "edge_list", "m", "_adj")

    def __init__(self, n, row_offsets, col_indices, edge_list):
        self.n = int(n)
        self.row_offsets = row_offsets
        self.col_indices = col_indices
        self.edge_list = edge_list
        self.m = edge_list.shape[0]
        self._adj = sp.csr_matrix(
            (np.ones(len(col_indices), dtype=np.float64), col_indices, row_offsets),
            shape=(self.n, self.n),
        )

    @property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency as a scipy CSR matrix (do not mutate)."""
        return self._adj

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets).astype(np.float64)

    def neighbors(self, i) -> np.ndarray:
        return self.col_indices[self.row_offsets[i]:self.row_offsets[i + 1]]

    def __repr__(self):
        return f"SparseGraph(n={self.n}, m={self.m})"


class EdgeIncidence:
    """Node-by-edge 0/1 incidence matrix P with P[i, e] = 1 iff node i is an
    endpoint of edge e. Column order follows the graph's canonical edge list."""

    __slots__ = ("P", "Pt")

    def __init__(self, P: sp.csr_matrix):
        self.P = P
        self.Pt = P.T.tocsr()

    @property
    def shape(self):
        return self.P.shape


def build_graph(n, edges) -> SparseGraph:
    """Build a canonical SparseGraph from an edge iterable.

    Duplicate edges (in either orientation) are collapsed. Self-loops and
    out-of-range endpoints raise GraphConstructionError.
    """
    n = int(n)
    if n <= 0:
        raise GraphConstructionError(f"node count must be positive, got {n}")
    edges = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                       dtype=np.int64)
    if edges.size == 0:
        edges = edges.reshape(0, 2)
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise GraphConstructionError("edges must be pairs (i, j)")
    if edges.size:
        if edges.min() < 0 or edges.max() >= n:
            raise GraphConstructionError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise GraphConstructionError("self-loops are not allowed")
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    edge_list = np.unique(np.stack([lo, hi], axis=1), axis=0)
    return _from_canonical_edges(n, edge_list)


def _from_canonical_edges(n, edge_list) -> SparseGraph:
    """Assemble CSR from a deduplicated, canonical (i<j, lex-sorted) edge list."""
    m = edge_list.shape[0]
    rows = np.concatenate([edge_list[:, 0], edge_list[:, 1]])
    cols = np.concatenate([edge_list[:, 1], edge_list[:, 0]])
    adj = sp.csr_matrix((np.ones(2 * m), (rows, cols)), shape=(n, n))
    adj.sort_indices()
    return SparseGraph(n, adj.indptr.astype(np.int64),
                       adj.indices.astype(np.int64), edge_list)


def from_scipy_adjacency(adj: sp.spmatrix) -> SparseGraph:
    """Build a SparseGraph from a (structurally symmetric) sparse adjacency,
    discarding the diagonal and any numeric values."""
    coo = sp.coo_matrix(adj)
    keep = coo.row < coo.col
    edge_list = np.unique(
        np.stack([coo.row[keep], coo.col[keep]], axis=1).astype(np.int64), axis=0)
    return _from_canonical_edges(adj.shape[0], edge_list)


# ---------------------------------------------------------------------------
# local linear operators on node signals
# ---------------------------------------------------------------------------

def adjacency_apply(G: SparseGraph, X: np.ndarray) -> np.ndarray:
    """Row i of the output is the sum of X rows over neighbors of i."""
    X = _check_signal(G, X)
    return G.adjacency @ X


def degree_apply(G: SparseGraph, X: np.ndarray) -> np.ndarray:
    """Elementwise scaling of each row by the node degree."""
    X = _check_signal(G, X)
    return G.degrees()[:, None] * X


def degree_vector(G: SparseGraph) -> np.ndarray:
    """Node degrees as an (n, 1) column."""
    return G.degrees()[:, None]


def broadcast_apply(X: np.ndarray) -> np.ndarray:
    """Global average operator: every output row is the column mean of X."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return np.broadcast_to(X.mean(axis=0, keepdims=True), X.shape).copy()


def _check_signal(G, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != G.n:
        raise ValueError(f"signal has {X.shape[0]} rows, graph has {G.n} nodes")
    return X


# ---------------------------------------------------------------------------
# power graphs and line graphs
# ---------------------------------------------------------------------------

def power_graph(G: SparseGraph, j: int) -> SparseGraph:
    """Binary graph connecting u != v iff a walk of length exactly 2**j joins
    them in G; j = 0 returns G itself.

    The support is obtained by j boolean sparse squarings (structure only;
    never numeric matrix powers). Diagonal entries (closed walks) are dropped
    so the result stays a simple-graph adjacency.
    """
    if j < 0:
        raise ValueError("power level must be nonnegative")
    if j == 0:
        return G
    B = G.adjacency.copy()
    B.data = np.ones_like(B.data)
    for _ in range(j):
        B = B @ B
        B.data = np.ones_like(B.data)
    B.setdiag(0)
    B.eliminate_zeros()
    return from_scipy_adjacency(B)


def power_graph_adjacencies(G: SparseGraph, J: int) -> list[sp.csr_matrix]:
    """Adjacencies of power_graph(G, j) for j = 0..J-1, computed incrementally."""
    out = []
    B = G.adjacency.copy()
    B.data = np.ones_like(B.data)
    for j in range(J):
        if j > 0:
            B = B @ B
            B.data = np.ones_like(B.data)
        A = B.copy()
        A.setdiag(0)
        A.eliminate_zeros()
        out.append(A)
    return out


def line_graph(G: SparseGraph) -> tuple[SparseGraph, EdgeIncidence]:
    """Line graph L(G) on G's edges plus the node-edge incidence P.

    Two L(G) nodes are adjacent iff the corresponding edges of G share exactly
    one endpoint (distinct edges of a simple graph never share two). L(G) node
    order equals the canonical edge-list order of G.
    """
    if G.m < 1:
        raise GraphConstructionError("line graph requires at least one edge")
    m = G.m
    e = np.arange(m)
    rows = np.concatenate([G.edge_list[:, 0], G.edge_list[:, 1]])
    cols = np.concatenate([e, e])
    P = sp.csr_matrix((np.ones(2 * m), (rows, cols)), shape=(G.n, m))
    P.sort_indices()
    # off-diagonal support of P^T P counts shared endpoints (0 or 1 here)
    overlap = (P.T @ P).tocsr()
    overlap.setdiag(0)
    overlap.eliminate_zeros()
    return from_scipy_adjacency(overlap), EdgeIncidence(P)


# ---------------------------------------------------------------------------
# edge-list file format: one "i<TAB>j" per line, 0-based, '#' comments
# ---------------------------------------------------------------------------

def read_edge_list(path, n=None) -> SparseGraph:
    """Read a plain-text edge list (SNAP ungraph.txt convention).

    Node count defaults to max index + 1 unless given explicitly.
    """
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphConstructionError(f"{path}:{lineno}: expected 'i j'")
            edges.append((int(parts[0]), int(parts[1])))
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if n is None:
        n = int(edges.max()) + 1 if edges.size else 0
    return build_graph(n, edges)


def write_edge_list(G: SparseGraph, path):
    with open(path, "w") as fh:
        fh.write(f"# nodes {G.n} edges {G.m}\n")
        for i, j in G.edge_list:
            fh.write(f"{i}\t{j}\n")
