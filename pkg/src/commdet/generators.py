"""Random-graph samplers and dataset plumbing.

Stochastic block models in the constant-degree regime (p = a/n, q = b/n),
mixture curricula over (a, b), the Geometric Block Model, the Kesten-Stigum
signal-to-noise ratio, and on-disk datasets (edge-list files plus a CSV
manifest).

SBM sampling is O(|E|): per community pair the edge count is binomial and the
edges are then placed by sampling distinct pairs without replacement, so large
sweeps stay cheap.
"""

from __future__ import annotations

import csv
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .graphs import SparseGraph, _from_canonical_edges, \
    read_edge_list, write_edge_list


@dataclass
class SbmConfig:
    n: int
    k: int = 2
    a: float = 0.0   # within-community rate, p = a/n
    b: float = 0.0   # cross-community rate, q = b/n
    balanced: bool = True

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if not (0 <= self.a <= self.n and 0 <= self.b <= self.n):
            raise ValueError("rates a, b must lie in [0, n]")
        if self.balanced and self.n % self.k:
            raise ValueError("balanced SBM requires k | n")


@dataclass
class MixtureConfig:
    """Mixture curriculum: b ~ Unif(0, d_avg - sqrt(d_avg)), a = k*d_avg - b.

    d_avg is a fixed average degree, or the upper end t of Unif(1, t) when
    randomize_degree is set. two_sided additionally mirrors each draw to the
    disassociative side (a <-> b swapped) with probability 1/2.
    """
    n: int
    k: int = 2
    d_avg: float = 3.0
    count: int = 1
    randomize_degree: bool = False
    two_sided: bool = False

    def __post_init__(self):
        if self.d_avg <= 1:
            raise ValueError("average degree must exceed 1 (so d - sqrt(d) > 0)")


@dataclass
class GbmConfig:
    """Gaussian-mixture geometric graph: n points from k unit-covariance
    Gaussians with means pairwise S apart; edge iff distance <= T/sqrt(n)."""
    n: int
    k: int = 2
    d: int = 2
    S: float = 1.0   # mean separation
    T: float = 1.0   # radius scale

    def __post_init__(self):
        if self.S < 0 or self.T <= 0 or self.d < 1:
            raise ValueError("require S >= 0, T > 0, d >= 1")


@dataclass
class LabeledGraph:
    graph: SparseGraph
    truth: np.ndarray            # per-node labels in {0..k-1}
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.truth = np.asarray(self.truth, dtype=np.int64)
        if len(self.truth) != self.graph.n:
            raise ValueError("truth length must equal node count")


def snr(a: float, b: float, k: int, plus_convention: bool = False) -> float:
    """Kesten-Stigum signal-to-noise ratio (a-b)^2 / (k (a + (k-1) b)).

    SNR = 1 at the detectability threshold; for k=2 this reduces to
    (a-b)^2 = 2(a+b). plus_convention selects the (k+1) denominator variant.
    """
    kk = k + 1 if plus_convention else k - 1
    denom = k * (a + kk * b)
    if denom <= 0:
        raise ValueError("degenerate SNR denominator")
    return (a - b) ** 2 / denom


def snr_to_rates(target_snr: float, d_avg: float, k: int,
                 assoc: bool = True) -> tuple[float, float]:
    """Invert snr() at fixed average degree d_avg = (a + (k-1) b) / k."""
    gap = k * np.sqrt(d_avg * target_snr)
    if assoc:
        a, b = d_avg + (k - 1) / k * gap, d_avg - gap / k
    else:
        a, b = d_avg - (k - 1) / k * gap, d_avg + gap / k
    if min(a, b) < -1e-9:
        raise ValueError(f"SNR {target_snr} unreachable at degree {d_avg}")
    return max(a, 0.0), max(b, 0.0)


def _balanced_labels(n, k, rng):
    labels = np.repeat(np.arange(k), n // k)
    rng.shuffle(labels)
    return labels


def _decode_triangle(t):
    """Index t in the i<j triangle enumeration t = j(j-1)/2 + i -> (i, j)."""
    j = np.floor((1.0 + np.sqrt(1.0 + 8.0 * t)) / 2.0).astype(np.int64)
    # guard float rounding at block boundaries
    j = np.where(j * (j - 1) // 2 > t, j - 1, j)
    j = np.where((j + 1) * j // 2 <= t, j + 1, j)
    i = t - j * (j - 1) // 2
    return i, j


def _sample_pairs_within(nodes, p, rng):
    c = len(nodes)
    total = c * (c - 1) // 2
    if total == 0 or p <= 0:
        return np.empty((0, 2), dtype=np.int64)
    cnt = rng.binomial(total, min(p, 1.0))
    if cnt == 0:
        return np.empty((0, 2), dtype=np.int64)
    t = rng.choice(total, size=cnt, replace=False)
    i, j = _decode_triangle(t)
    return np.stack([nodes[i], nodes[j]], axis=1)


def _sample_pairs_cross(nodes_r, nodes_s, q, rng):
    total = len(nodes_r) * len(nodes_s)
    if total == 0 or q <= 0:
        return np.empty((0, 2), dtype=np.int64)
    cnt = rng.binomial(total, min(q, 1.0))
    if cnt == 0:
        return np.empty((0, 2), dtype=np.int64)
    t = rng.choice(total, size=cnt, replace=False)
    return np.stack([nodes_r[t // len(nodes_s)], nodes_s[t % len(nodes_s)]],
                    axis=1)


def sample_sbm(cfg: SbmConfig, seed=0) -> LabeledGraph:
    """One balanced SBM draw: community assignment by seeded shuffle, every
    pair connected independently with p = a/n (within) or q = b/n (cross)."""
    rng = np.random.default_rng(seed)
    n, k = cfg.n, cfg.k
    p, q = cfg.a / n, cfg.b / n
    if not (0 <= p <= 1 and 0 <= q <= 1):
        raise ValueError("edge probabilities outside [0, 1]")
    labels = _balanced_labels(n, k, rng) if cfg.balanced else \
        rng.integers(0, k, size=n)
    blocks = [np.flatnonzero(labels == c) for c in range(k)]
    chunks = []
    for r in range(k):
        chunks.append(_sample_pairs_within(blocks[r], p, rng))
        for s in range(r + 1, k):
            chunks.append(_sample_pairs_cross(blocks[r], blocks[s], q, rng))
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), np.int64)
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    edge_list = np.unique(np.stack([lo, hi], axis=1), axis=0)
    graph = _from_canonical_edges(n, edge_list)
    meta = {"a": cfg.a, "b": cfg.b, "k": k, "source": "sbm",
            "snr": snr(cfg.a, cfg.b, k) if cfg.a + (k - 1) * cfg.b > 0 else 0.0}
    return LabeledGraph(graph, labels, meta)


def sample_sbm_mixture(cfg: MixtureConfig, seed=0):
    """Stream of SBM draws from the mixture curriculum (see MixtureConfig).

    Per-sample seeds are derived from (seed, index) so samples form
    independent, reproducible streams.
    """
    for idx in range(cfg.count):
        rng = np.random.default_rng((seed, idx))
        d_avg = rng.uniform(1.0 + 1e-9, cfg.d_avg) if cfg.randomize_degree \
            else cfg.d_avg
        b = rng.uniform(0.0, d_avg - np.sqrt(d_avg))
        a = cfg.k * d_avg - b
        if cfg.two_sided and rng.random() < 0.5:
            a, b = _mirror_rates(a, b, cfg.k, d_avg)
        sample = sample_sbm(SbmConfig(cfg.n, cfg.k, a, b),
                            seed=int(rng.integers(2 ** 62)))
        sample.meta["d_avg"] = d_avg
        yield sample


def _mirror_rates(a, b, k, d_avg):
    """Disassociative mirror at the same average degree and |a - b| gap."""
    gap = a - b
    b2 = d_avg + (k - 1) / k * gap
    a2 = b2 - gap
    if a2 < 0:  # clamp, keeping the degree fixed
        a2 = 0.0
        b2 = k * d_avg / (k - 1)
    return a2, b2


def sample_gbm(cfg: GbmConfig, seed=0) -> LabeledGraph:
    """Geometric Block Model draw.

    Means sit at the vertices of a regular simplex scaled to pairwise distance
    S (for k=2: +-(S/2) e1); points are unit-covariance Gaussians around them;
    the truth is the mixture component; edges join points within T/sqrt(n).
    """
    rng = np.random.default_rng(seed)
    n, k, d = cfg.n, cfg.k, cfg.d
    labels = _balanced_labels(n, k, rng) if n % k == 0 else \
        rng.integers(0, k, size=n)
    means = _simplex_means(k, d, cfg.S)
    points = rng.standard_normal((n, d)) + means[labels]
    radius = cfg.T / np.sqrt(n)
    pairs = cKDTree(points).query_pairs(radius, output_type="ndarray")
    edge_list = np.unique(np.sort(pairs.astype(np.int64), axis=1), axis=0)
    graph = _from_canonical_edges(n, edge_list)
    meta = {"k": k, "S": cfg.S, "T": cfg.T, "d": d, "source": "gbm"}
    return LabeledGraph(graph, labels, meta)


def _simplex_means(k, d, S):
    if k - 1 > d:
        raise ValueError(f"cannot place {k} means pairwise equidistant in R^{d}")
    if S == 0:
        return np.zeros((k, d))
    if k == 2:
        means = np.zeros((2, d))
        means[0, 0], means[1, 0] = -S / 2.0, S / 2.0
        return means
    # regular simplex: identity corners centered, scaled to pairwise distance S
    corners = np.eye(k)
    corners -= corners.mean(axis=0)
    corners *= S / np.sqrt(2.0)  # identity corners are sqrt(2) apart
    means = np.zeros((k, d))
    means[:, :k] = corners
    return means


# ---------------------------------------------------------------------------
# on-disk datasets: directory of edge-list + label files plus a CSV manifest
# ---------------------------------------------------------------------------

MANIFEST_FIELDS = ["file", "n", "m", "k", "a", "b", "snr", "split"]


def save_dataset(samples, out_dir, split="train") -> str:
    """Write samples as edge-list/.labels file pairs plus manifest.csv.

    Appends to an existing manifest so train/test splits can share a
    directory. Returns the manifest path.
    """
    os.makedirs(out_dir, exist_ok=True)
    manifest = os.path.join(out_dir, "manifest.csv")
    new = not os.path.exists(manifest)
    start = 0
    if not new:
        with open(manifest) as fh:
            start = sum(1 for _ in fh) - 1
    with open(manifest, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS)
        if new:
            writer.writeheader()
        for i, sample in enumerate(samples, start):
            name = f"sample_{i:06d}"
            write_edge_list(sample.graph, os.path.join(out_dir, name + ".edges"))
            np.savetxt(os.path.join(out_dir, name + ".labels"),
                       sample.truth, fmt="%d")
            writer.writerow({
                "file": name + ".edges",
                "n": sample.graph.n,
                "m": sample.graph.m,
                "k": sample.meta.get("k", int(sample.truth.max()) + 1),
                "a": sample.meta.get("a", ""),
                "b": sample.meta.get("b", ""),
                "snr": sample.meta.get("snr", ""),
                "split": sample.meta.get("split", split),
            })
    return manifest


def load_dataset(dir_path, split=None) -> list[LabeledGraph]:
    manifest = os.path.join(dir_path, "manifest.csv")
    samples = []
    with open(manifest, newline="") as fh:
        for row in csv.DictReader(fh):
            if split is not None and row["split"] != split:
                continue
            graph = read_edge_list(os.path.join(dir_path, row["file"]),
                                   n=int(row["n"]))
            labels = np.loadtxt(
                os.path.join(dir_path, row["file"][:-6] + ".labels"),
                dtype=np.int64).reshape(-1)
            meta = {"k": int(row["k"]), "split": row["split"]}
            for key in ("a", "b", "snr"):
                if row[key]:
                    meta[key] = float(row[key])
            samples.append(LabeledGraph(graph, labels, meta))
    if not samples:
        warnings.warn(f"no samples loaded from {dir_path} (split={split})")
    return samples
