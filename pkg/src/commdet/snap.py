"""Ingestion of SNAP ground-truth community datasets.

Inputs follow the com-Amazon/com-DBLP/com-Youtube conventions: a (possibly
gzipped) edge list with '#' comments and a community file with one community
per line as tab-separated node ids (the published files already contain the
top-5000 quality communities).

Extraction: for every edge (i, j) that crosses two different communities, take
the two largest communities C1 containing i (with j not in C1) and C2
containing j (with i not in C2), and emit the induced subgraph on C1 union C2
with 3-class labels {C1-only, C2-only, C1-and-C2}. Oversized communities are
excluded up front; duplicate (C1, C2) pairs are emitted once. The train/test
split keeps test community ids disjoint from training community ids.
"""

from __future__ import annotations

import gzip
import warnings

import numpy as np

from .generators import LabeledGraph
from .graphs import build_graph

DEFAULT_MAX_COMMUNITY = 800
DEFAULT_MAX_COMMUNITIES = 5000

LABEL_C1_ONLY, LABEL_C2_ONLY, LABEL_BOTH = 0, 1, 2


def _open(path):
    return gzip.open(path, "rt") if str(path).endswith(".gz") else open(path)


def read_snap_edges(path) -> np.ndarray:
    edges = []
    with _open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: malformed edge line")
            edges.append((int(parts[0]), int(parts[1])))
    return np.asarray(edges, dtype=np.int64).reshape(-1, 2)


def read_snap_communities(path) -> list[list[int]]:
    comms = []
    with _open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            comms.append([int(tok) for tok in line.split()])
    return comms


def snap_build(edge_file, community_file, max_community=DEFAULT_MAX_COMMUNITY,
               max_communities=DEFAULT_MAX_COMMUNITIES, test_fraction=0.1,
               seed=0) -> list[LabeledGraph]:
    """Build the 3-class subgraph dataset from SNAP files.

    Returns LabeledGraph samples with meta['split'] in {'train', 'test'} and
    meta['communities'] holding the originating community index pair.
    """
    edges = read_snap_edges(edge_file)
    communities = read_snap_communities(community_file)[:max_communities]
    node_ids = set(edges.ravel().tolist())
    for idx, comm in enumerate(communities):
        for node in comm:
            if node not in node_ids:
                raise ValueError(
                    f"community {idx} references node {node} absent from the "
                    "edge list")
    kept = [(idx, frozenset(comm)) for idx, comm in enumerate(communities)
            if len(comm) <= max_community]
    sizes = {idx: len(c) for idx, c in kept}
    membership: dict[int, list[int]] = {}
    comm_sets = dict(kept)
    for idx, comm in kept:
        for node in comm:
            membership.setdefault(node, []).append(idx)

    # ties for "largest community" break toward the smaller community id
    def best_community(node, excluded_node):
        candidates = [c for c in membership.get(node, ())
                      if excluded_node not in comm_sets[c]]
        if not candidates:
            return None
        return min(candidates, key=lambda c: (-sizes[c], c))

    pairs = {}
    for i, j in edges:
        c1 = best_community(i, j)
        c2 = best_community(j, i)
        if c1 is None or c2 is None or c1 == c2:
            continue
        pairs.setdefault((min(c1, c2), max(c1, c2)), (c1, c2))

    if not pairs:
        warnings.warn("no community-crossing edges; dataset is empty")
        return []

    adjacency = {}
    for i, j in edges:
        adjacency.setdefault(int(i), set()).add(int(j))
        adjacency.setdefault(int(j), set()).add(int(i))

    ordered = sorted(pairs)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ordered))
    n_test = max(1, int(round(test_fraction * len(ordered))))
    test_comms, train_comms = set(), set()
    samples = []
    for pos in order:
        key = ordered[pos]
        c1, c2 = pairs[key]
        in_test = {c1, c2} & test_comms
        in_train = {c1, c2} & train_comms
        if in_test and in_train:
            continue  # would leak a community across the split
        if in_test or (not in_train and
                       sum(1 for s in samples
                           if s.meta["split"] == "test") < n_test):
            split, bucket = "test", test_comms
        else:
            split, bucket = "train", train_comms
        bucket.update((c1, c2))
        samples.append(_extract_subgraph(comm_sets[c1], comm_sets[c2],
                                         adjacency, (c1, c2), split))
    samples.sort(key=lambda s: s.meta["communities"])
    return samples


def _extract_subgraph(set1, set2, adjacency, comm_pair, split) -> LabeledGraph:
    nodes = sorted(set1 | set2)
    local = {node: idx for idx, node in enumerate(nodes)}
    sub_edges = [(local[u], local[v]) for u in nodes
                 for v in adjacency.get(u, ()) if v in local and u < v]
    graph = build_graph(len(nodes), sub_edges)
    labels = np.empty(len(nodes), dtype=np.int64)
    for node, idx in local.items():
        if node in set1 and node in set2:
            labels[idx] = LABEL_BOTH
        elif node in set1:
            labels[idx] = LABEL_C1_ONLY
        else:
            labels[idx] = LABEL_C2_ONLY
    return LabeledGraph(graph, labels,
                        {"k": 3, "source": "snap", "split": split,
                         "communities": comm_pair})
