"""Multiscale power-graph GNN, its line-graph-coupled variant, and the
permutation-invariant losses.

Each layer mixes the generator family {I, D, U, A, A^2, ..., A^(2^(J-1))}
with trainable matrices, applies ReLU to the first half of the output
channels (the second half stays linear, acting as a residual/power-iteration
path), and normalizes every channel over the graph's nodes. Power-graph
generators default to the binarized dyadic adjacencies; a config switch keeps
the raw repeated-adjacency application instead.

The input bootstrap is the degree vector; the line-graph tower starts from
the line-graph degrees (configurable).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .checkpoint import save_checkpoint, load_checkpoint
from .graphs import SparseGraph, EdgeIncidence, line_graph, \
    power_graph_adjacencies, degree_vector


@dataclass
class GnnConfig:
    depth: int = 30
    width: int = 10
    J: int = 3
    classes: int = 2
    variant: str = "node_only"        # or "line_graph"
    edge_J: int | None = None         # line-graph tower J (defaults to J)
    edge_input: str = "degree"        # "degree" | "ones" | "incident_degree"
    binary_powers: bool = True        # binarized A^(2^j) vs raw application
    batch_norm: bool = True

    def __post_init__(self):
        if self.depth < 1 or self.classes < 2 or self.J < 1:
            raise ValueError("bad architecture: need depth>=1, classes>=2, J>=1")
        if self.width % 2:
            raise ValueError("width must be even (half ReLU / half linear)")
        if self.variant not in ("node_only", "line_graph"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.edge_J is None:
            self.edge_J = self.J


class GnnModel:
    """Architecture config plus a flat dict of named parameter arrays."""

    def __init__(self, cfg: GnnConfig, params: dict[str, np.ndarray]):
        self.cfg = cfg
        self.params = params

    @classmethod
    def init(cls, cfg: GnnConfig, seed=0, dtype=np.float32) -> "GnnModel":
        rng = np.random.default_rng(seed)
        params = {}

        def mat(name, d_in, d_out, fan_gens):
            std = 1.0 / math.sqrt(d_in * fan_gens)
            params[name] = (std * rng.standard_normal((d_in, d_out))).astype(dtype)

        w, gens = cfg.width, cfg.J + 3
        for k in range(cfg.depth):
            d_in = 1 if k == 0 else w
            for s in range(gens):
                mat(f"layer{k}.theta{s}", d_in, w, gens)
            if cfg.variant == "line_graph":
                e_in = 1 if k == 0 else w
                for s in range(cfg.edge_J + 3):
                    mat(f"layer{k}.gamma{s}", e_in, w, cfg.edge_J + 3)
                mat(f"layer{k}.delta", e_in, w, gens)      # edge -> node
                mat(f"layer{k}.delta_t", d_in, w, gens)    # node -> edge
        mat("readout", w, cfg.classes, 1)
        return cls(cfg, params)

    def astype(self, dtype) -> "GnnModel":
        return GnnModel(self.cfg,
                        {k: v.astype(dtype) for k, v in self.params.items()})

    def save(self, path):
        save_checkpoint(path, self.params, meta={"arch": asdict(self.cfg)})

    @classmethod
    def load(cls, path) -> "GnnModel":
        arrays, meta = load_checkpoint(path)
        return cls(GnnConfig(**meta["arch"]), arrays)


@dataclass
class GraphOperators:
    """Per-graph precomputation shared by every layer and every epoch."""
    deg: np.ndarray
    powers: list            # J sparse adjacencies (or [A] when not binarized)
    binary: bool = True
    J: int = 3

    @classmethod
    def build(cls, G: SparseGraph, J: int, binary: bool = True,
              dtype=np.float32):
        if binary:
            powers = [p.astype(dtype) for p in power_graph_adjacencies(G, J)]
        else:
            powers = [G.adjacency.astype(dtype)]
        return cls(deg=G.degrees().astype(dtype), powers=powers,
                   binary=binary, J=J)


def _apply_power(ops: GraphOperators, j: int, x):
    if ops.binary:
        return ad.spmm(ops.powers[j], x)
    for _ in range(2 ** j):
        x = ad.spmm(ops.powers[0], x)
    return x


def _mix_generators(x, thetas, ops: GraphOperators, use_bcast=True):
    z = ad.matmul(x, thetas[0])
    z = ad.add(z, ad.matmul(ad.row_scale(x, ops.deg), thetas[1]))
    if use_bcast:
        z = ad.add(z, ad.matmul(ad.broadcast_mean(x), thetas[2]))
    for j in range(ops.J):
        z = ad.add(z, ad.matmul(_apply_power(ops, j, x), thetas[3 + j]))
    return z


def _split_relu(z, width):
    half = width // 2
    return ad.concat_cols([ad.relu(ad.slice_cols(z, 0, half)),
                           ad.slice_cols(z, half, width)])


def gnn_forward(G: SparseGraph, model: GnnModel, precomp=None,
                dtype=np.float32):
    """Forward pass on the node graph.

    Returns (probs, logits, param_tensors, tape); param_tensors carry the
    gradients after autodiff.backward on a loss built from probs.
    """
    cfg = model.cfg
    ops = precomp or GraphOperators.build(G, cfg.J, cfg.binary_powers, dtype)
    tape = ad.Tape()
    pt = {name: tape.leaf(val, requires_grad=True)
          for name, val in model.params.items()}
    x = tape.leaf(ops.deg[:, None].astype(dtype))
    for k in range(cfg.depth):
        thetas = [pt[f"layer{k}.theta{s}"] for s in range(cfg.J + 3)]
        z = _split_relu(_mix_generators(x, thetas, ops), cfg.width)
        x = ad.batch_norm(z) if cfg.batch_norm else z
    logits = ad.matmul(x, pt["readout"])
    probs = ad.softmax_rows(logits)
    return probs, logits, pt, tape


def lgnn_forward(G: SparseGraph, LG: SparseGraph, P: EdgeIncidence,
                 model: GnnModel, precomp=None, edge_precomp=None,
                 dtype=np.float32):
    """Forward pass of the coupled node/edge towers.

    Each layer updates both towers from the previous layer's features; the
    node tower additionally receives delta * (P y) and the edge tower
    delta_t * (P^T x), both before normalization. Readout is from the node
    tower.
    """
    cfg = model.cfg
    if cfg.variant != "line_graph":
        raise ValueError("model is not a line_graph variant")
    if P.shape != (G.n, LG.n):
        raise ValueError("incidence shape does not match G and L(G)")
    ops = precomp or GraphOperators.build(G, cfg.J, cfg.binary_powers, dtype)
    eops = edge_precomp or GraphOperators.build(LG, cfg.edge_J,
                                                cfg.binary_powers, dtype)
    Pm = P.P.astype(dtype)
    Pt = P.Pt.astype(dtype)
    tape = ad.Tape()
    pt = {name: tape.leaf(val, requires_grad=True)
          for name, val in model.params.items()}
    x = tape.leaf(ops.deg[:, None].astype(dtype))
    y = tape.leaf(_edge_input(cfg.edge_input, eops, Pt, ops.deg, dtype))
    for k in range(cfg.depth):
        thetas = [pt[f"layer{k}.theta{s}"] for s in range(cfg.J + 3)]
        gammas = [pt[f"layer{k}.gamma{s}"] for s in range(cfg.edge_J + 3)]
        zx = _split_relu(_mix_generators(x, thetas, ops), cfg.width)
        zy = _split_relu(_mix_generators(y, gammas, eops), cfg.width)
        zx = ad.add(zx, ad.matmul(ad.spmm(Pm, y), pt[f"layer{k}.delta"]))
        zy = ad.add(zy, ad.matmul(ad.spmm(Pt, x), pt[f"layer{k}.delta_t"]))
        if cfg.batch_norm:
            zx, zy = ad.batch_norm(zx), ad.batch_norm(zy)
        x, y = zx, zy
    logits = ad.matmul(x, pt["readout"])
    probs = ad.softmax_rows(logits)
    return probs, logits, pt, tape


def _edge_input(mode, eops, Pt, node_deg, dtype):
    if mode == "degree":
        return eops.deg[:, None].astype(dtype)
    if mode == "ones":
        return np.ones((len(eops.deg), 1), dtype=dtype)
    if mode == "incident_degree":  # sum of endpoint degrees per edge
        return np.asarray(Pt @ node_deg[:, None], dtype=dtype)
    raise ValueError(f"unknown edge_input {mode!r}")


# ---------------------------------------------------------------------------
# losses and readout
# ---------------------------------------------------------------------------

MAX_EXACT_CLASSES = 6


def _class_nll_matrix(probs_value, truth, classes):
    """cost[c, c'] = sum over nodes with true class c of -log p[i, c']."""
    L = -np.log(np.maximum(probs_value, 1e-30))
    cost = np.zeros((classes, classes))
    for c in range(classes):
        mask = truth == c
        if mask.any():
            cost[c] = L[mask].sum(axis=0)
    return cost


def perm_invariant_loss(probs: ad.Tensor, truth: np.ndarray, classes: int):
    """Negative log-likelihood minimized over all global label permutations.

    Gradient flows through the minimizing permutation only. Returns
    (loss tensor, best permutation as a tuple mapping true -> predicted).
    """
    if classes > MAX_EXACT_CLASSES:
        raise ValueError(f"classes > {MAX_EXACT_CLASSES}: use cheap_perm_loss")
    truth = np.asarray(truth, dtype=np.int64)
    cost = _class_nll_matrix(probs.value, truth, classes)
    best_perm = min(itertools.permutations(range(classes)),
                    key=lambda s: sum(cost[c, s[c]] for c in range(classes)))
    mapped = np.asarray(best_perm, dtype=np.int64)[truth]
    return ad.neg_log_likelihood(probs, mapped), best_perm


def cheap_perm_loss(probs: ad.Tensor, truth: np.ndarray, classes: int,
                    subgroup: int):
    """Permutation loss restricted to the `subgroup` true classes where the
    model is most uncertain (largest per-class entropy); the remaining classes
    contribute their entropy instead of entering the permutation search."""
    if not 0 <= subgroup <= classes:
        raise ValueError("subgroup size must lie in [0, classes]")
    truth = np.asarray(truth, dtype=np.int64)
    p = probs.value
    entropies = np.zeros(classes)
    for c in range(classes):
        mask = truth == c
        pc = np.maximum(p[mask, c], 1e-30)
        entropies[c] = -(pc * np.log(pc)).sum()
    order = np.argsort(-entropies, kind="stable")
    selected = np.sort(order[:subgroup])
    rest = np.sort(order[subgroup:])
    terms = []
    best_perm = None
    if subgroup > 0:
        cost = _class_nll_matrix(p, truth, classes)
        best_perm = min(
            itertools.permutations(selected),
            key=lambda s: sum(cost[c, cc] for c, cc in zip(selected, s)))
        mapping = {int(c): int(cc) for c, cc in zip(selected, best_perm)}
        in_sel = np.isin(truth, selected)
        if in_sel.any():
            mapped = np.array([mapping[int(c)] for c in truth[in_sel]],
                              dtype=np.int64)
            terms.append(_masked_nll(probs, np.flatnonzero(in_sel), mapped))
    for c in rest:
        rows = np.flatnonzero(truth == c)
        if rows.size:
            terms.append(ad.class_entropy(probs, rows, int(c)))
    if not terms:
        return probs.tape.leaf(np.zeros(())) if probs.tape else \
            ad.Tensor(np.zeros(())), best_perm
    return (terms[0] if len(terms) == 1 else ad.add_scalar_tensors(terms),
            best_perm)


def _masked_nll(probs: ad.Tensor, rows, labels):
    picked = np.maximum(probs.value[rows, labels], 1e-30)

    def rule(g, probs=probs, rows=rows, labels=labels, picked=picked):
        out = np.zeros_like(probs.value)
        out[rows, labels] = -g / picked
        ad._accum(probs, out)
    return ad.Tensor(-np.log(picked).sum(), (probs,), rule)


def predict(probs) -> np.ndarray:
    """Argmax class per row, ties to the lowest class index."""
    value = probs.value if isinstance(probs, ad.Tensor) else np.asarray(probs)
    return np.argmax(value, axis=1).astype(np.int64)


def gnn_detect(G: SparseGraph, model: GnnModel, dtype=np.float32) -> np.ndarray:
    """Run the model on a graph and return hard labels."""
    if model.cfg.variant == "line_graph":
        LG, P = line_graph(G)
        probs, _, _, _ = lgnn_forward(G, LG, P, model, dtype=dtype)
    else:
        probs, _, _, _ = gnn_forward(G, model, dtype=dtype)
    return predict(probs)
