"""Training loop: single-graph batches, Adamax, permutation-invariant loss.

Training data can be an in-memory list of LabeledGraph (multiple epochs) or
any iterable/generator (streamed, one pass). Runs are deterministic given the
config and seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .generators import LabeledGraph
from .gnn import GnnModel, GraphOperators, gnn_forward, lgnn_forward, \
    perm_invariant_loss, predict
from .graphs import line_graph
from .metrics import overlap
from .optim import AdamaxState, adamax_step


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainRun:
    config: dict
    losses: list = field(default_factory=list)          # per step
    epoch_losses: list = field(default_factory=list)    # mean per epoch
    val_overlaps: list = field(default_factory=list)    # per epoch
    best_val_overlap: float = -np.inf
    checkpoint_path: str | None = None
    seed: int = 0


def _forward_sample(sample: LabeledGraph, model: GnnModel, cache: dict | None):
    cfg = model.cfg
    key = id(sample)
    if cache is not None and key in cache:
        pre = cache[key]
    else:
        pre = {"ops": GraphOperators.build(sample.graph, cfg.J,
                                           cfg.binary_powers)}
        if cfg.variant == "line_graph":
            LG, P = line_graph(sample.graph)
            pre["lg"] = (LG, P)
            pre["eops"] = GraphOperators.build(LG, cfg.edge_J,
                                               cfg.binary_powers)
        if cache is not None:
            cache[key] = pre
    if cfg.variant == "line_graph":
        LG, P = pre["lg"]
        return lgnn_forward(sample.graph, LG, P, model, precomp=pre["ops"],
                            edge_precomp=pre["eops"])
    return gnn_forward(sample.graph, model, precomp=pre["ops"])


def evaluate(model: GnnModel, samples) -> float:
    """Mean overlap of the model's hard predictions over a sample list."""
    scores = []
    for sample in samples:
        probs, _, _, _ = _forward_sample(sample, model, None)
        k = int(sample.meta.get("k", sample.truth.max() + 1))
        scores.append(overlap(sample.truth, predict(probs), k).overlap)
        probs.tape.nodes.clear()
    return float(np.mean(scores))


def train(model: GnnModel, train_data, *, epochs: int = 1, lr: float = 0.001,
          seed: int = 0, val_data=None, checkpoint_path=None,
          cache_operators: bool = False, log_every: int = 0,
          progress=None) -> TrainRun:
    """Optimize the model in place; returns the run record.

    train_data: list (reused across epochs) or iterable (single pass).
    cache_operators keeps per-graph power adjacencies across epochs (memory
    for speed; only sensible for smallish in-memory datasets).
    NaN losses or gradients abort with parameter/gradient norm diagnostics.
    """
    is_list = isinstance(train_data, (list, tuple))
    if is_list and not train_data:
        raise ValueError("empty training dataset")
    state = AdamaxState(lr=lr)
    run = TrainRun(config={"epochs": epochs, "lr": lr,
                           "arch": model.cfg.__dict__.copy()}, seed=seed)
    cache = {} if (cache_operators and is_list) else None
    t0 = time.time()
    for epoch in range(epochs):
        data = train_data if is_list else train_data
        epoch_losses = []
        for step, sample in enumerate(data):
            probs, _, pt, _ = _forward_sample(sample, model, cache)
            k = int(sample.meta.get("k", sample.truth.max() + 1))
            loss, _ = perm_invariant_loss(probs, sample.truth, k)
            loss_val = float(loss.value) / sample.graph.n
            if not np.isfinite(loss_val):
                raise TrainingDiverged(_diagnostics(model, pt, epoch, step))
            ad.backward(loss)
            grads = {name: t.grad / sample.graph.n
                     for name, t in pt.items() if t.grad is not None}
            adamax_step(model.params, grads, state)
            # tapes are reference cycles; clear eagerly so large activation
            # buffers are freed without waiting for gc
            loss.tape.nodes.clear()
            run.losses.append(loss_val)
            epoch_losses.append(loss_val)
            if log_every and (step + 1) % log_every == 0 and progress:
                progress(f"epoch {epoch} step {step + 1} "
                         f"loss {np.mean(epoch_losses[-log_every:]):.4f} "
                         f"({time.time() - t0:.0f}s)")
        run.epoch_losses.append(float(np.mean(epoch_losses)))
        if val_data is not None:
            score = evaluate(model, val_data)
            run.val_overlaps.append(score)
            if progress:
                progress(f"epoch {epoch} val overlap {score:.3f}")
            if score > run.best_val_overlap:
                run.best_val_overlap = score
                if checkpoint_path:
                    model.save(checkpoint_path)
                    run.checkpoint_path = str(checkpoint_path)
        elif checkpoint_path:
            model.save(checkpoint_path)
            run.checkpoint_path = str(checkpoint_path)
        if not is_list:
            break  # generators are single-pass
    return run


def _diagnostics(model, pt, epoch, step):
    lines = [f"non-finite loss at epoch {epoch} step {step}"]
    for name, t in pt.items():
        gnorm = np.linalg.norm(t.grad) if t.grad is not None else float("nan")
        lines.append(f"  {name}: |theta|={np.linalg.norm(t.value):.3e} "
                     f"|grad|={gnorm:.3e}")
    return "\n".join(lines)
