"""Minimal reverse-mode autodiff over dense numpy arrays.

Only the handful of primitives the network needs: dense matmul, sparse-dense
products, elementwise arithmetic, ReLU, column slicing/concatenation, row
softmax, negative log-likelihood, per-graph batch normalization, and a masked
entropy term. Tensors record their parents and a backward rule at creation
(forward order); backward() replays that tape in reverse, which is a valid
reverse topological order by construction.

Arrays keep whatever dtype they come in with: float32 for training, float64
for gradient checks.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("value", "grad", "parents", "backward_rule", "requires_grad",
                 "tape")

    def __init__(self, value, parents=(), backward_rule=None,
                 requires_grad=False, tape=None):
        self.value = np.asarray(value)
        self.grad = None
        self.parents = parents
        self.backward_rule = backward_rule
        self.requires_grad = requires_grad or any(
            p.requires_grad for p in parents)
        self.tape = tape
        if tape is None:
            for p in parents:
                if p.tape is not None:
                    self.tape = p.tape
                    break
        if self.tape is not None and parents:
            self.tape.nodes.append(self)

    @property
    def shape(self):
        return self.value.shape


class Tape:
    """Forward-order record of non-leaf tensors for one forward pass."""

    def __init__(self):
        self.nodes = []

    def leaf(self, value, requires_grad=False) -> Tensor:
        return Tensor(value, requires_grad=requires_grad, tape=self)


def backward(loss: Tensor):
    """Accumulate gradients of a scalar loss into every requires_grad leaf."""
    if loss.value.size != 1:
        raise ValueError("backward expects a scalar loss")
    tape = loss.tape
    loss.grad = np.ones_like(loss.value)
    for node in reversed(tape.nodes):
        if node.grad is None or not node.requires_grad:
            continue
        if node.backward_rule is not None:
            node.backward_rule(node.grad)
    for node in tape.nodes:
        node.grad = None  # free intermediate buffers; leaves keep theirs


def _accum(t: Tensor, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad += g


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.value.shape[1] != b.value.shape[0]:
        raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")

    def rule(g, a=a, b=b):
        _accum(a, g @ b.value.T)
        _accum(b, a.value.T @ g)
    return Tensor(a.value @ b.value, (a, b), rule)


def spmm(S, x: Tensor) -> Tensor:
    """Constant sparse operator times dense tensor; adjoint is S^T."""
    if S.shape[1] != x.value.shape[0]:
        raise ValueError(f"spmm shape mismatch {S.shape} @ {x.shape}")
    St = S.T.tocsr()

    def rule(g, x=x, St=St):
        _accum(x, np.asarray(St @ g))
    return Tensor(np.asarray(S @ x.value), (x,), rule)


def row_scale(x: Tensor, scale: np.ndarray) -> Tensor:
    """Scale each row by a constant vector (the degree operator)."""
    scale = np.asarray(scale).reshape(-1, 1)
    if scale.shape[0] != x.value.shape[0]:
        raise ValueError("row_scale length mismatch")

    def rule(g, x=x, scale=scale):
        _accum(x, scale * g)
    return Tensor(scale * x.value, (x,), rule)


def broadcast_mean(x: Tensor) -> Tensor:
    """Every row of the output is the column mean; self-adjoint projection."""
    n = x.value.shape[0]

    def rule(g, x=x, n=n):
        _accum(x, np.broadcast_to(g.mean(axis=0, keepdims=True),
                                  g.shape).astype(g.dtype).copy())
    mean = np.broadcast_to(x.value.mean(axis=0, keepdims=True), x.value.shape)
    return Tensor(mean.copy(), (x,), rule)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.value.shape != b.value.shape:
        raise ValueError(f"add shape mismatch {a.shape} vs {b.shape}")

    def rule(g, a=a, b=b):
        _accum(a, g)
        _accum(b, g)
    return Tensor(a.value + b.value, (a, b), rule)


def scale(a: Tensor, c: float) -> Tensor:
    def rule(g, a=a, c=c):
        _accum(a, c * g)
    return Tensor(c * a.value, (a,), rule)


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0  # subgradient 0 at exactly 0

    def rule(g, a=a, mask=mask):
        _accum(a, g * mask)
    return Tensor(a.value * mask, (a,), rule)


def concat_cols(parts: list[Tensor]) -> Tensor:
    widths = [p.value.shape[1] for p in parts]
    offsets = np.cumsum([0] + widths)

    def rule(g, parts=parts, offsets=offsets):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            _accum(p, g[:, lo:hi])
    return Tensor(np.concatenate([p.value for p in parts], axis=1),
                  tuple(parts), rule)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    def rule(g, a=a, start=start, stop=stop):
        full = np.zeros_like(a.value)
        full[:, start:stop] = g
        _accum(a, full)
    return Tensor(a.value[:, start:stop].copy(), (a,), rule)


def softmax_rows(a: Tensor) -> Tensor:
    z = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)

    def rule(g, a=a, p=p):
        dot = (g * p).sum(axis=1, keepdims=True)
        _accum(a, p * (g - dot))
    return Tensor(p, (a,), rule)


def neg_log_likelihood(probs: Tensor, labels: np.ndarray) -> Tensor:
    """Summed -log probs[i, labels[i]]."""
    labels = np.asarray(labels, dtype=np.int64)
    n = probs.value.shape[0]
    if labels.shape != (n,):
        raise ValueError("labels must be one per row")
    picked = np.maximum(probs.value[np.arange(n), labels], 1e-30)

    def rule(g, probs=probs, labels=labels, picked=picked, n=n):
        out = np.zeros_like(probs.value)
        out[np.arange(n), labels] = -g / picked
        _accum(probs, out)
    return Tensor(-np.log(picked).sum(), (probs,), rule)


def class_entropy(probs: Tensor, rows: np.ndarray, col: int) -> Tensor:
    """Entropy term -sum_{i in rows} p[i, col] log p[i, col]."""
    rows = np.asarray(rows, dtype=np.int64)
    p = np.maximum(probs.value[rows, col], 1e-30)

    def rule(g, probs=probs, rows=rows, col=col, p=p):
        out = np.zeros_like(probs.value)
        out[rows, col] = -g * (np.log(p) + 1.0)
        _accum(probs, out)
    return Tensor(-(p * np.log(p)).sum(), (probs,), rule)


def add_scalar_tensors(terms: list[Tensor]) -> Tensor:
    def rule(g, terms=terms):
        for t in terms:
            _accum(t, g)
    return Tensor(sum(t.value for t in terms), tuple(terms), rule)


def batch_norm(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-column standardization over the node dimension, no learned affine.

    Output columns have mean 0 (hence orthogonal to the constant vector) and
    unit variance up to eps; a zero-variance column comes out all zero.
    """
    n = x.value.shape[0]
    if n < 2:
        raise ValueError("batch_norm needs at least 2 rows")
    mu = x.value.mean(axis=0, keepdims=True)
    var = x.value.var(axis=0, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    y = (x.value - mu) * inv_std

    def rule(g, x=x, y=y, inv_std=inv_std, n=n):
        gm = g.mean(axis=0, keepdims=True)
        gy = (g * y).mean(axis=0, keepdims=True)
        _accum(x, inv_std * (g - gm - y * gy))
    return Tensor(y, (x,), rule)
