"""Minimal reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps an ndarray and remembers how it was produced; calling
`backward()` on a scalar walks the recorded graph and accumulates
gradients into the leaves that were created with `requires_grad=True`.

Precision policy: values are stored in the dtype they were created with
(single precision for model parameters), while every reduction (sums,
means, norms, normalization statistics) accumulates in double precision
before casting back. Graphs built from float64 leaves stay float64
end to end, which is what the finite-difference tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import NonScalarLoss, ShapeMismatch

_NORM_FLOOR = 1e-12  # guards divisions in norm/cosine backward rules


class Tensor:
    """One node of the computation tape."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], tuple] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        tag = self.name or ("leaf" if self._backward is None else "node")
        return f"Tensor({tag}, shape={self.data.shape}, dtype={self.data.dtype})"

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """Constant view of this node: gradients do not flow past it."""
        return Tensor(self.data)

    def backward(self):
        """Accumulate d(self)/d(leaf) into every reachable requires_grad leaf."""
        if self.data.size != 1:
            raise NonScalarLoss(f"backward needs a scalar, got shape {self.data.shape}")
        order = _toposort(self)
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def _toposort(root: Tensor) -> list[Tensor]:
    # Iterative postorder, pruned to the requires_grad subgraph.
    order: list[Tensor] = []
    seen = {id(root)}
    stack: list[tuple[Tensor, iter]] = [(root, iter(root._parents))]
    while stack:
        node, parents = stack[-1]
        pushed = False
        for p in parents:
            if p.requires_grad and id(p) not in seen:
                seen.add(id(p))
                stack.append((p, iter(p._parents)))
                pushed = True
                break
        if not pushed:
            order.append(node)
            stack.pop()
    return order


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _reduce(values: np.ndarray, axis=None, keepdims=False) -> np.ndarray:
    # Double-precision accumulation for every reduction.
    return values.sum(axis=axis, dtype=np.float64, keepdims=keepdims)


# ---------------------------------------------------------------------------
# elementwise and structural ops


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum of two same-shape tensors (residual connections)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}")
    return _node(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"sub: {a.shape} vs {b.shape}")
    return _node(a.data - b.data, (a, b), lambda g: (g, -g))


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a python scalar constant."""
    x = _as_tensor(x)
    c = float(c)
    return _node(x.data * np.asarray(c, dtype=x.dtype), (x,), lambda g: (g * c,))


def cmul(x: Tensor, const) -> Tensor:
    """Elementwise product with a constant array of the same shape."""
    x = _as_tensor(x)
    const = np.asarray(const, dtype=x.dtype)
    if const.shape != x.shape:
        raise ShapeMismatch(f"cmul: {x.shape} vs constant {const.shape}")
    return _node(x.data * const, (x,), lambda g: (g * const,))


def relu(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    mask = x.data > 0
    return _node(np.maximum(x.data, 0), (x,), lambda g: (g * mask,))


def repeat_rows(x: Tensor, k: int) -> Tensor:
    """Stack k copies of a batch along axis 0: (B, ...) -> (k*B, ...)."""
    x = _as_tensor(x)
    b = x.shape[0]
    reps = (k,) + (1,) * (x.data.ndim - 1)
    data = np.tile(x.data, reps)

    def bw(g):
        return (g.reshape((k, b) + x.shape[1:]).sum(axis=0, dtype=np.float64).astype(x.dtype),)

    return _node(data, (x,), bw)


def take_rows(x: Tensor, idx) -> Tensor:
    """Gather rows by constant integer index (duplicates allowed)."""
    x = _as_tensor(x)
    idx = np.asarray(idx, dtype=np.intp)

    def bw(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g)
        return (gx,)

    return _node(x.data[idx], (x,), bw)


def sum_all(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    return _node(_reduce(x.data).astype(x.dtype), (x,), lambda g: (np.broadcast_to(g, x.shape).astype(x.dtype, copy=False),))


def mean_all(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    n = x.data.size

    def bw(g):
        return ((np.broadcast_to(g, x.shape) / n).astype(x.dtype, copy=False),)

    return _node((_reduce(x.data) / n).astype(x.dtype), (x,), bw)


# ---------------------------------------------------------------------------
# network layers


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with x (B, n), w (n, m), b (m,)."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeMismatch(f"affine: x {x.shape} @ w {w.shape}")
    if b.shape != (w.shape[1],):
        raise ShapeMismatch(f"affine: bias {b.shape} for w {w.shape}")

    def bw(g):
        gx = g @ w.data.T if x.requires_grad else None
        gw = x.data.T @ g
        gb = _reduce(g, axis=0).astype(b.dtype)
        return gx, gw, gb

    return _node(x.data @ w.data + b.data, (x, w, b), bw)


def conv1d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """1-D convolution: x (B, C, T), w (O, C, K), b (O,) -> (B, O, T_out).

    Lowered to an im2col matmul so BLAS does the work; the column matrix
    is kept alive for the backward pass.
    """
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if x.data.ndim != 3 or w.data.ndim != 3 or x.shape[1] != w.shape[1]:
        raise ShapeMismatch(f"conv1d: x {x.shape} with w {w.shape}")
    out_ch, in_ch, k = w.shape
    if b.shape != (out_ch,):
        raise ShapeMismatch(f"conv1d: bias {b.shape} for w {w.shape}")
    batch, _, t = x.shape
    t_pad = t + 2 * padding
    if t_pad < k:
        raise ShapeMismatch(f"conv1d: window {t} too short for kernel {k} with padding {padding}")
    t_out = (t_pad - k) // stride + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    view = np.lib.stride_tricks.sliding_window_view(xp, k, axis=2)[:, :, ::stride]
    col = view.transpose(0, 2, 1, 3).reshape(batch * t_out, in_ch * k)
    wmat = w.data.reshape(out_ch, in_ch * k)
    out = (col @ wmat.T).reshape(batch, t_out, out_ch).transpose(0, 2, 1) + b.data[:, None]

    def bw(g):
        gmat = np.ascontiguousarray(g.transpose(0, 2, 1)).reshape(batch * t_out, out_ch)
        gw = (gmat.T @ col).reshape(out_ch, in_ch, k)
        gb = _reduce(g, axis=(0, 2)).astype(b.dtype)
        gx = None
        if x.requires_grad:
            gcol = (gmat @ wmat).reshape(batch, t_out, in_ch, k).transpose(0, 2, 1, 3)
            gxp = np.zeros((batch, in_ch, t_pad), dtype=x.dtype)
            for j in range(k):
                gxp[:, :, j : j + stride * t_out : stride] += gcol[:, :, :, j]
            gx = gxp[:, :, padding : padding + t] if padding else gxp
        return gx, gw, gb

    return _node(np.ascontiguousarray(out), (x, w, b), bw)


def group_norm(x: Tensor, gamma: Tensor, beta: Tensor, channels_per_group: int, eps: float = 1e-5) -> Tensor:
    """Group normalization over (channel group x time) within each sample.

    x (B, C, T); statistics are per (sample, group), so the output for a
    window never depends on what else is in the batch. Statistics
    accumulate in double precision; elementwise work stays in the
    storage dtype.
    """
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    if x.data.ndim != 3:
        raise ShapeMismatch(f"group_norm: expected (B, C, T), got {x.shape}")
    batch, ch, t = x.shape
    if gamma.shape != (ch,) or beta.shape != (ch,):
        raise ShapeMismatch(f"group_norm: affine shapes {gamma.shape}/{beta.shape} for {ch} channels")
    cpg = min(channels_per_group, ch)
    if ch % cpg:
        raise ShapeMismatch(f"group_norm: {ch} channels not divisible into groups of {cpg}")
    groups = ch // cpg
    n = cpg * t

    xg = x.data.reshape(batch, groups, n)
    mu = xg.mean(axis=-1, keepdims=True, dtype=np.float64).astype(x.dtype)
    xm = xg - mu
    var = np.mean(xm * xm, axis=-1, keepdims=True, dtype=np.float64)
    inv = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = xm * inv
    out = gamma.data[:, None] * xhat.reshape(batch, ch, t) + beta.data[:, None]

    def bw(g):
        ggamma = (g * xhat.reshape(batch, ch, t)).sum(axis=(0, 2), dtype=np.float64).astype(gamma.dtype)
        gbeta = g.sum(axis=(0, 2), dtype=np.float64).astype(beta.dtype)
        gx = None
        if x.requires_grad:
            gh = (g * gamma.data[:, None]).reshape(batch, groups, n)
            m1 = gh.mean(axis=-1, keepdims=True, dtype=np.float64).astype(x.dtype)
            m2 = np.mean(gh * xhat, axis=-1, keepdims=True, dtype=np.float64).astype(x.dtype)
            gx = (inv * (gh - m1 - xhat * m2)).reshape(batch, ch, t)
        return gx, ggamma, gbeta

    return _node(out, (x, gamma, beta), bw)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the time axis: (B, C, T) -> (B, C)."""
    x = _as_tensor(x)
    if x.data.ndim != 3:
        raise ShapeMismatch(f"global_avg_pool: expected (B, C, T), got {x.shape}")
    t = x.shape[2]

    def bw(g):
        return ((np.repeat(g[:, :, None], t, axis=2) / t).astype(x.dtype, copy=False),)

    return _node((_reduce(x.data, axis=2) / t).astype(x.dtype), (x,), bw)


# ---------------------------------------------------------------------------
# loss heads and vector ops


def mse_loss(pred: Tensor, target) -> Tensor:
    """Squared error summed per sample, averaged over the batch axis."""
    pred = _as_tensor(pred)
    tval = target.data if isinstance(target, Tensor) else np.asarray(target)
    if tval.shape != pred.shape:
        raise ShapeMismatch(f"mse_loss: pred {pred.shape} vs target {tval.shape}")
    batch = pred.shape[0]
    diff = pred.data.astype(np.float64) - tval.astype(np.float64)
    loss = _reduce(diff * diff) / batch

    def bw(g):
        return ((float(g) * 2.0 / batch * diff).astype(pred.dtype),)

    return _node(np.asarray(loss, dtype=pred.dtype), (pred,), bw)


def l2norm(x: Tensor) -> Tensor:
    """Rowwise Euclidean norm: (B, D) -> (B,)."""
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeMismatch(f"l2norm: expected (B, D), got {x.shape}")
    n = np.sqrt(_reduce(x.data.astype(np.float64) ** 2, axis=1))

    def bw(g):
        return (((g / np.maximum(n, _NORM_FLOOR))[:, None] * x.data).astype(x.dtype),)

    return _node(n.astype(x.dtype), (x,), bw)


def inner(u: Tensor, v: Tensor) -> Tensor:
    """Rowwise inner product: (B, D) x (B, D) -> (B,)."""
    u, v = _as_tensor(u), _as_tensor(v)
    if u.shape != v.shape or u.data.ndim != 2:
        raise ShapeMismatch(f"inner: {u.shape} vs {v.shape}")
    s = _reduce(u.data.astype(np.float64) * v.data.astype(np.float64), axis=1)

    def bw(g):
        return (g[:, None] * v.data, g[:, None] * u.data)

    return _node(s.astype(u.dtype), (u, v), bw)


def cosine_sim(u: Tensor, v: Tensor) -> Tensor:
    """Rowwise cosine similarity in [-1, 1]; denominators floored at 1e-12."""
    u, v = _as_tensor(u), _as_tensor(v)
    if u.shape != v.shape or u.data.ndim != 2:
        raise ShapeMismatch(f"cosine_sim: {u.shape} vs {v.shape}")
    u64 = u.data.astype(np.float64)
    v64 = v.data.astype(np.float64)
    nu = np.maximum(np.sqrt((u64 * u64).sum(axis=1)), _NORM_FLOOR)
    nv = np.maximum(np.sqrt((v64 * v64).sum(axis=1)), _NORM_FLOOR)
    c = (u64 * v64).sum(axis=1) / (nu * nv)

    def bw(g):
        g64 = g.astype(np.float64)
        gu = (g64 / (nu * nv))[:, None] * v64 - (g64 * c / nu**2)[:, None] * u64
        gv = (g64 / (nu * nv))[:, None] * u64 - (g64 * c / nv**2)[:, None] * v64
        return gu.astype(u.dtype), gv.astype(v.dtype)

    return _node(c.astype(u.dtype), (u, v), bw)


def rotate_rows(v: Tensor, angles) -> Tensor:
    """Rotate each 3-vector row about z by a constant per-row angle."""
    v = _as_tensor(v)
    if v.data.ndim != 2 or v.shape[1] != 3:
        raise ShapeMismatch(f"rotate_rows: expected (B, 3), got {v.shape}")
    phi = np.broadcast_to(np.asarray(angles, dtype=np.float64), (v.shape[0],))
    c, s = np.cos(phi), np.sin(phi)

    def rot(a, cc, ss):
        out = np.empty_like(a)
        out[:, 0] = cc * a[:, 0] - ss * a[:, 1]
        out[:, 1] = ss * a[:, 0] + cc * a[:, 1]
        out[:, 2] = a[:, 2]
        return out

    return _node(rot(v.data.astype(np.float64), c, s).astype(v.dtype), (v,), lambda g: (rot(g.astype(np.float64), c, -s).astype(v.dtype),))


# ---------------------------------------------------------------------------
# graph-level interface


@dataclass
class Tape:
    """Handle returned by evaluate_graph: the output node plus the fresh
    parameter leaves it was built from."""

    output: Tensor
    params: dict[str, Tensor]


def evaluate_graph(graph, params: Mapping[str, np.ndarray], inputs) -> tuple[np.ndarray, Tape]:
    """Evaluate `graph(param_tensors, input_tensor) -> Tensor`.

    Returns the output array and a tape whose leaves can be differentiated
    with `backward`. Deterministic for fixed (params, inputs).
    """
    pt = {name: Tensor(np.asarray(value), requires_grad=True, name=name) for name, value in params.items()}
    out = graph(pt, Tensor(np.asarray(inputs)))
    return out.data, Tape(out, pt)


def backward(tape: Tape, loss: Tensor | None = None) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss node w.r.t. every parameter on the tape.

    `loss` defaults to the tape output; parameters the loss does not
    depend on get zero gradients.
    """
    node = tape.output if loss is None else loss
    node.backward()
    return {name: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)) for name, leaf in tape.params.items()}
