"""Reverse-mode autodiff over float64 numpy arrays.

Every op records a closure that scatters the upstream gradient into its
parents; ``backward`` walks the graph once in reverse topological order.
Only the ops the model needs exist, nothing speculative.
"""

from contextlib import contextmanager

import numpy as np

from gridaste import kernels
from gridaste.errors import ShapeError

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (inference, decoding)."""
    global _grad_enabled
    saved = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = saved


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self) -> str:
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    def __add__(self, other):
        return add(self, as_tensor(other))

    def __sub__(self, other):
        return sub(self, as_tensor(other))

    def __mul__(self, other):
        return mul(self, as_tensor(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward) -> Tensor:
    """Wrap an op result, recording the graph only when it can matter."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to the shape the operand had before broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every tensor the scalar loss depends on."""
    if loss.data.size != 1:
        raise ShapeError(f"backward requires a scalar, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return
    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    loss.accumulate(np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------- arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def back(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.data.shape))

    return _make(data, (a, b), back)


def sub(a: Tensor, b: Tensor) -> Tensor:
    data = a.data - b.data

    def back(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate(-_unbroadcast(g, b.data.shape))

    return _make(data, (a, b), back)


def neg(a: Tensor) -> Tensor:
    def back(g):
        if a.requires_grad:
            a.accumulate(-g)

    return _make(-a.data, (a,), back)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def back(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), back)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)

    def back(g):
        if a.requires_grad:
            a.accumulate(g * s)

    return _make(a.data * s, (a,), back)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul operands must have rank >= 2")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul inner extents differ: {a.data.shape} x {b.data.shape}")
    data = a.data @ b.data

    def back(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape))

    return _make(data, (a, b), back)


# --------------------------------------------------------------- activations


def relu(x: Tensor) -> Tensor:
    data = np.maximum(x.data, 0.0)

    def back(g):
        if x.requires_grad:
            x.accumulate(g * (x.data > 0.0))

    return _make(data, (x,), back)


def sigmoid(x: Tensor) -> Tensor:
    # two-branch form avoids exp overflow on large |x|
    pos = x.data >= 0
    z = np.empty_like(x.data)
    z[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ez = np.exp(x.data[~pos])
    z[~pos] = ez / (1.0 + ez)

    def back(g):
        if x.requires_grad:
            x.accumulate(g * z * (1.0 - z))

    return _make(z, (x,), back)


def log(x: Tensor) -> Tensor:
    def back(g):
        if x.requires_grad:
            x.accumulate(g / x.data)

    return _make(np.log(x.data), (x,), back)


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes only where the input was in range."""
    data = np.clip(x.data, lo, hi)
    mask = (x.data >= lo) & (x.data <= hi)

    def back(g):
        if x.requires_grad:
            x.accumulate(g * mask)

    return _make(data, (x,), back)


def softmax_rows(x: Tensor) -> Tensor:
    """Softmax over the last axis with max-subtraction for stability."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        if x.requires_grad:
            dot = (g * y).sum(axis=-1, keepdims=True)
            x.accumulate(y * (g - dot))

    return _make(y, (x,), back)


# ------------------------------------------------------------- shape movers


def concat_lastdim(parts: list[Tensor]) -> Tensor:
    lead = parts[0].data.shape[:-1]
    for p in parts[1:]:
        if p.data.shape[:-1] != lead:
            raise ShapeError("concat_lastdim operands disagree on leading extents")
    data = np.concatenate([p.data for p in parts], axis=-1)
    widths = [p.data.shape[-1] for p in parts]

    def back(g):
        offset = 0
        for p, w in zip(parts, widths):
            if p.requires_grad:
                p.accumulate(g[..., offset : offset + w])
            offset += w

    return _make(data, tuple(parts), back)


def transpose(x: Tensor, axes: tuple[int, ...] | None = None) -> Tensor:
    data = np.transpose(x.data, axes)
    inverse = None if axes is None else tuple(np.argsort(axes))

    def back(g):
        if x.requires_grad:
            x.accumulate(np.transpose(g, inverse))

    return _make(data, (x,), back)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    def back(g):
        if x.requires_grad:
            x.accumulate(g.reshape(x.data.shape))

    return _make(x.data.reshape(shape), (x,), back)


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    """Select rows by integer index; duplicate indices sum in backward."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError("gather_rows expects a flat index vector")
    data = x.data[idx]

    def back(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.add.at(gx, idx, g)
            x.accumulate(gx)

    return _make(data, (x,), back)


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    def back(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            gx[start:stop] = g
            x.accumulate(gx)

    return _make(x.data[start:stop], (x,), back)


# ---------------------------------------------------------------- reductions


def sum_all(x: Tensor) -> Tensor:
    def back(g):
        if x.requires_grad:
            x.accumulate(np.full_like(x.data, float(g)))

    return _make(x.data.sum(), (x,), back)


def max_reduce(x: Tensor, axis: int) -> Tensor:
    """Max along one axis; ties send the gradient to the first index."""
    data = x.data.max(axis=axis)
    am = np.expand_dims(x.data.argmax(axis=axis), axis)

    def back(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.put_along_axis(gx, am, np.expand_dims(g, axis), axis)
            x.accumulate(gx)

    return _make(data, (x,), back)


# ----------------------------------------------------------- model-shaped ops


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis, then apply elementwise gain and bias."""
    mu = x.data.mean(axis=-1, keepdims=True)
    var = ((x.data - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    data = gain.data * xhat + bias.data

    def back(g):
        lead = tuple(range(g.ndim - 1))
        if gain.requires_grad:
            gain.accumulate((g * xhat).sum(axis=lead))
        if bias.requires_grad:
            bias.accumulate(g.sum(axis=lead))
        if x.requires_grad:
            dxhat = g * gain.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            x.accumulate(inv * (dxhat - m1 - xhat * m2))

    return _make(data, (x, gain, bias), back)


def span_max_pool(h: Tensor) -> Tensor:
    """out[i, j] = elementwise max of h over words min(i,j)..max(i,j)."""
    data, arg = kernels.span_pool_forward(np.ascontiguousarray(h.data))
    n = h.data.shape[0]

    def back(g):
        if h.requires_grad:
            h.accumulate(kernels.span_pool_backward(arg, np.ascontiguousarray(g), n))

    return _make(data, (h,), back)


def grid_neighbor_agg(g_in: Tensor, wh: Tensor, wv: Tensor) -> Tensor:
    """Weighted 4-neighbor aggregation over the n x n grid.

    wh[j] weights arcs leaving column j sideways; wv[i] weights arcs leaving
    row i up or down. Border neighbors are simply absent.
    """
    n = g_in.data.shape[0]
    if wh.data.shape != (n,) or wv.data.shape != (n,):
        raise ShapeError("edge weight vectors must match the grid side length")
    data = kernels.neighbor_agg_forward(
        np.ascontiguousarray(g_in.data),
        np.ascontiguousarray(wh.data),
        np.ascontiguousarray(wv.data),
    )

    def back(g):
        gg, gwh, gwv = kernels.neighbor_agg_backward(
            np.ascontiguousarray(g_in.data),
            np.ascontiguousarray(wh.data),
            np.ascontiguousarray(wv.data),
            np.ascontiguousarray(g),
        )
        if g_in.requires_grad:
            g_in.accumulate(gg)
        if wh.requires_grad:
            wh.accumulate(gwh)
        if wv.requires_grad:
            wv.accumulate(gwv)

    return _make(data, (g_in, wh, wv), back)


def pairwise_bilinear(h: Tensor, w: Tensor) -> Tensor:
    """b[i, j, k] = h_i . W[:, k, :] . h_j for every word pair."""
    if w.ndim != 3 or h.data.shape[1] != w.data.shape[0] or h.data.shape[1] != w.data.shape[2]:
        raise ShapeError(f"bilinear shapes disagree: h {h.data.shape}, W {w.data.shape}")
    data = np.einsum("ia,akb,jb->ijk", h.data, w.data, h.data, optimize=True)

    def back(g):
        if w.requires_grad:
            w.accumulate(np.einsum("ia,jb,ijk->akb", h.data, h.data, g, optimize=True))
        if h.requires_grad:
            gh = np.einsum("akb,jb,ijk->ia", w.data, h.data, g, optimize=True)
            gh += np.einsum("ia,akb,ijk->jb", h.data, w.data, g, optimize=True)
            h.accumulate(gh)

    return _make(data, (h, w), back)


def rect_max_pool(c: Tensor, regions: list[tuple[int, int, int, int]]) -> Tensor:
    """Per-channel max over rectangles (a, b) .. (c, d) inclusive of a grid
    feature map; ties resolve to the lowest flat cell index."""
    n0, n1, depth = c.data.shape
    m = len(regions)
    data = np.empty((m, depth), dtype=np.float64)
    pos = np.empty((m, 2, depth), dtype=np.int64)
    for r, (a, b, cc, dd) in enumerate(regions):
        if not (0 <= a <= cc < n0 and 0 <= b <= dd < n1):
            raise ShapeError(f"region ({a},{b},{cc},{dd}) outside {n0}x{n1} grid")
        block = c.data[a : cc + 1, b : dd + 1, :]
        width = dd - b + 1
        flat = block.reshape(-1, depth)
        am = flat.argmax(axis=0)
        data[r] = flat[am, np.arange(depth)]
        pos[r, 0] = a + am // width
        pos[r, 1] = b + am % width

    def back(g):
        if c.requires_grad:
            gc = np.zeros_like(c.data)
            chan = np.arange(depth)
            for r in range(m):
                np.add.at(gc, (pos[r, 0], pos[r, 1], chan), g[r])
            c.accumulate(gc)

    return _make(data, (c,), back)


def cross_entropy_rows(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Per-row softmax cross entropy against integer class labels."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.data.shape[0],):
        raise ShapeError("cross_entropy_rows expects (m, K) logits and m labels")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1)) + logits.data.max(axis=1)
    picked = logits.data[np.arange(len(labels)), labels]
    data = lse - picked

    def back(g):
        if logits.requires_grad:
            soft = np.exp(shifted)
            soft /= soft.sum(axis=1, keepdims=True)
            soft[np.arange(len(labels)), labels] -= 1.0
            logits.accumulate(soft * g[:, None])

    return _make(data, (logits,), back)


class Parameter:
    """Named trainable tensor; the model keeps these in a stable order."""

    __slots__ = ("name", "tensor")

    def __init__(self, name: str, data: np.ndarray):
        self.name = name
        self.tensor = Tensor(data, requires_grad=True)

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @data.setter
    def data(self, value: np.ndarray) -> None:
        self.tensor.data = np.asarray(value, dtype=np.float64)

    @property
    def grad(self):
        return self.tensor.grad

    def zero_grad(self) -> None:
        self.tensor.zero_grad()

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.tensor.data.shape})"
