"""Minimal reverse-mode autodiff over numpy arrays.

Define-by-run tape of tensor operations, just large enough for the
recommender's forward pass: dense/sparse matmuls, elementwise maps,
row reductions, gathers, and the numerically stable pieces the losses
need (softplus, logsumexp, row softmax). Gradients accumulate in
float64 or float32 following the data dtype; reduction order is fixed,
so backward passes are deterministic.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """A numpy array plus the tape bookkeeping needed for backward()."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        """Backpropagate from this (scalar) tensor through the tape."""
        if self.data.shape != ():
            raise ValueError("backward() requires a scalar tensor")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones((), dtype=self.data.dtype)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def as_tensor(x, requires_grad: bool = False) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64), requires_grad=requires_grad)


def _unary(x: Tensor, out_data: np.ndarray, grad_fn) -> Tensor:
    if not x.requires_grad:
        return Tensor(out_data)

    def backward(g):
        x._accum(grad_fn(g))

    return Tensor(out_data, requires_grad=True, parents=(x,), backward=backward)


def _binary(a: Tensor, b: Tensor, out_data: np.ndarray, grad_a, grad_b) -> Tensor:
    req = a.requires_grad or b.requires_grad
    if not req:
        return Tensor(out_data)

    def backward(g):
        if a.requires_grad:
            a._accum(grad_a(g))
        if b.requires_grad:
            b._accum(grad_b(g))

    return Tensor(out_data, requires_grad=True, parents=(a, b), backward=backward)


# ---------------------------------------------------------------------------
# elementwise / scalar ops (same-shape unless noted)


def add(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data + b.data, lambda g: g, lambda g: g)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data - b.data, lambda g: g, lambda g: -g)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data * b.data, lambda g: g * b.data, lambda g: g * a.data)


def neg(x: Tensor) -> Tensor:
    return _unary(x, -x.data, lambda g: -g)


def scale(x: Tensor, c: float) -> Tensor:
    return _unary(x, x.data * c, lambda g: g * c)


def add_const(x: Tensor, c: float) -> Tensor:
    return _unary(x, x.data + c, lambda g: g)


def powf(x: Tensor, p: float) -> Tensor:
    out = x.data ** p
    return _unary(x, out, lambda g: g * p * x.data ** (p - 1.0))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return _unary(x, out, lambda g: g * (1.0 - out * out))


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0.0)
    mask = x.data > 0.0
    return _unary(x, out, lambda g: g * mask)


def softplus(x: Tensor) -> Tensor:
    # log(1 + e^x) = max(x, 0) + log1p(e^{-|x|}); gradient is sigmoid(x)
    t = np.exp(-np.abs(x.data))
    out = np.maximum(x.data, 0.0) + np.log1p(t)
    sig = np.where(x.data >= 0.0, 1.0 / (1.0 + t), t / (1.0 + t))
    return _unary(x, out, lambda g: g * sig)


def mul_scalar(x: Tensor, s: Tensor) -> Tensor:
    """Multiply every entry of x by the scalar tensor s."""
    out = x.data * s.data
    return _binary(x, s, out, lambda g: g * s.data, lambda g: np.sum(g * x.data))


def mul_rows(x: Tensor, c: Tensor) -> Tensor:
    """Scale row i of x [N,d] by c[i] (c is 1-D of length N)."""
    out = x.data * c.data[:, None]
    return _binary(
        x, c, out,
        lambda g: g * c.data[:, None],
        lambda g: np.sum(g * x.data, axis=1),
    )


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """x [N,d] + b [d] broadcast over rows."""
    out = x.data + b.data
    return _binary(x, b, out, lambda g: g, lambda g: g.sum(axis=0))


# ---------------------------------------------------------------------------
# reductions


def total_sum(x: Tensor) -> Tensor:
    out = np.asarray(x.data.sum())
    return _unary(x, out, lambda g: np.full_like(x.data, g))


def mean(x: Tensor) -> Tensor:
    n = x.data.size
    out = np.asarray(x.data.sum() / n)
    return _unary(x, out, lambda g: np.full_like(x.data, g / n))


def sum_rows(x: Tensor) -> Tensor:
    """Row sums of x [N,d] -> 1-D [N]."""
    out = x.data.sum(axis=1)
    return _unary(x, out, lambda g: np.repeat(g[:, None], x.data.shape[1], axis=1))


def logsumexp(x: Tensor) -> Tensor:
    """log sum exp of a 1-D tensor, max-shifted for stability."""
    m = np.max(x.data)
    ex = np.exp(x.data - m)
    s = ex.sum()
    out = np.asarray(m + np.log(s))
    soft = ex / s
    return _unary(x, out, lambda g: g * soft)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data @ b.data
    return _binary(a, b, out, lambda g: g @ b.data.T, lambda g: a.data.T @ g)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """x [N,k] @ w.T [k,d] (+ b [d]); w stored as [d,k]."""
    out = x.data @ w.data.T
    if b is not None:
        out = out + b.data
    req = x.requires_grad or w.requires_grad or (b is not None and b.requires_grad)
    if not req:
        return Tensor(out)

    def backward(g):
        if x.requires_grad:
            x._accum(g @ w.data)
        if w.requires_grad:
            w._accum(g.T @ x.data)
        if b is not None and b.requires_grad:
            b._accum(g.sum(axis=0))

    parents = (x, w) if b is None else (x, w, b)
    return Tensor(out, requires_grad=True, parents=parents, backward=backward)


def matvec(x: Tensor, v: Tensor) -> Tensor:
    """x [N,d] @ v [d] -> 1-D [N]."""
    out = x.data @ v.data
    return _binary(x, v, out, lambda g: np.outer(g, v.data), lambda g: g @ x.data)


def spmm(a, x: Tensor) -> Tensor:
    """Sparse constant matrix times dense tensor; a is a sparse.SparseMatrix."""
    out = a.matmul_dense(x.data)
    return _unary(x, out, lambda g: a.transpose().matmul_dense(g))


# ---------------------------------------------------------------------------
# indexing / restructuring


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    out = x.data[idx]

    def grad(g):
        dx = np.zeros_like(x.data)
        np.add.at(dx, idx, g)
        return dx

    return _unary(x, out, grad)


def concat_rows(a: Tensor, b: Tensor) -> Tensor:
    n = a.data.shape[0]
    out = np.concatenate([a.data, b.data], axis=0)
    return _binary(a, b, out, lambda g: g[:n], lambda g: g[n:])


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    out = x.data[start:stop]

    def grad(g):
        dx = np.zeros_like(x.data)
        dx[start:stop] = g
        return dx

    return _unary(x, out, grad)


def stack_cols(xs: list[Tensor]) -> Tensor:
    """Stack 1-D tensors of length N into an [N, len(xs)] matrix."""
    out = np.stack([t.data for t in xs], axis=1)
    req = any(t.requires_grad for t in xs)
    if not req:
        return Tensor(out)

    def backward(g):
        for j, t in enumerate(xs):
            if t.requires_grad:
                t._accum(g[:, j])

    return Tensor(out, requires_grad=True, parents=tuple(xs), backward=backward)


def get_col(x: Tensor, j: int) -> Tensor:
    out = x.data[:, j].copy()

    def grad(g):
        dx = np.zeros_like(x.data)
        dx[:, j] = g
        return dx

    return _unary(x, out, grad)


def row_softmax(x: Tensor) -> Tensor:
    """Softmax along axis=1 of x [N,m]."""
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    out = ex / ex.sum(axis=1, keepdims=True)

    def grad(g):
        inner = (g * out).sum(axis=1, keepdims=True)
        return out * (g - inner)

    return _unary(x, out, grad)


# ---------------------------------------------------------------------------
# composites


def dot_rows(a: Tensor, b: Tensor) -> Tensor:
    """Per-row dot product of two [N,d] tensors -> 1-D [N]."""
    return sum_rows(mul(a, b))


def cosine_rows(a: Tensor, b: Tensor) -> Tensor:
    """Per-row cosine similarity; caller must rule out zero-norm rows."""
    num = dot_rows(a, b)
    inv_a = powf(sum_rows(mul(a, a)), -0.5)
    inv_b = powf(sum_rows(mul(b, b)), -0.5)
    return mul(mul(num, inv_a), inv_b)


def frobenius_scale(x: Tensor) -> Tensor:
    """x / sqrt(||x||_F), the uniform-scale step applied after propagation."""
    sq = total_sum(mul(x, x))
    if float(sq.data) == 0.0:
        raise ValueError("frobenius_scale: zero-norm matrix")
    return mul_scalar(x, powf(sq, -0.25))
