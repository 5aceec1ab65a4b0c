"""Reverse-mode automatic differentiation over dense float64 arrays.

A ``Tensor`` wraps an ndarray together with vjp closures back to its
parents, so each forward evaluation records its own tape (the implicit
DAG). ``grad`` replays that tape in exact reverse topological order.
The vjp rules are themselves written with Tensor ops, so gradients can
be differentiated again (needed for the gradient-penalty objective).

Scope is deliberately small: vectors and matrices, no broadcasting
beyond row-vector bias addition, everything in float64. Non-finite
values are an error state and raise immediately instead of propagating.
"""

from __future__ import annotations

import numpy as np


class NonFiniteError(FloatingPointError):
    """A forward or backward op produced NaN/Inf."""


def _check_finite(arr: np.ndarray, op: str) -> None:
    # single-reduction screen: a finite sum implies all entries finite;
    # only on a non-finite sum run the exact elementwise check (rules out
    # the all-finite-but-overflowing-sum corner, which at worst emits a
    # numpy overflow warning on the way to the raise)
    if np.isfinite(arr.sum()):
        return
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite value produced by op '{op}'")


class Tensor:
    """Node of the computation graph: value + links to parents."""

    __slots__ = ("data", "parents", "vjps", "op")

    def __init__(self, data, parents=(), vjps=(), op="leaf"):
        arr = np.asarray(data, dtype=np.float64)
        _check_finite(arr, op)
        self.data = arr
        self.parents = parents
        self.vjps = vjps
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.data.shape})"

    # arithmetic ------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None):
        return tsum(self, axis=axis)

    def mean(self, axis=None):
        return tmean(self, axis=axis)

    def item(self) -> float:
        return float(self.data)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(x) -> Tensor:
    """Leaf that never receives a gradient (alias kept for readability)."""
    return as_tensor(x)


def _unbroadcast(g: Tensor, shape: tuple) -> Tensor:
    """Reduce a gradient back to `shape` after numpy broadcasting."""
    if g.shape == shape:
        return g
    # scalar target
    if shape == ():
        return tsum(g)
    # (n, d) reduced to (d,) / (1, d) / (n, 1): row- or column-broadcasts
    if len(shape) == 1 and g.ndim == 2 and g.shape[1] == shape[0]:
        return tsum(g, axis=0)
    if len(shape) == 2 and g.ndim == 2 and shape[0] == 1 and g.shape[1] == shape[1]:
        return reshape(tsum(g, axis=0), shape)
    if len(shape) == 2 and g.ndim == 2 and shape[1] == 1 and g.shape[0] == shape[0]:
        return reshape(tsum(g, axis=1), shape)
    raise ValueError(f"unsupported broadcast reduction {g.shape} -> {shape}")


# primitive ops -------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data, (a, b),
                 (lambda g: _unbroadcast(g, a.shape),
                  lambda g: _unbroadcast(g, b.shape)), "add")
    return out


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.data - b.data, (a, b),
                  (lambda g: _unbroadcast(g, a.shape),
                   lambda g: _unbroadcast(neg(g), b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.data * b.data, (a, b),
                  (lambda g: _unbroadcast(mul(g, b), a.shape),
                   lambda g: _unbroadcast(mul(g, a), b.shape)), "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data / b.data, (a, b),
                 (lambda g: _unbroadcast(div(g, b), a.shape),
                  lambda g: _unbroadcast(neg(div(mul(g, out), b)), b.shape)),
                 "div")
    return out


def neg(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(-a.data, (a,), (lambda g: neg(g),), "neg")


def power(a, p) -> Tensor:
    a = as_tensor(a)
    p = float(p)
    return Tensor(a.data ** p, (a,),
                  (lambda g: mul(g, mul(p, power(a, p - 1.0))),), "pow")


def square(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(a.data * a.data, (a,), (lambda g: mul(g, mul(2.0, a)),), "square")


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.sqrt(a.data), (a,),
                 (lambda g: div(g, mul(2.0, out)),), "sqrt")
    return out


def exp(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        data = np.exp(a.data)
    out = Tensor(data, (a,), (lambda g: mul(g, out),), "exp")
    return out


def log(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        data = np.log(a.data)
    return Tensor(data, (a,), (lambda g: div(g, a),), "log")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.tanh(a.data), (a,),
                 (lambda g: mul(g, sub(1.0, square(out))),), "tanh")
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    data = np.empty_like(a.data)
    pos = a.data >= 0
    data[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ex = np.exp(a.data[~pos])
    data[~pos] = ex / (1.0 + ex)
    out = Tensor(data, (a,),
                 (lambda g: mul(g, mul(out, sub(1.0, out))),), "sigmoid")
    return out


def softplus(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(np.logaddexp(0.0, a.data), (a,),
                  (lambda g: mul(g, sigmoid(a)),), "softplus")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = (a.data > 0).astype(np.float64)
    return Tensor(np.maximum(a.data, 0.0), (a,),
                  (lambda g: mul(g, mask),), "relu")


def leaky_relu(a, slope: float = 0.5) -> Tensor:
    a = as_tensor(a)
    deriv = np.where(a.data >= 0, 1.0, slope)
    return Tensor(np.where(a.data >= 0, a.data, slope * a.data), (a,),
                  (lambda g: mul(g, deriv),), "leaky_relu")


def smoothed_leaky(a, slope: float = 0.5) -> Tensor:
    """Twice-differentiable leaky-ReLU blend.

    sigma(t) = slope*t + (1-slope)*(softplus(t) - log 2); sigma(0) = 0 and
    sigma' in (slope, 1), so the inverse exists with Lipschitz constant
    1/slope.
    """
    a = as_tensor(a)
    return add(mul(slope, a),
               mul(1.0 - slope, sub(softplus(a), np.log(2.0))))


def absolute(a) -> Tensor:
    a = as_tensor(a)
    sign = np.sign(a.data)
    return Tensor(np.abs(a.data), (a,), (lambda g: mul(g, sign),), "abs")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim > 2 or b.ndim > 2:
        raise ValueError("matmul supports vectors and matrices only")
    out_data = a.data @ b.data

    if a.ndim == 2 and b.ndim == 2:
        vjps = (lambda g: matmul(g, transpose(b)),
                lambda g: matmul(transpose(a), g))
    elif a.ndim == 2 and b.ndim == 1:
        vjps = (lambda g: outer(g, b), lambda g: matmul(transpose(a), g))
    elif a.ndim == 1 and b.ndim == 2:
        vjps = (lambda g: matmul(b, g), lambda g: outer(a, g))
    else:  # dot product
        vjps = (lambda g: mul(g, b), lambda g: mul(g, a))
    return Tensor(out_data, (a, b), vjps, "matmul")


def outer(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(np.outer(a.data, b.data), (a, b),
                  (lambda g: matmul(g, b), lambda g: matmul(transpose(g), a)),
                  "outer")


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(a.data.T, (a,), (lambda g: transpose(g),), "transpose")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    return Tensor(a.data.reshape(shape), (a,),
                  (lambda g: reshape(g, old),), "reshape")


def broadcast_to(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    return Tensor(np.broadcast_to(a.data, shape).copy(), (a,),
                  (lambda g: _unbroadcast(g, old),), "broadcast_to")


def tsum(a, axis=None) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        shape = a.shape
        return Tensor(np.sum(a.data), (a,),
                      (lambda g: broadcast_to(g, shape),), "sum")
    data = np.sum(a.data, axis=axis)
    n_keep = data.shape

    def vjp(g, axis=axis, src_shape=a.shape):
        expanded = reshape(g, _keepdims_shape(src_shape, axis))
        return broadcast_to(expanded, src_shape)

    return Tensor(data, (a,), (vjp,), "sum")


def _keepdims_shape(shape, axis):
    out = list(shape)
    out[axis] = 1
    return tuple(out)


def tmean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else a.shape[axis]
    return div(tsum(a, axis=axis), float(n))


def logsumexp(a, axis=None) -> Tensor:
    """Stable log-sum-exp; exact gradient via the shifted-exp identity."""
    a = as_tensor(a)
    if axis is None:
        m = float(np.max(a.data))
        return add(log(tsum(exp(sub(a, m)))), m)
    m = np.max(a.data, axis=axis, keepdims=True)
    shifted = sub(a, m)  # m is a constant leaf: gradient stays exact
    return add(log(tsum(exp(shifted), axis=axis)),
               np.squeeze(m, axis=axis))


# backward ------------------------------------------------------------

def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order  # parents before children


def grad(root: Tensor, wrt, as_arrays: bool = True):
    """Gradients of a scalar root w.r.t. the given leaf tensors.

    Visits the tape in exact reverse topological order. With
    ``as_arrays=False`` the returned gradients are Tensors wired into the
    graph, so they can be differentiated again.
    """
    if root.data.size != 1:
        raise ValueError("grad requires a scalar root")
    order = _toposort(root)
    adjoint: dict[int, Tensor] = {
        id(root): Tensor(np.ones_like(root.data), op="seed")}
    for node in reversed(order):
        g = adjoint.get(id(node))
        if g is None:
            continue
        for parent, vjp in zip(node.parents, node.vjps):
            contrib = vjp(g)
            prev = adjoint.get(id(parent))
            adjoint[id(parent)] = contrib if prev is None else add(prev, contrib)
    grads = []
    for leaf in wrt:
        g = adjoint.get(id(leaf))
        if g is None:
            g = Tensor(np.zeros_like(leaf.data), op="zero-grad")
        grads.append(g)
    if as_arrays:
        return [g.data for g in grads]
    return grads


def value_and_grad(fn, *arrays):
    """Evaluate fn on leaf tensors built from arrays; return (value, grads)."""
    leaves = [Tensor(a) for a in arrays]
    root = fn(*leaves)
    return float(root.data), grad(root, leaves)


# tape front-end ------------------------------------------------------

MAX_HESSIAN_DIM = 64


class Tape:
    """Recorded program: a graph-building function plus cached last run."""

    def __init__(self, fn, n_inputs: int = 1):
        self.fn = fn
        self.n_inputs = n_inputs
        self._leaves: list[Tensor] | None = None
        self._root: Tensor | None = None

    def _build(self, inputs) -> Tensor:
        if len(inputs) != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} inputs, got {len(inputs)}")
        self._leaves = [as_tensor(np.asarray(x, dtype=np.float64)) for x in inputs]
        self._root = self.fn(*self._leaves)
        return self._root

    def forward(self, *inputs) -> np.ndarray:
        return self._build(inputs).data.copy()

    def gradient(self, *inputs):
        root = self._build(inputs)
        if root.data.size != 1:
            raise ValueError("gradient requires a scalar root")
        grads = grad(root, self._leaves)
        return grads[0] if self.n_inputs == 1 else grads

    def hessian(self, *inputs, index: int = 0, step: float = 1e-4,
                asym_tol: float = 1e-6) -> np.ndarray:
        """Hessian w.r.t. input `index` by central differences of the
        exact gradient. Returns the symmetrized matrix; raises if the raw
        finite-difference matrix is asymmetric beyond tolerance."""
        x0 = np.asarray(inputs[index], dtype=np.float64).ravel()
        k = x0.size
        if k > MAX_HESSIAN_DIM:
            raise ValueError(f"hessian dimension {k} exceeds cap {MAX_HESSIAN_DIM}")

        def grad_at(x):
            args = list(inputs)
            args[index] = x
            g = self.gradient(*args)
            g = g if self.n_inputs == 1 else g[index]
            return np.asarray(g, dtype=np.float64).ravel()

        hess = np.empty((k, k))
        for i in range(k):
            xp = x0.copy()
            xm = x0.copy()
            xp[i] += step
            xm[i] -= step
            hess[:, i] = (grad_at(xp) - grad_at(xm)) / (2.0 * step)
        asym = np.max(np.abs(hess - hess.T))
        scale = max(1.0, float(np.max(np.abs(hess))))
        if asym > asym_tol * scale:
            raise ValueError(f"Hessian asymmetry {asym:.3e} beyond tolerance")
        return 0.5 * (hess + hess.T)


def forward(tape: Tape, inputs) -> np.ndarray:
    return tape.forward(*inputs)


def gradient(tape: Tape, inputs):
    return tape.gradient(*inputs)


def hessian(tape: Tape, inputs, **kwargs) -> np.ndarray:
    return tape.hessian(*inputs, **kwargs)
