"""Graph-building versions of family-specific ops.

Bridges diffgraph with the activation algebra in generators, so
networks can be evaluated inside the tape (exact second derivatives
included, which the gradient-penalty term needs).
"""

from __future__ import annotations

import numpy as np

from . import diffgraph as dg
from .generators import activate_inv


def act_graph(h: dg.Tensor, kind: str, slope: float) -> dg.Tensor:
    if kind == "exact-leaky":
        return dg.leaky_relu(h, slope)
    if kind == "smoothed-leaky":
        return dg.smoothed_leaky(h, slope)
    raise ValueError(f"unknown activation {kind!r}")


def act_inv_graph(y: dg.Tensor, kind: str, slope: float) -> dg.Tensor:
    if kind == "exact-leaky":
        # inverse of slope-s leaky ReLU is leaky ReLU with slope 1/s
        return dg.leaky_relu(y, 1.0 / slope)
    if kind == "smoothed-leaky":
        y = dg.as_tensor(y)
        t_data = activate_inv(y.data, kind, slope)
        out_box: list[dg.Tensor] = []

        def vjp(g):
            # d sigma^{-1}/dy = 1 / sigma'(sigma^{-1}(y)), kept in-graph so
            # second derivatives remain exact
            deriv = dg.add(slope, dg.mul(1.0 - slope, dg.sigmoid(out_box[0])))
            return dg.div(g, deriv)

        out = dg.Tensor(t_data, (y,), (vjp,), "smoothed_leaky_inv")
        out_box.append(out)
        return out
    raise ValueError(f"unknown activation {kind!r}")


def log_inv_deriv_graph(t: dg.Tensor, kind: str, slope: float) -> dg.Tensor:
    """log sigma^{-1}'(t) as a graph node.

    For the exact leaky activation this is piecewise constant, so its
    derivative is zero a.e. and it enters the graph as a constant.
    """
    t = dg.as_tensor(t)
    if kind == "exact-leaky":
        return dg.constant(np.where(t.data >= 0, 0.0, np.log(1.0 / slope)))
    if kind == "smoothed-leaky":
        inv = act_inv_graph(t, kind, slope)
        deriv = dg.add(slope, dg.mul(1.0 - slope, dg.sigmoid(inv)))
        return dg.neg(dg.log(deriv))
    raise ValueError(f"unknown activation {kind!r}")


def branch_graph(t: dg.Tensor, w: np.ndarray, c: np.ndarray,
                 a: dg.Tensor, d0: dg.Tensor) -> dg.Tensor:
    """Trainable one-hidden-layer branch r(t) applied elementwise.

    t may be any shape; returns r(t) flattened to t's shape summed over
    the hidden layer. w and c are fixed feature parameters; a and d0 are
    the trainable read-out.
    """
    t = dg.as_tensor(t)
    flat = dg.reshape(t, (t.data.size,))
    feats = dg.tanh(dg.add(dg.outer(flat, dg.constant(w)), dg.constant(c)))
    vals = dg.add(dg.matmul(feats, a), d0)
    return dg.reshape(vals, t.shape)
