"""Trainable discriminator families for IPM optimization and WGAN training.

Each family exposes: init_params(rng) -> list of ndarrays,
eval_graph(param_nodes, X) -> Tensor of per-row outputs, project(params)
-> params (the family's norm-ball/box constraints), and eval_np for
plain evaluation. Families whose IPM needs the two-spec contrast form
are wrapped in ContrastFamily.
"""

from __future__ import annotations

import numpy as np

from . import diffgraph as dg
from .discriminators import (
    LogDensityNetSpec,
    MlpSpec,
    ReluDiscSpec,
    _clamp_ball,
    _clamp_opnorm,
    fit_branch_net,
)
from .generators import LOG_2PI, ConstraintParams, InvertibleGeneratorSpec
from .graphops import act_inv_graph, branch_graph, log_inv_deriv_graph


class ReluFamily:
    """x -> relu(v.x + b), |v| <= 1, |b| <= D."""

    def __init__(self, dim: int, b_bound: float = 2.0):
        self.dim = dim
        self.b_bound = b_bound

    def init_params(self, rng) -> list[np.ndarray]:
        v = rng.standard_normal(self.dim)
        v /= max(1.0, np.linalg.norm(v))
        b = rng.uniform(-self.b_bound, self.b_bound)
        return [v, np.float64(b)]

    def eval_graph(self, params, x) -> dg.Tensor:
        v, b = params
        return dg.relu(dg.add(dg.matmul(dg.as_tensor(x), v), b))

    def eval_np(self, params, x: np.ndarray) -> np.ndarray:
        return self.eval_graph([dg.as_tensor(p) for p in params], x).data

    def project(self, params) -> list[np.ndarray]:
        v, b = params
        return [_clamp_ball(np.asarray(v), 1.0),
                np.float64(np.clip(b, -self.b_bound, self.b_bound))]

    def to_spec(self, params) -> ReluDiscSpec:
        return ReluDiscSpec(v=params[0], b=float(params[1]), b_bound=self.b_bound)


class LinearStatFamily:
    """x -> <v, T(x)>, |v| <= 1; T defaults to the identity."""

    def __init__(self, dim: int, stat=None):
        self.dim = dim
        self.stat = stat

    def init_params(self, rng) -> list[np.ndarray]:
        v = rng.standard_normal(self.dim)
        return [v / max(1.0, np.linalg.norm(v))]

    def _features(self, x):
        if self.stat is None:
            return x
        if isinstance(x, dg.Tensor):
            return dg.constant(self.stat(x.data))
        return self.stat(x)

    def eval_graph(self, params, x) -> dg.Tensor:
        return dg.matmul(dg.as_tensor(self._features(x)), params[0])

    def eval_np(self, params, x: np.ndarray) -> np.ndarray:
        return self.eval_graph([dg.as_tensor(p) for p in params], x).data

    def project(self, params) -> list[np.ndarray]:
        return [_clamp_ball(np.asarray(params[0]), 1.0)]


class MlpFamily:
    """Plain ReLU MLP with scalar output; clip-ball given by clip_radius."""

    def __init__(self, dims: tuple, clip_radius: float = 0.1):
        self.dims = tuple(dims)
        self.clip_radius = clip_radius

    def init_params(self, rng) -> list[np.ndarray]:
        params = []
        for fan_in, fan_out in zip(self.dims[:-1], self.dims[1:]):
            scale = np.sqrt(2.0 / (fan_in + fan_out))
            params.append(rng.standard_normal((fan_out, fan_in)) * scale)
            params.append(np.zeros(fan_out))
        return params

    def eval_graph(self, params, x) -> dg.Tensor:
        h = dg.as_tensor(x)
        n_layers = len(self.dims) - 1
        for i in range(n_layers):
            w, b = params[2 * i], params[2 * i + 1]
            h = dg.add(dg.matmul(h, dg.transpose(dg.as_tensor(w))), b)
            if i < n_layers - 1:
                h = dg.relu(h)
        return dg.reshape(h, (h.shape[0],))

    def eval_np(self, params, x: np.ndarray) -> np.ndarray:
        return self.eval_graph([dg.as_tensor(p) for p in params], x).data

    def project(self, params) -> list[np.ndarray]:
        r = self.clip_radius
        return [np.clip(p, -r, r) for p in params]

    def to_spec(self, params) -> MlpSpec:
        ws = tuple(params[i] for i in range(0, len(params), 2))
        bs = tuple(params[i] for i in range(1, len(params), 2))
        return MlpSpec(weights=ws, biases=bs, clip_radius=self.clip_radius)


class LogDensityNetFamily:
    """Inverse-network density discriminators (single branch f_phi).

    Parameters per member: layer matrices A_1..A_l, biases c_1..c_l,
    output bias C, and (in trainable mode) the read-out of the
    one-hidden-layer branch that replaces the piecewise-constant
    log sigma^{-1}' activation.
    """

    def __init__(self, n_layers: int, dim: int, gamma: np.ndarray,
                 activation: str = "exact-leaky", slope: float = 0.5,
                 constraints: ConstraintParams | None = None,
                 branch: str = "trainable", branch_width: int = 16):
        self.n_layers = n_layers
        self.dim = dim
        self.gamma = np.asarray(gamma, dtype=np.float64)
        self.activation = activation
        self.slope = slope
        self.constraints = constraints or ConstraintParams()
        self.branch = branch
        if branch == "trainable":
            fit = fit_branch_net(activation, slope, branch_width)
            self.branch_w = fit.w
            self.branch_c = fit.c
            self.branch_a0 = np.asarray(fit.a)
            self.branch_d0 = np.float64(fit.d0)
            # all parameters carry constraints; the trainable read-out is
            # boxed around its least-squares fit so the sup stays finite
            self.branch_a_cap = max(1.0, 2.0 * float(np.linalg.norm(fit.a)))
            self.branch_d0_cap = max(1.0, 2.0 * abs(float(fit.d0)))
        elif branch != "exact":
            raise ValueError("branch must be 'exact' or 'trainable'")

    @classmethod
    def for_generator(cls, gen_spec: InvertibleGeneratorSpec, **kwargs):
        return cls(n_layers=gen_spec.n_layers, dim=gen_spec.dim,
                   gamma=gen_spec.gamma, activation=gen_spec.activation,
                   slope=gen_spec.slope, constraints=gen_spec.constraints,
                   **kwargs)

    def init_params(self, rng) -> list[np.ndarray]:
        c = self.constraints
        params: list[np.ndarray] = []
        for _ in range(self.n_layers):
            # random rotation times singular values inside [1/R_W, R_W]
            q1, r1 = np.linalg.qr(rng.standard_normal((self.dim, self.dim)))
            q1 = q1 * np.sign(np.diag(r1))
            q2, r2 = np.linalg.qr(rng.standard_normal((self.dim, self.dim)))
            q2 = q2 * np.sign(np.diag(r2))
            s = rng.uniform(1.0 / c.r_w, c.r_w, size=self.dim)
            params.append(q1 @ np.diag(s) @ q2.T)
        for _ in range(self.n_layers):
            b = rng.standard_normal(self.dim) * 0.1
            params.append(_clamp_ball(b, c.r_b))
        params.append(np.float64(0.0))  # C
        if self.branch == "trainable":
            params.append(self.branch_a0.copy())
            params.append(np.float64(self.branch_d0))
        return params

    def eval_graph(self, params, x) -> dg.Tensor:
        x = dg.as_tensor(x)
        n = x.shape[0]
        ws = params[:self.n_layers]
        bs = params[self.n_layers:2 * self.n_layers]
        c_out = params[2 * self.n_layers]
        u = dg.add(dg.matmul(x, dg.transpose(dg.as_tensor(ws[0]))), bs[0])
        act_sum = dg.constant(np.zeros(n))
        for j in range(1, self.n_layers):
            act_sum = dg.add(act_sum, self._act_term_rows(u, params))
            u = dg.add(dg.matmul(act_inv_graph(u, self.activation, self.slope),
                                 dg.transpose(dg.as_tensor(ws[j]))), bs[j])
        quad = dg.mul(-0.5, dg.tsum(dg.square(dg.div(u, self.gamma)), axis=1))
        normalizer = -float(np.sum(np.log(self.gamma))) - 0.5 * self.dim * LOG_2PI
        return dg.add(dg.add(dg.add(quad, act_sum), c_out), normalizer)

    def _act_term_rows(self, u: dg.Tensor, params) -> dg.Tensor:
        if self.branch == "exact":
            return dg.tsum(log_inv_deriv_graph(u, self.activation, self.slope),
                           axis=1)
        a, d0 = params[-2], params[-1]
        return dg.tsum(branch_graph(u, self.branch_w, self.branch_c,
                                    dg.as_tensor(a), dg.as_tensor(d0)), axis=1)

    def eval_np(self, params, x: np.ndarray) -> np.ndarray:
        return self.eval_graph([dg.as_tensor(p) for p in params], x).data

    def project(self, params) -> list[np.ndarray]:
        c = self.constraints
        out = [_clamp_opnorm(np.asarray(w), c.r_w) for w in params[:self.n_layers]]
        out += [_clamp_ball(np.asarray(b), c.r_b)
                for b in params[self.n_layers:2 * self.n_layers]]
        c_cap = max(0.0, (self.n_layers - 1) * self.dim * np.log(c.r_w))
        out.append(np.float64(np.clip(params[2 * self.n_layers], -c_cap, c_cap)))
        if self.branch == "trainable":
            out.append(_clamp_ball(np.asarray(params[-2]), self.branch_a_cap))
            out.append(np.float64(np.clip(params[-1], -self.branch_d0_cap,
                                          self.branch_d0_cap)))
        return out

    def params_from_spec(self, spec: LogDensityNetSpec) -> list[np.ndarray]:
        params = [np.array(w) for w in spec.layer_weights]
        params += [np.array(b) for b in spec.layer_biases]
        params.append(np.float64(spec.out_bias))
        if self.branch == "trainable":
            if spec.logsig_branch is not None:
                params.append(np.array(spec.logsig_branch.a))
                params.append(np.float64(spec.logsig_branch.d0))
            else:
                params.append(self.branch_a0.copy())
                params.append(np.float64(self.branch_d0))
        return params


class MogFamily:
    """Single log-sum-exp branch f(x) = log sum_j w_j exp(mu_j.x + b_j)."""

    def __init__(self, k: int, dim: int, weight_floor_log: float = 20.0,
                 mean_bound: float = 10.0):
        self.k = k
        self.dim = dim
        self.weight_floor_log = weight_floor_log
        self.mean_bound = mean_bound

    def init_params(self, rng) -> list[np.ndarray]:
        w = rng.uniform(0.3, 1.0, size=self.k)
        mu = rng.standard_normal((self.k, self.dim))
        norms = np.linalg.norm(mu, axis=1, keepdims=True)
        mu = mu / np.maximum(norms / self.mean_bound, 1.0)
        b = rng.uniform(-1.0, 0.0, size=self.k)
        return [w, mu, b]

    def eval_graph(self, params, x) -> dg.Tensor:
        w, mu, b = params
        logits = dg.add(dg.add(dg.matmul(dg.as_tensor(x),
                                         dg.transpose(dg.as_tensor(mu))), b),
                        dg.log(dg.as_tensor(w)))
        return dg.logsumexp(logits, axis=1)

    def eval_np(self, params, x: np.ndarray) -> np.ndarray:
        return self.eval_graph([dg.as_tensor(p) for p in params], x).data

    def project(self, params) -> list[np.ndarray]:
        w, mu, b = (np.asarray(p) for p in params)
        d = self.mean_bound
        mu_proj = np.stack([_clamp_ball(m, d) for m in mu])
        return [np.clip(w, np.exp(-self.weight_floor_log), 1.0),
                mu_proj,
                np.clip(b, -d * d, 0.0)]


class ContrastFamily:
    """Pairs f_{phi1} - f_{phi2} over a base family (the F-2 construction).

    Initialization is symmetric (phi1 = phi2, so f = 0): a random
    asymmetric start has an arbitrarily signed contrast that can mislead
    a generator for many steps, while ascent from the neutral element
    immediately moves toward positive contrast.
    """

    def __init__(self, base):
        self.base = base

    def init_params(self, rng) -> list[np.ndarray]:
        half = self.base.init_params(rng)
        return half + [np.array(p) for p in half]

    def _split(self, params):
        half = len(params) // 2
        return params[:half], params[half:]

    def eval_graph(self, params, x) -> dg.Tensor:
        p1, p2 = self._split(params)
        return dg.sub(self.base.eval_graph(p1, x), self.base.eval_graph(p2, x))

    def eval_np(self, params, x: np.ndarray) -> np.ndarray:
        return self.eval_graph([dg.as_tensor(p) for p in params], x).data

    def project(self, params) -> list[np.ndarray]:
        p1, p2 = self._split(params)
        return self.base.project(p1) + self.base.project(p2)


def gradient_penalty_graph(family, param_nodes, batch_p: np.ndarray,
                           batch_q: np.ndarray, rng) -> dg.Tensor:
    """Mean (|grad_x f(xhat)| - 1)^2 over random interpolates.

    Built with a differentiable inner gradient, so the penalty's own
    parameter gradient is exact.
    """
    n = min(batch_p.shape[0], batch_q.shape[0])
    t = rng.uniform(size=(n, 1))
    xhat = t * batch_p[:n] + (1.0 - t) * batch_q[:n]
    x_leaf = dg.Tensor(xhat)
    y = family.eval_graph(param_nodes, x_leaf)
    gx = dg.grad(dg.tsum(y), [x_leaf], as_arrays=False)[0]
    norms = dg.sqrt(dg.add(dg.tsum(dg.square(gx), axis=1), 1e-12))
    return dg.tmean(dg.square(dg.sub(norms, 1.0)))
