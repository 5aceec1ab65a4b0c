"""Discriminator families: evaluation, constraint projection, constructors.

Four typed families (one-neuron ReLU, linear functionals of sufficient
statistics, log-density networks mirroring an inverse generator, and
log-sum-exp mixture contrasts) plus an untyped MLP used by the vanilla
experiment variants. Evaluation is pure; projections return new specs
and are bitwise idempotent.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import numpy as np
from scipy.special import ndtr

from .generators import (
    ConstraintParams,
    InvertibleGeneratorSpec,
    LOG_2PI,
    GaussianSpec,
    _freeze,
    activate_inv,
    log_inv_deriv,
)


class ConstraintViolation(ValueError):
    """A spec falls outside its family's constraint set."""


# one-neuron ReLU family -------------------------------------------------

@dataclass(frozen=True)
class ReluDiscSpec:
    v: np.ndarray
    b: float
    b_bound: float = 2.0  # D

    def __post_init__(self):
        object.__setattr__(self, "v", _freeze(np.atleast_1d(self.v)))
        object.__setattr__(self, "b", float(self.b))


def eval_relu_disc(spec: ReluDiscSpec, x: np.ndarray):
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out = np.maximum(x2 @ spec.v + spec.b, 0.0)
    return out if np.asarray(x).ndim == 2 else float(out[0])


def normal_pdf(a):
    return np.exp(-0.5 * np.square(a)) / np.sqrt(2.0 * np.pi)


def r_function(a):
    """R(a) = E[max(W + a, 0)] for W ~ N(0,1) = a*Phi(a) + phi(a)."""
    a = np.asarray(a, dtype=np.float64)
    out = a * ndtr(a) + normal_pdf(a)
    return float(out) if out.ndim == 0 else out


def gaussian_expected_relu(gauss: GaussianSpec, v: np.ndarray, b) -> float:
    """E_{N(mu,Sigma)}[relu(v.x + b)] in closed form."""
    v = np.asarray(v, dtype=np.float64)
    proj_var = float(v @ gauss.cov @ v)
    if proj_var <= 1e-24:
        raise ValueError("degenerate projection variance")
    s = np.sqrt(proj_var)
    return float(s * r_function((float(v @ gauss.mean) + float(b)) / s))


# linear functionals of sufficient statistics ----------------------------

@dataclass(frozen=True)
class LinearStatDiscSpec:
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v", _freeze(np.atleast_1d(self.v)))


def eval_linear_stat(spec: LinearStatDiscSpec, t_values: np.ndarray):
    t2 = np.atleast_2d(np.asarray(t_values, dtype=np.float64))
    out = t2 @ spec.v
    return out if np.asarray(t_values).ndim == 2 else float(out[0])


# log-density networks ----------------------------------------------------

@dataclass(frozen=True)
class BranchNet:
    """One-hidden-layer scalar map approximating log sigma^{-1}'."""

    w: np.ndarray
    c: np.ndarray
    a: np.ndarray
    d0: float

    def __post_init__(self):
        for name in ("w", "c", "a"):
            object.__setattr__(self, name, _freeze(np.atleast_1d(getattr(self, name))))
        object.__setattr__(self, "d0", float(self.d0))

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return np.tanh(t[..., None] * self.w + self.c) @ self.a + self.d0


def fit_branch_net(activation: str, slope: float, width: int = 16,
                   span: float = 10.0) -> BranchNet:
    """Least-squares fit of log sigma^{-1}' on [-span, span]."""
    centers = np.linspace(-0.8 * span, 0.8 * span, width)
    w = np.full(width, 4.0)
    c = -4.0 * centers
    grid = np.linspace(-span, span, 2001)
    target = log_inv_deriv(grid, activation, slope)
    feats = np.tanh(grid[:, None] * w + c)
    design = np.hstack([feats, np.ones((grid.size, 1))])
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    return BranchNet(w=w, c=c, a=coef[:-1], d0=coef[-1])


@dataclass(frozen=True)
class LogDensityNetSpec:
    """Inverse network with density branches.

    layers[j] = (A_j, c_j) applied in order: u_1 = A_1 x + c_1,
    u_j = A_j sigma^{-1}(u_{j-1}) + c_j. The output combines the latent
    Gaussian quadratic on u_l, the per-layer log sigma^{-1}' branches on
    u_1..u_{l-1}, the input-independent log-det constant C, and the
    analytic Gaussian normalizer (carried outside C).
    """

    layer_weights: tuple
    layer_biases: tuple
    out_bias: float                       # C
    gamma: np.ndarray
    activation: str = "exact-leaky"
    slope: float = 0.5
    logsig_branch: BranchNet | None = None  # None = exact piecewise branch
    constraints: ConstraintParams = field(default_factory=ConstraintParams)

    def __post_init__(self):
        ws = tuple(_freeze(np.atleast_2d(w)) for w in self.layer_weights)
        bs = tuple(_freeze(np.atleast_1d(b)) for b in self.layer_biases)
        object.__setattr__(self, "layer_weights", ws)
        object.__setattr__(self, "layer_biases", bs)
        object.__setattr__(self, "gamma", _freeze(np.atleast_1d(self.gamma)))
        object.__setattr__(self, "out_bias", float(self.out_bias))

    @property
    def dim(self) -> int:
        return self.layer_weights[0].shape[0]

    @property
    def n_layers(self) -> int:
        return len(self.layer_weights)


def build_logdensity_net(gen_spec: InvertibleGeneratorSpec,
                         logsig_branch: str = "exact",
                         branch_width: int = 16) -> LogDensityNetSpec:
    """Network computing the generator's exact log density.

    The layer weights are the reversed inverses of the generator weights;
    C collects the input-independent log-determinants.
    """
    if not gen_spec.in_constraint_set():
        raise ConstraintViolation("generator spec violates its constraint set")
    a_list, c_list = [], []
    for w, b in zip(reversed(gen_spec.weights), reversed(gen_spec.biases)):
        a = np.linalg.inv(w)
        a_list.append(a)
        c_list.append(-a @ b)
    out_bias = float(sum(np.linalg.slogdet(a)[1] for a in a_list))
    branch = None
    if logsig_branch == "trainable":
        branch = fit_branch_net(gen_spec.activation, gen_spec.slope, branch_width)
    elif logsig_branch != "exact":
        raise ValueError("logsig_branch must be 'exact' or 'trainable'")
    return LogDensityNetSpec(
        layer_weights=tuple(a_list),
        layer_biases=tuple(c_list),
        out_bias=out_bias,
        gamma=gen_spec.gamma,
        activation=gen_spec.activation,
        slope=gen_spec.slope,
        logsig_branch=branch,
        constraints=gen_spec.constraints,
    )


def eval_logdensity_net(spec: LogDensityNetSpec, x: np.ndarray):
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    u = x2 @ spec.layer_weights[0].T + spec.layer_biases[0]
    act_sum = np.zeros(x2.shape[0])
    for j in range(1, spec.n_layers):
        if spec.logsig_branch is None:
            act_sum += np.sum(log_inv_deriv(u, spec.activation, spec.slope), axis=1)
        else:
            act_sum += np.sum(spec.logsig_branch(u), axis=1)
        u = activate_inv(u, spec.activation, spec.slope) @ spec.layer_weights[j].T \
            + spec.layer_biases[j]
    quad = -0.5 * np.sum((u / spec.gamma) ** 2, axis=1)
    normalizer = -float(np.sum(np.log(spec.gamma))) - 0.5 * spec.dim * LOG_2PI
    out = quad + act_sum + spec.out_bias + normalizer
    return out if np.asarray(x).ndim == 2 else float(out[0])


# mixture log-sum-exp family ----------------------------------------------

@dataclass(frozen=True)
class MogBranch:
    weights: np.ndarray  # in [exp(-B_w), 1]
    means: np.ndarray    # (k, d), |mu_j| <= D
    biases: np.ndarray   # in [-D^2, 0]

    def __post_init__(self):
        object.__setattr__(self, "weights", _freeze(np.atleast_1d(self.weights)))
        object.__setattr__(self, "means", _freeze(np.atleast_2d(self.means)))
        object.__setattr__(self, "biases", _freeze(np.atleast_1d(self.biases)))


@dataclass(frozen=True)
class MogDiscSpec:
    branch1: MogBranch
    branch2: MogBranch
    weight_floor_log: float = 20.0  # B_w
    mean_bound: float = 10.0        # D


def _mog_branch_eval(branch: MogBranch, x2: np.ndarray) -> np.ndarray:
    logits = x2 @ branch.means.T + branch.biases + np.log(branch.weights)
    m = np.max(logits, axis=1, keepdims=True)
    return np.log(np.sum(np.exp(logits - m), axis=1)) + m[:, 0]


def eval_mog_disc(spec: MogDiscSpec, x: np.ndarray):
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out = _mog_branch_eval(spec.branch1, x2) - _mog_branch_eval(spec.branch2, x2)
    return out if np.asarray(x).ndim == 2 else float(out[0])


# vanilla MLP ---------------------------------------------------------------

@dataclass(frozen=True)
class MlpSpec:
    """Plain fully-connected net (ReLU hidden layers, linear output)."""

    weights: tuple
    biases: tuple
    clip_radius: float = 0.1

    def __post_init__(self):
        ws = tuple(_freeze(np.atleast_2d(w)) for w in self.weights)
        bs = tuple(_freeze(np.atleast_1d(b)) for b in self.biases)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)


def eval_mlp(spec: MlpSpec, x: np.ndarray):
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    h = x2
    last = len(spec.weights) - 1
    for i, (w, b) in enumerate(zip(spec.weights, spec.biases)):
        h = h @ w.T + b
        if i < last:
            h = np.maximum(h, 0.0)
    out = h[:, 0]
    return out if np.asarray(x).ndim == 2 else float(out[0])


# shared evaluation / contrast ----------------------------------------------

def eval_disc(spec, x):
    if isinstance(spec, ReluDiscSpec):
        return eval_relu_disc(spec, x)
    if isinstance(spec, LinearStatDiscSpec):
        return eval_linear_stat(spec, x)
    if isinstance(spec, LogDensityNetSpec):
        return eval_logdensity_net(spec, x)
    if isinstance(spec, MogDiscSpec):
        return eval_mog_disc(spec, x)
    if isinstance(spec, MlpSpec):
        return eval_mlp(spec, x)
    raise ValueError(f"cannot evaluate {type(spec).__name__}")


def eval_contrast(spec1, spec2, x):
    """f_{phi1}(x) - f_{phi2}(x)."""
    return eval_disc(spec1, x) - eval_disc(spec2, x)


# constraint projection -------------------------------------------------------

def _clamp_opnorm(w: np.ndarray, r_w: float) -> np.ndarray:
    svals = np.linalg.svd(w, compute_uv=False)
    if svals[0] <= r_w * (1.0 + 1e-12):
        return w
    u, s, vt = np.linalg.svd(w)
    return u @ np.diag(np.minimum(s, r_w)) @ vt


def _clamp_ball(v: np.ndarray, radius: float) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm <= radius * (1.0 + 1e-12):
        return v
    return v * (radius / norm)


def project_constraints(spec):
    """Project parameters onto the family constraint set; idempotent."""
    if isinstance(spec, ReluDiscSpec):
        return ReluDiscSpec(v=_clamp_ball(spec.v, 1.0),
                            b=float(np.clip(spec.b, -spec.b_bound, spec.b_bound)),
                            b_bound=spec.b_bound)
    if isinstance(spec, LinearStatDiscSpec):
        return LinearStatDiscSpec(v=_clamp_ball(spec.v, 1.0))
    if isinstance(spec, LogDensityNetSpec):
        c = spec.constraints
        ws = tuple(_clamp_opnorm(w, c.r_w) for w in spec.layer_weights)
        bs = tuple(_clamp_ball(b, c.r_b) for b in spec.layer_biases)
        c_cap = max(0.0, (spec.n_layers - 1) * spec.dim * np.log(c.r_w))
        return replace(spec, layer_weights=ws, layer_biases=bs,
                       out_bias=float(np.clip(spec.out_bias, -c_cap, c_cap)))
    if isinstance(spec, MogDiscSpec):
        w_lo = np.exp(-spec.weight_floor_log)
        d = spec.mean_bound

        def proj_branch(br: MogBranch) -> MogBranch:
            means = np.stack([_clamp_ball(m, d) for m in br.means])
            return MogBranch(weights=np.clip(br.weights, w_lo, 1.0),
                             means=means,
                             biases=np.clip(br.biases, -d * d, 0.0))

        return replace(spec, branch1=proj_branch(spec.branch1),
                       branch2=proj_branch(spec.branch2))
    if isinstance(spec, MlpSpec):
        r = spec.clip_radius
        return MlpSpec(weights=tuple(np.clip(w, -r, r) for w in spec.weights),
                       biases=tuple(np.clip(b, -r, r) for b in spec.biases),
                       clip_radius=r)
    raise ValueError(f"cannot project {type(spec).__name__}")
