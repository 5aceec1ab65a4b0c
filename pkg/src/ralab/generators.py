"""Distribution families: samplers and exact log densities.

Covers Gaussians, identity-covariance Gaussian mixtures, a concrete
exponential family (unit-covariance Gaussian mean family), layer-wise
invertible feedforward generators with change-of-variables densities,
and injective (k < d) generators whose smoothed density lives in the
laplace module. Specs are frozen dataclasses; samplers take explicit
seeds or Generators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from ._rng import rng_from

LOG_2PI = np.log(2.0 * np.pi)


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return rng_from(int(seed))


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


# activations ----------------------------------------------------------

def activate(t: np.ndarray, kind: str, slope: float = 0.5) -> np.ndarray:
    if kind == "exact-leaky":
        return np.where(t >= 0, t, slope * t)
    if kind == "smoothed-leaky":
        return slope * t + (1.0 - slope) * (np.logaddexp(0.0, t) - np.log(2.0))
    raise ValueError(f"unknown activation {kind!r}")


def activate_deriv(t: np.ndarray, kind: str, slope: float = 0.5) -> np.ndarray:
    if kind == "exact-leaky":
        return np.where(t >= 0, 1.0, slope)
    if kind == "smoothed-leaky":
        pos = t >= 0
        sig = np.empty_like(np.asarray(t, dtype=np.float64))
        sig[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
        ex = np.exp(t[~pos])
        sig[~pos] = ex / (1.0 + ex)
        return slope + (1.0 - slope) * sig
    raise ValueError(f"unknown activation {kind!r}")


def activate_inv(y: np.ndarray, kind: str, slope: float = 0.5) -> np.ndarray:
    if kind == "exact-leaky":
        return np.where(y >= 0, y, y / slope)
    if kind == "smoothed-leaky":
        # Newton on the strictly increasing sigma; sigma' >= slope keeps it safe.
        y = np.asarray(y, dtype=np.float64)
        t = np.where(y >= 0, y, y / slope)
        for _ in range(60):
            f = activate(t, kind, slope) - y
            if np.max(np.abs(f)) < 1e-14:
                break
            t = t - f / activate_deriv(t, kind, slope)
        return t
    raise ValueError(f"unknown activation {kind!r}")


def log_inv_deriv(t: np.ndarray, kind: str, slope: float = 0.5) -> np.ndarray:
    """log sigma^{-1}'(t), evaluated at the value fed into sigma^{-1}."""
    if kind == "exact-leaky":
        return np.where(t >= 0, 0.0, np.log(1.0 / slope))
    if kind == "smoothed-leaky":
        return -np.log(activate_deriv(activate_inv(t, kind, slope), kind, slope))
    raise ValueError(f"unknown activation {kind!r}")


# basic families -------------------------------------------------------

@dataclass(frozen=True)
class GaussianSpec:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _freeze(np.atleast_1d(self.mean))
        cov = _freeze(np.atleast_2d(self.cov))
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape does not match mean")
        if not np.allclose(cov, cov.T, atol=1e-10):
            raise ValueError("covariance must be symmetric")
        if np.min(np.linalg.eigvalsh(cov)) <= 0:
            raise ValueError("covariance must be positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def in_family(self, d_bound: float, sigma_min: float, sigma_max: float) -> bool:
        eigs = np.linalg.eigvalsh(self.cov)
        return (np.linalg.norm(self.mean) <= d_bound + 1e-12
                and eigs[0] >= sigma_min ** 2 - 1e-12
                and eigs[-1] <= sigma_max ** 2 + 1e-12)


def log_density_gaussian(spec: GaussianSpec, x: np.ndarray) -> np.ndarray:
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    diff = x2 - spec.mean
    sol = np.linalg.solve(spec.cov, diff.T).T
    _, logdet = np.linalg.slogdet(spec.cov)
    out = -0.5 * np.sum(diff * sol, axis=1) - 0.5 * (spec.dim * LOG_2PI + logdet)
    return out if np.asarray(x).ndim == 2 else float(out[0])


@dataclass(frozen=True)
class MixtureSpec:
    """Mixture of identity-covariance Gaussians."""

    weights: np.ndarray
    means: np.ndarray  # (k, d)
    weight_floor_log: float = 20.0  # B_w: weights >= exp(-B_w)
    mean_bound: float = 10.0        # D

    def __post_init__(self):
        w = _freeze(np.atleast_1d(self.weights))
        mu = _freeze(np.atleast_2d(self.means))
        if w.size != mu.shape[0]:
            raise ValueError("weights and means disagree on component count")
        if np.any(w < np.exp(-self.weight_floor_log) - 1e-15):
            raise ValueError("mixture weight below exp(-B_w)")
        if abs(float(np.sum(w)) - 1.0) > 1e-10:
            raise ValueError("mixture weights must sum to 1")
        if np.any(np.linalg.norm(mu, axis=1) > self.mean_bound + 1e-12):
            raise ValueError("component mean norm exceeds D")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def k(self) -> int:
        return self.weights.size


def log_density_mixture(spec: MixtureSpec, x: np.ndarray) -> np.ndarray:
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    # (n, k) squared distances, then a stable log-sum-exp over components
    d2 = np.sum((x2[:, None, :] - spec.means[None, :, :]) ** 2, axis=2)
    logits = np.log(spec.weights)[None, :] - 0.5 * d2
    m = np.max(logits, axis=1, keepdims=True)
    out = (np.log(np.sum(np.exp(logits - m), axis=1)) + m[:, 0]
           - 0.5 * spec.dim * LOG_2PI)
    return out if np.asarray(x).ndim == 2 else float(out[0])


@dataclass(frozen=True)
class ExpFamilySpec:
    """Exponential family p_theta(x) = exp(<theta, T(x)>)/Z(theta).

    Shipped concrete instance: unit-covariance Gaussian mean family with
    T(x) = x and A(theta) = |theta|^2/2, whose log-partition curvature is
    exactly 1 in every direction.
    """

    theta: np.ndarray
    kind: str = "unit_gaussian_mean"

    def __post_init__(self):
        if self.kind != "unit_gaussian_mean":
            raise ValueError(f"unsupported exponential-family instance {self.kind!r}")
        object.__setattr__(self, "theta", _freeze(np.atleast_1d(self.theta)))

    @property
    def dim(self) -> int:
        return self.theta.size


class QuadraticLogPartition:
    """A(theta) = |theta|^2 / 2 (curvature bounds gamma = beta = 1)."""

    curvature_lower = 1.0
    curvature_upper = 1.0

    @staticmethod
    def value(theta: np.ndarray) -> float:
        return 0.5 * float(np.dot(theta, theta))

    @staticmethod
    def grad(theta: np.ndarray) -> np.ndarray:
        return np.asarray(theta, dtype=np.float64)


def exp_family_logdensity_and_sampler(spec: ExpFamilySpec):
    """Return (log-density map, sampler) for the shipped instance."""
    theta = spec.theta
    a_val = QuadraticLogPartition.value(theta)
    d = spec.dim

    def logdensity(x: np.ndarray) -> np.ndarray:
        x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = x2 @ theta - a_val - 0.5 * np.sum(x2 * x2, axis=1) - 0.5 * d * LOG_2PI
        return out if np.asarray(x).ndim == 2 else float(out[0])

    def sampler(rng, n: int) -> np.ndarray:
        return theta + _as_rng(rng).standard_normal((n, d))

    return logdensity, sampler


# invertible generators -------------------------------------------------

@dataclass(frozen=True)
class ConstraintParams:
    """Norm/conditioning bounds defining the generator constraint set."""

    r_w: float = 2.0
    r_b: float = 1.0
    c_sigma: float = 2.0
    beta_sigma: float = 1.0
    delta: float = 1.0


@dataclass(frozen=True)
class InvertibleGeneratorSpec:
    weights: tuple      # l matrices, each (d, d)
    biases: tuple       # l vectors
    gamma: np.ndarray   # latent scales, entries in [delta, 1]
    activation: str = "exact-leaky"
    slope: float = 0.5
    constraints: ConstraintParams = field(default_factory=ConstraintParams)

    def __post_init__(self):
        ws = tuple(_freeze(np.atleast_2d(w)) for w in self.weights)
        bs = tuple(_freeze(np.atleast_1d(b)) for b in self.biases)
        if len(ws) != len(bs) or not ws:
            raise ValueError("need matching, nonempty weight/bias lists")
        d = ws[0].shape[0]
        for w, b in zip(ws, bs):
            if w.shape != (d, d) or b.shape != (d,):
                raise ValueError("all layers must be square and dimension-consistent")
        gamma = _freeze(np.atleast_1d(self.gamma))
        if gamma.shape != (d,):
            raise ValueError("gamma must have one scale per dimension")
        if np.any(gamma <= 0) or np.any(gamma > 1.0 + 1e-12):
            raise ValueError("gamma entries must lie in (0, 1]")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)
        object.__setattr__(self, "gamma", gamma)

    @property
    def dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def in_constraint_set(self) -> bool:
        c = self.constraints
        for w, b in zip(self.weights, self.biases):
            svals = np.linalg.svd(w, compute_uv=False)
            if svals[-1] <= 0:
                return False
            if max(svals[0], 1.0 / svals[-1]) > c.r_w + 1e-12:
                return False
            if np.linalg.norm(b) > c.r_b + 1e-12:
                return False
        return bool(np.all(self.gamma >= c.delta - 1e-12))


def _check_invertible(w: np.ndarray) -> None:
    svals = np.linalg.svd(w, compute_uv=False)
    if svals[-1] <= svals[0] * np.finfo(np.float64).eps:
        raise ValueError("singular layer weight matrix")


def invertible_forward(spec: InvertibleGeneratorSpec, z: np.ndarray) -> np.ndarray:
    """Exact network evaluation; no activation after the final affine layer."""
    z_arr = np.asarray(z, dtype=np.float64)
    h = np.atleast_2d(z_arr)
    if h.shape[1] != spec.dim:
        raise ValueError("latent dimension mismatch")
    last = spec.n_layers - 1
    for i in range(last):
        h = activate(h @ spec.weights[i].T + spec.biases[i], spec.activation, spec.slope)
    h = h @ spec.weights[last].T + spec.biases[last]
    return h if z_arr.ndim == 2 else h[0]


def invertible_inverse(spec: InvertibleGeneratorSpec, x: np.ndarray) -> np.ndarray:
    x_arr = np.asarray(x, dtype=np.float64)
    h = np.atleast_2d(x_arr)
    if h.shape[1] != spec.dim:
        raise ValueError("output dimension mismatch")
    for w in spec.weights:
        _check_invertible(w)
    last = spec.n_layers - 1
    h = np.linalg.solve(spec.weights[last], (h - spec.biases[last]).T).T
    for i in range(last - 1, -1, -1):
        t = activate_inv(h, spec.activation, spec.slope)
        h = np.linalg.solve(spec.weights[i], (t - spec.biases[i]).T).T
    return h if x_arr.ndim == 2 else h[0]


def log_density_invertible(spec: InvertibleGeneratorSpec, x: np.ndarray):
    """Exact change-of-variables log density.

    The log|det| of the inverse Jacobian splits into the input-independent
    sum of log|det W_k^{-1}| plus per-layer activation terms evaluated at
    the inverse network's pre-activation values.
    """
    x_arr = np.asarray(x, dtype=np.float64)
    h = np.atleast_2d(x_arr)
    n = h.shape[0]
    for w in spec.weights:
        _check_invertible(w)
    const = -float(sum(np.linalg.slogdet(w)[1] for w in spec.weights))
    act_terms = np.zeros(n)
    last = spec.n_layers - 1
    h = np.linalg.solve(spec.weights[last], (h - spec.biases[last]).T).T
    for i in range(last - 1, -1, -1):
        act_terms += np.sum(log_inv_deriv(h, spec.activation, spec.slope), axis=1)
        t = activate_inv(h, spec.activation, spec.slope)
        h = np.linalg.solve(spec.weights[i], (t - spec.biases[i]).T).T
    z = h
    quad = -0.5 * np.sum((z / spec.gamma) ** 2, axis=1)
    norm_const = -float(np.sum(np.log(spec.gamma))) - 0.5 * spec.dim * LOG_2PI
    out = quad + norm_const + const + act_terms
    return out if x_arr.ndim == 2 else float(out[0])


# injective generators ---------------------------------------------------

@dataclass(frozen=True)
class RegularityParams:
    """Bounds used by the smoothed-density analysis (laplace module)."""

    r_lower: float          # R: quantitative injectivity constant
    l_g: float              # Lipschitz bound on the approximate inverse
    l_sigma: float          # Lipschitz constant of sigma^{-1}
    s_bound: float = np.inf
    t_bound: float = np.inf


@dataclass(frozen=True)
class InjectiveGeneratorSpec:
    """Feedforward net R^k -> R^d with k < d.

    Unlike the invertible family, the activation is applied after the
    final affine layer as well (the activation_on_output flag keeps both
    forms available).
    """

    weights: tuple
    biases: tuple
    activation: str = "smoothed-leaky"
    slope: float = 0.5
    activation_on_output: bool = True

    def __post_init__(self):
        ws = tuple(_freeze(np.atleast_2d(w)) for w in self.weights)
        bs = tuple(_freeze(np.atleast_1d(b)) for b in self.biases)
        if len(ws) != len(bs) or not ws:
            raise ValueError("need matching, nonempty weight/bias lists")
        for i, (w, b) in enumerate(zip(ws, bs)):
            if b.shape != (w.shape[0],):
                raise ValueError("bias shape mismatch")
            if i > 0 and w.shape[1] != ws[i - 1].shape[0]:
                raise ValueError("layer dimensions do not chain")
            if w.shape[0] < w.shape[1]:
                raise ValueError("injective layers must not reduce dimension")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def latent_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def regularity(self) -> RegularityParams:
        l_sigma = 1.0 / self.slope
        smin = [float(np.linalg.svd(w, compute_uv=False)[-1]) for w in self.weights]
        r_lower = float(np.prod(smin)) / l_sigma ** self.n_layers
        l_g = (2.0 ** self.n_layers) * (l_sigma ** self.n_layers) / float(np.prod(smin))
        return RegularityParams(r_lower=r_lower, l_g=l_g, l_sigma=l_sigma)


def injective_forward(spec: InjectiveGeneratorSpec, z: np.ndarray) -> np.ndarray:
    z_arr = np.asarray(z, dtype=np.float64)
    h = np.atleast_2d(z_arr)
    if h.shape[1] != spec.latent_dim:
        raise ValueError("latent dimension mismatch")
    last = spec.n_layers - 1
    for i in range(spec.n_layers):
        h = h @ spec.weights[i].T + spec.biases[i]
        if i < last or spec.activation_on_output:
            h = activate(h, spec.activation, spec.slope)
    return h if z_arr.ndim == 2 else h[0]


# sampling ---------------------------------------------------------------

def sample(spec, n: int, seed) -> np.ndarray:
    """n i.i.d. rows from the spec's distribution; deterministic per seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _as_rng(seed)
    if isinstance(spec, GaussianSpec):
        chol = np.linalg.cholesky(spec.cov)
        return spec.mean + rng.standard_normal((n, spec.dim)) @ chol.T
    if isinstance(spec, MixtureSpec):
        idx = rng.choice(spec.k, size=n, p=spec.weights)
        return spec.means[idx] + rng.standard_normal((n, spec.dim))
    if isinstance(spec, ExpFamilySpec):
        _, sampler = exp_family_logdensity_and_sampler(spec)
        return sampler(rng, n)
    if isinstance(spec, InvertibleGeneratorSpec):
        z = rng.standard_normal((n, spec.dim)) * spec.gamma
        return invertible_forward(spec, z)
    if isinstance(spec, InjectiveGeneratorSpec):
        # latent prior exp(-|z|^2), i.e. N(0, I/2), matching the smoothed
        # density definition used by the laplace module
        z = rng.standard_normal((n, spec.latent_dim)) / np.sqrt(2.0)
        return injective_forward(spec, z)
    raise ValueError(f"cannot sample from {type(spec).__name__}")


def random_conditioned_matrix(d: int, rng, s_low: float = 0.5,
                              s_high: float = 2.0) -> np.ndarray:
    """W = U diag(s) V^T with Haar orthogonal factors and s ~ U[s_low, s_high]."""
    def haar(dim):
        q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
        return q * np.sign(np.diag(r))

    s = rng.uniform(s_low, s_high, size=d)
    return haar(d) @ np.diag(s) @ haar(d).T
