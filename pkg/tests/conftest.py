"""Shared test helpers: finite-difference oracles and spec factories."""

import numpy as np
import pytest

from ralab._rng import rng_from
from ralab.generators import (ConstraintParams, GaussianSpec,
                              InjectiveGeneratorSpec, InvertibleGeneratorSpec,
                              random_conditioned_matrix)


def fd_gradient(f, x, step=1e-5):
    """Central finite differences of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2.0 * step)
    return g


def fd_hessian_of_grad(grad_fn, x, step=1e-4):
    """Central differences of a gradient function -> Hessian."""
    x = np.asarray(x, dtype=np.float64)
    k = x.size
    h = np.empty((k, k))
    for i in range(k):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        h[:, i] = (grad_fn(xp) - grad_fn(xm)) / (2.0 * step)
    return 0.5 * (h + h.T)


def random_invertible_spec(rng, d=None, layers=None, activation=None,
                           bias_scale=0.3):
    d = d if d is not None else int(rng.integers(2, 8))
    layers = layers if layers is not None else int(rng.integers(1, 4))
    activation = activation if activation is not None else \
        ("exact-leaky" if rng.uniform() < 0.5 else "smoothed-leaky")
    weights = tuple(random_conditioned_matrix(d, rng) for _ in range(layers))
    biases = tuple(bias_scale * rng.standard_normal(d) / np.sqrt(d)
                   for _ in range(layers))
    gamma = rng.uniform(0.5, 1.0, size=d)
    return InvertibleGeneratorSpec(weights=weights, biases=biases, gamma=gamma,
                                   activation=activation, slope=0.5,
                                   constraints=ConstraintParams(r_w=2.0, r_b=1.0,
                                                                c_sigma=2.0,
                                                                delta=0.5))


def random_injective_spec(rng, k=2, d=3, layers=2, activation="smoothed-leaky"):
    dims = [k] + [int(x) for x in np.linspace(k, d, layers + 1).round()[1:]]
    dims[-1] = d
    weights, biases = [], []
    for i in range(layers):
        a = rng.standard_normal((dims[i + 1], dims[i]))
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        s_new = rng.uniform(0.6, 1.8, size=s.size)
        weights.append(u @ np.diag(s_new) @ vt)
        biases.append(0.2 * rng.standard_normal(dims[i + 1]))
    return InjectiveGeneratorSpec(weights=tuple(weights), biases=tuple(biases),
                                  activation=activation, slope=0.5)


def random_gaussian_pair(rng, d, d_bound=3.0, sigma_min=0.5, sigma_max=2.0):
    def one():
        mu = rng.standard_normal(d)
        mu *= rng.uniform(0, d_bound) / max(np.linalg.norm(mu), 1e-12)
        q, r = np.linalg.qr(rng.standard_normal((d, d)))
        q = q * np.sign(np.diag(r))
        eigs = rng.uniform(sigma_min ** 2, sigma_max ** 2, size=d)
        return GaussianSpec(mean=mu, cov=(q * eigs) @ q.T)
    return one(), one()


@pytest.fixture
def rng():
    return rng_from(20240)
