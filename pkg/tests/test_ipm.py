"""IPM estimator, Rademacher complexity, and sandwich checks."""

import numpy as np
import pytest

from ralab._rng import rng_from
from ralab.discriminators import gaussian_expected_relu
from ralab.divergences import (check_sandwich_gaussian, w1_population_surrogate,
                               w2_gaussian)
from ralab.divergences.ipm import (IpmConfig, ipm_estimate, rademacher_draw_sup,
                                   rademacher_estimate)
from ralab.families import (ContrastFamily, LinearStatFamily,
                            LogDensityNetFamily, MogFamily, ReluFamily)
from ralab.generators import GaussianSpec, sample

from conftest import random_gaussian_pair, random_invertible_spec


def gauss_sampler(spec):
    return lambda rng, n: sample(spec, n, rng)


def relu_grid_oracle(g1, g2, b_bound=2.0, step=1e-3):
    """Dense (v, b) closed-form grid for 1-D Gaussians."""
    bs = np.arange(-b_bound, b_bound + 1e-12, step)
    best = 0.0
    for v in (np.array([1.0]), np.array([-1.0])):
        vals = [abs(gaussian_expected_relu(g1, v, b)
                    - gaussian_expected_relu(g2, v, b)) for b in bs]
        best = max(best, max(vals))
    return best


G01 = GaussianSpec(mean=np.zeros(1), cov=np.eye(1))
G11 = GaussianSpec(mean=np.ones(1), cov=np.eye(1))
G21 = GaussianSpec(mean=np.full(1, 2.0), cov=np.eye(1))


def test_ipm_zero_for_equal_distributions():
    fam = ReluFamily(dim=1, b_bound=2.0)
    res = ipm_estimate(fam, gauss_sampler(G01), gauss_sampler(G01),
                       IpmConfig(), seed=0)
    assert res.value <= 2 * res.stderr


def test_ipm_tracks_grid_oracle():
    # oracle-first: the dense grid gives ~0.9919 for N(0,1) vs N(1,1), D=2
    oracle = relu_grid_oracle(G01, G11)
    assert oracle == pytest.approx(0.9919, abs=5e-4)
    fam = ReluFamily(dim=1, b_bound=2.0)
    res = ipm_estimate(fam, gauss_sampler(G01), gauss_sampler(G11),
                       IpmConfig(), seed=0)
    assert res.value <= oracle + 3 * res.stderr
    assert res.value >= 0.8 * oracle


def test_ipm_monotone_in_mean_gap():
    fam = ReluFamily(dim=1, b_bound=2.0)
    for seed in range(20):
        near = ipm_estimate(fam, gauss_sampler(G01), gauss_sampler(G11),
                            IpmConfig(restarts=3, steps=300), seed=seed).value
        far = ipm_estimate(fam, gauss_sampler(G01), gauss_sampler(G21),
                           IpmConfig(restarts=3, steps=300), seed=seed).value
        assert far > near


def test_ipm_deterministic():
    fam = ReluFamily(dim=1, b_bound=2.0)
    cfg = IpmConfig(restarts=2, steps=100)
    a = ipm_estimate(fam, gauss_sampler(G01), gauss_sampler(G11), cfg, seed=5)
    b = ipm_estimate(fam, gauss_sampler(G01), gauss_sampler(G11), cfg, seed=5)
    assert a.value == b.value and a.restart_values == b.restart_values


def test_ipm_below_w1_for_lipschitz_family(rng):
    # 1-Lipschitz ReLU family never beats exact empirical W1 on big batches
    from ralab.divergences import w1_exact
    g1, g2 = random_gaussian_pair(rng, 2)
    fam = ReluFamily(dim=2, b_bound=3.0)
    res = ipm_estimate(fam, gauss_sampler(g1), gauss_sampler(g2),
                       IpmConfig(), seed=3)
    xs = sample(g1, 2048, 11)
    ys = sample(g2, 2048, 12)
    assert res.value <= w1_exact(xs, ys) + 3 * res.stderr


def test_ipm_config_validation():
    with pytest.raises(ValueError):
        IpmConfig(restarts=0)
    with pytest.raises(ValueError):
        IpmConfig(steps=0)


def test_contrast_family_ipm_lower_bounded_by_kl(rng):
    # family contains log p - log q, so a well-optimized IPM should not sit
    # far below the symmetric KL
    from ralab.divergences import kl_empirical
    from ralab.generators import log_density_invertible
    p = random_invertible_spec(rng, d=2, layers=1, activation="exact-leaky")
    q = random_invertible_spec(rng, d=2, layers=1, activation="exact-leaky")
    fam = ContrastFamily(LogDensityNetFamily.for_generator(p, branch="trainable"))
    res = ipm_estimate(fam, gauss_sampler(p), gauss_sampler(q),
                       IpmConfig(eval_batch=8192), seed=2)
    xs, ys = sample(p, 50_000, 1), sample(q, 50_000, 2)
    kl_sym = (kl_empirical(lambda t: log_density_invertible(p, t),
                           lambda t: log_density_invertible(q, t), xs)
              + kl_empirical(lambda t: log_density_invertible(q, t),
                             lambda t: log_density_invertible(p, t), ys))
    assert res.value >= 0.5 * kl_sym - 3 * res.stderr


def test_mog_family_runs(rng):
    fam = ContrastFamily(MogFamily(k=2, dim=2, mean_bound=3.0))
    g1, g2 = random_gaussian_pair(rng, 2)
    res = ipm_estimate(fam, gauss_sampler(g1), gauss_sampler(g2),
                       IpmConfig(restarts=2, steps=150), seed=0)
    assert np.isfinite(res.value) and res.value >= 0


# rademacher ---------------------------------------------------------------------

def test_rademacher_constant_family_zero():
    class ZeroFamily:
        def init_params(self, rng):
            return [np.zeros(1)]

        def eval_graph(self, params, x):
            import ralab.diffgraph as dg
            x = dg.as_tensor(x)
            return dg.mul(0.0, dg.matmul(x, dg.constant(np.zeros(x.shape[1]))))

        def eval_np(self, params, x):
            return np.zeros(x.shape[0])

        def project(self, params):
            return params

    xs = rng_from(0).standard_normal((50, 2))
    val, _ = rademacher_estimate(ZeroFamily(), xs, 3,
                                 IpmConfig(restarts=1, steps=5), seed=0)
    assert val == 0.0


def test_rademacher_linear_family_analytic_per_draw():
    rng = rng_from(5)
    xs = rng.standard_normal((100, 3))
    fam = LinearStatFamily(3)
    cfg = IpmConfig(restarts=3, steps=1500, step_size=2e-2)
    for k in range(3):
        eps = rng_from(77, "draw", k).choice([-1.0, 1.0], size=100)
        analytic = float(np.linalg.norm(np.mean(eps[:, None] * xs, axis=0)))
        got = rademacher_draw_sup(fam, xs, eps, cfg, seed=k)
        assert got == pytest.approx(analytic, rel=1e-2)


def test_rademacher_scales_inverse_sqrt_n():
    fam = ReluFamily(dim=3, b_bound=2.0)
    g = GaussianSpec(mean=np.zeros(3), cov=np.eye(3))
    cfg = IpmConfig(restarts=2, steps=600, step_size=5e-3)
    vals = {}
    for n in (100, 400):
        xs = sample(g, n, 31)
        vals[n], _ = rademacher_estimate(fam, xs, 6, cfg, seed=9)
    ratio = vals[100] / vals[400]
    assert 1.6 <= ratio <= 2.4


def test_rademacher_needs_two_draws():
    fam = LinearStatFamily(2)
    with pytest.raises(ValueError):
        rademacher_estimate(fam, np.zeros((10, 2)), 1, IpmConfig(), seed=0)


# sandwich -----------------------------------------------------------------------

def test_sandwich_identical_pair_trivial():
    rep = check_sandwich_gaussian(G01, G01, ipm_value=0.0, ipm_stderr=1e-6,
                                  sigma_min=0.5, sigma_max=2.0)
    assert rep.lower_ok and rep.upper_ok
    assert rep.w2 == pytest.approx(0.0, abs=1e-7)


def test_sandwich_mean_shift_half_gap():
    # spherical mean-shifted pair: IPM well below W1 = |mu gap|, above the
    # kappa-scaled W2 lower bound
    fam = ReluFamily(dim=3, b_bound=3.0)
    g1 = GaussianSpec(mean=np.zeros(3), cov=np.eye(3))
    g2 = GaussianSpec(mean=np.array([1.0, 0.0, 0.0]), cov=np.eye(3))
    res = ipm_estimate(fam, gauss_sampler(g1), gauss_sampler(g2),
                       IpmConfig(), seed=1)
    rep = check_sandwich_gaussian(g1, g2, res.value, res.stderr,
                                  sigma_min=1.0, sigma_max=1.0)
    assert rep.lower_ok and rep.upper_ok
    # the proof's mean-gap argument guarantees at least half the gap
    assert res.value >= 0.5 - 3 * res.stderr


def test_w1_surrogate_close_to_w2_for_gaussians(rng):
    g1, g2 = random_gaussian_pair(rng, 2)
    w1s = w1_population_surrogate(g1, g2, seed=3, n=2048, cap=1024)
    w2 = w2_gaussian(g1, g2)
    # W1 <= W2; the empirical surrogate carries finite-sample bias upward
    assert w1s <= w2 + 0.5
    assert w1s > 0
