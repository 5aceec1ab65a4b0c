"""Exact W1 solver, Gaussian closed forms, KL estimators, checkers."""

import itertools
import math

import numpy as np
import pytest

from ralab._rng import rng_from
from ralab import _assign_py
from ralab.divergences import (DivergenceReport, check_transport_inequality,
                               expfamily_ipm_closed, kl_empirical, kl_expfamily,
                               kl_gaussian, w1_exact, w2_gaussian)
from ralab.divergences.assignment import assignment_cost, solve_assignment
from ralab.generators import (ExpFamilySpec, GaussianSpec,
                              QuadraticLogPartition,
                              exp_family_logdensity_and_sampler,
                              log_density_gaussian, sample)

from conftest import random_gaussian_pair


def brute_force_w1(p, q):
    n = p.shape[0]
    best = math.inf
    for perm in itertools.permutations(range(n)):
        cost = math.fsum(float(np.linalg.norm(p[i] - q[perm[i]]))
                         for i in range(n))
        best = min(best, cost)
    return best / n


# w1 ------------------------------------------------------------------------

def test_w1_identical_batches_zero(rng):
    xs = rng.standard_normal((32, 3))
    assert w1_exact(xs, xs.copy()) == 0.0


def test_w1_singleton():
    assert w1_exact(np.array([[0.0]]), np.array([[1.0]])) == 1.0


def test_w1_matches_brute_force():
    for seed in range(50):
        rng = rng_from(seed, "bf")
        n = int(rng.integers(2, 7))
        p = rng.standard_normal((n, 2))
        q = rng.standard_normal((n, 2))
        assert w1_exact(p, q) == pytest.approx(brute_force_w1(p, q), abs=1e-10)


def test_w1_one_dimensional_order_statistics():
    for seed, n in ((0, 16), (1, 128), (2, 512)):
        rng = rng_from(seed, "1d")
        p = rng.standard_normal((n, 1))
        q = rng.standard_normal((n, 1)) + 0.5
        want = float(np.mean(np.abs(np.sort(p[:, 0]) - np.sort(q[:, 0]))))
        assert w1_exact(p, q) == pytest.approx(want, abs=1e-10)


def test_w1_backends_agree(rng):
    for n in (8, 64, 200):
        p = rng.standard_normal((n, 3))
        q = rng.standard_normal((n, 3))
        from scipy.spatial.distance import cdist
        cost = cdist(p, q)
        c_cost = assignment_cost(cost)
        perm_py = _assign_py.solve_assignment(cost)
        py_cost = math.fsum(cost[i, perm_py[i]] for i in range(n))
        assert c_cost == pytest.approx(py_cost, abs=1e-10)


def test_w1_against_scipy_reference(rng):
    from scipy.optimize import linear_sum_assignment
    from scipy.spatial.distance import cdist
    for n in (10, 100):
        p = rng.standard_normal((n, 4))
        q = rng.standard_normal((n, 4)) + 0.3
        cost = cdist(p, q)
        rows, cols = linear_sum_assignment(cost)
        assert assignment_cost(cost) == pytest.approx(cost[rows, cols].sum(),
                                                      abs=1e-9)


def test_w1_metric_properties(rng):
    for _ in range(5):
        a = rng.standard_normal((12, 2))
        b = rng.standard_normal((12, 2))
        c = rng.standard_normal((12, 2))
        assert w1_exact(a, b) == pytest.approx(w1_exact(b, a), abs=1e-12)
        assert w1_exact(a, c) <= w1_exact(a, b) + w1_exact(b, c) + 1e-9
    perm = rng.permutation(12)
    xs = rng.standard_normal((12, 2))
    assert w1_exact(xs, xs[perm]) == 0.0
    shifted = xs + 0.01
    assert w1_exact(xs, shifted) > 0.0


def test_w1_shape_checks():
    with pytest.raises(ValueError, match="differ"):
        w1_exact(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(ValueError, match="cap"):
        w1_exact(np.zeros((3000, 1)), np.zeros((3000, 1)))


def test_solve_assignment_square_only():
    with pytest.raises(ValueError):
        solve_assignment(np.zeros((2, 3)))


# gaussian closed forms ------------------------------------------------------

def test_w2_identical_zero(rng):
    g, _ = random_gaussian_pair(rng, 3)
    assert w2_gaussian(g, g) == pytest.approx(0.0, abs=1e-7)


def test_w2_translation():
    g1 = GaussianSpec(mean=np.zeros(3), cov=np.eye(3))
    g2 = GaussianSpec(mean=np.array([1.0, 2.0, 2.0]), cov=np.eye(3))
    assert w2_gaussian(g1, g2) == pytest.approx(3.0, abs=1e-12)


def test_w2_commuting_diagonal():
    g1 = GaussianSpec(mean=np.zeros(2), cov=np.diag([1.0, 4.0]))
    g2 = GaussianSpec(mean=np.zeros(2), cov=np.eye(2))
    assert w2_gaussian(g1, g2) == pytest.approx(1.0, abs=1e-10)


def test_w2_commuting_random_diagonals(rng):
    lam1 = rng.uniform(0.3, 4.0, 4)
    lam2 = rng.uniform(0.3, 4.0, 4)
    g1 = GaussianSpec(mean=np.zeros(4), cov=np.diag(lam1))
    g2 = GaussianSpec(mean=np.zeros(4), cov=np.diag(lam2))
    want = np.sqrt(np.sum((np.sqrt(lam1) - np.sqrt(lam2)) ** 2))
    assert w2_gaussian(g1, g2) == pytest.approx(want, abs=1e-10)


def test_kl_gaussian_basic():
    g1 = GaussianSpec(mean=np.zeros(1), cov=np.eye(1))
    g2 = GaussianSpec(mean=np.ones(1), cov=np.eye(1))
    assert kl_gaussian(g1, g1) == pytest.approx(0.0, abs=1e-14)
    assert kl_gaussian(g1, g2) == pytest.approx(0.5, abs=1e-14)


def test_kl_empirical_same_function_zero(rng):
    g = GaussianSpec(mean=np.zeros(2), cov=np.eye(2))
    xs = sample(g, 1000, 3)
    logp = lambda pts: log_density_gaussian(g, pts)  # noqa: E731
    assert kl_empirical(logp, logp, xs) == 0.0


def test_kl_empirical_gaussian_mean_shift():
    g1 = GaussianSpec(mean=np.zeros(1), cov=np.eye(1))
    g2 = GaussianSpec(mean=np.ones(1), cov=np.eye(1))
    xs = sample(g1, 1_000_000, 17)
    got = kl_empirical(lambda p: log_density_gaussian(g1, p),
                       lambda p: log_density_gaussian(g2, p), xs)
    assert got == pytest.approx(0.5, abs=0.005)


def test_kl_empirical_matches_closed_form_3se(rng):
    n = 40_000
    for trial in range(20):
        g1, g2 = random_gaussian_pair(rng, int(rng.integers(1, 4)))
        xs = sample(g1, n, rng_from(900 + trial))
        diffs = (log_density_gaussian(g1, xs) - log_density_gaussian(g2, xs))
        se = float(np.std(diffs) / np.sqrt(n))
        assert abs(float(np.mean(diffs)) - kl_gaussian(g1, g2)) < 3 * se


def test_kl_empirical_nonnegative_up_to_noise(rng):
    n = 20_000
    for trial in range(10):
        g1, g2 = random_gaussian_pair(rng, 2)
        xs = sample(g1, n, rng_from(1300 + trial))
        diffs = (log_density_gaussian(g1, xs) - log_density_gaussian(g2, xs))
        se = float(np.std(diffs) / np.sqrt(n))
        got = kl_empirical(lambda p: log_density_gaussian(g1, p),
                           lambda p: log_density_gaussian(g2, p), xs)
        assert got >= -3 * se


def test_kl_empirical_rejects_nonfinite():
    xs = np.array([[0.0], [1.0]])
    with pytest.raises(ValueError, match="non-finite"):
        kl_empirical(lambda p: np.array([np.inf, 0.0]),
                     lambda p: np.zeros(2), xs)


# exponential family ------------------------------------------------------------

def test_expfamily_kl_zero_and_quadratic():
    t = np.array([0.4, -1.2])
    assert kl_expfamily(t, t, QuadraticLogPartition) == 0.0
    t2 = np.array([1.0, 1.0])
    assert kl_expfamily(t, t2, QuadraticLogPartition) == pytest.approx(
        0.5 * float(np.sum((t - t2) ** 2)), abs=1e-14)


def test_expfamily_kl_matches_gaussian_closed_form(rng):
    t1, t2 = rng.standard_normal(3), rng.standard_normal(3)
    g1 = GaussianSpec(mean=t1, cov=np.eye(3))
    g2 = GaussianSpec(mean=t2, cov=np.eye(3))
    assert kl_expfamily(t1, t2, QuadraticLogPartition) == pytest.approx(
        kl_gaussian(g1, g2), abs=1e-12)


def test_expfamily_ipm_closed_identities(rng):
    t1, t2 = rng.standard_normal(4), rng.standard_normal(4)
    ipm = expfamily_ipm_closed(t1, t2, QuadraticLogPartition)
    assert ipm == pytest.approx(float(np.linalg.norm(t1 - t2)), abs=1e-14)
    assert expfamily_ipm_closed(t1, t1, QuadraticLogPartition) == 0.0
    # curvature sandwich, gamma = beta = 1: both sides equal sqrt(2 KL)
    kl = kl_expfamily(t1, t2, QuadraticLogPartition)
    assert np.sqrt(2 * kl) / np.sqrt(1.0) >= ipm - 1e-12
    assert np.sqrt(2 * kl) * np.sqrt(1.0) <= ipm + 1e-12
    # and the norm sandwich gamma |dt| <= ipm <= beta |dt|
    gap = float(np.linalg.norm(t1 - t2))
    assert gap - 1e-12 <= ipm <= gap + 1e-12


def test_expfamily_sampler_kl_consistency(rng):
    # empirical KL between two family members matches the Bregman value
    t1, t2 = np.array([0.5, 0.0]), np.array([-0.3, 0.8])
    logp, sampler = exp_family_logdensity_and_sampler(ExpFamilySpec(theta=t1))
    logq, _ = exp_family_logdensity_and_sampler(ExpFamilySpec(theta=t2))
    xs = sampler(rng_from(8), 200_000)
    want = kl_expfamily(t1, t2, QuadraticLogPartition)
    assert kl_empirical(logp, logq, xs) == pytest.approx(want, abs=0.02)


# transport inequality ------------------------------------------------------------

def test_transport_equality_pair():
    # N(0,1) vs N(1,1): W1 = 1, KL = 0.5, sigma^2 = 1 -> equality
    assert check_transport_inequality(0.5, 1.0, 1.0, tol=1e-10)
    assert not check_transport_inequality(0.5, 1.0 + 1e-4, 1.0, tol=1e-10)
    assert 1.0 ** 2 == pytest.approx(2 * 1.0 * 0.5, abs=1e-10)


def test_transport_p_equals_q():
    assert check_transport_inequality(0.0, 0.0, 1.0)


def test_transport_random_gaussians(rng):
    for _ in range(20):
        g1, g2 = random_gaussian_pair(rng, int(rng.integers(1, 5)))
        sigma2 = max(np.max(np.linalg.eigvalsh(g1.cov)),
                     np.max(np.linalg.eigvalsh(g2.cov)))
        kl_sym = kl_gaussian(g1, g2) + kl_gaussian(g2, g1)
        assert check_transport_inequality(kl_sym, w2_gaussian(g1, g2), sigma2)


def test_transport_requires_positive_sigma():
    with pytest.raises(ValueError):
        check_transport_inequality(1.0, 1.0, 0.0)


# report -------------------------------------------------------------------------

def test_divergence_report_round_trip():
    rep = DivergenceReport(ipm=0.5, ipm_stderr=0.01, w1_exact=0.7,
                           w2_closed=0.8, kl_forward=0.2, kl_backward=0.3,
                           metadata={"seed": 1, "restarts": 5})
    back = DivergenceReport.from_json(rep.to_json())
    assert back == rep


def test_divergence_report_rejects_negative():
    with pytest.raises(ValueError, match="negative"):
        DivergenceReport(ipm=-1.0, ipm_stderr=0.0)
