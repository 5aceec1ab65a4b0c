"""Closed-form divergences and empirical KL."""

from __future__ import annotations

import numpy as np

from ..generators import GaussianSpec


def psd_sqrt(mat: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition with eigenvalue floor."""
    sym = 0.5 * (mat + mat.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    root = (eigvecs * np.sqrt(np.maximum(eigvals, floor))) @ eigvecs.T
    return 0.5 * (root + root.T)


def w2_gaussian(g1: GaussianSpec, g2: GaussianSpec) -> float:
    """sqrt(|mu1-mu2|^2 + tr S1 + tr S2 - 2 tr[(S1^{1/2} S2 S1^{1/2})^{1/2}])."""
    root1 = psd_sqrt(g1.cov)
    cross = psd_sqrt(root1 @ g2.cov @ root1)
    gap2 = (np.sum((g1.mean - g2.mean) ** 2) + np.trace(g1.cov)
            + np.trace(g2.cov) - 2.0 * np.trace(cross))
    return float(np.sqrt(max(gap2, 0.0)))


def kl_gaussian(g1: GaussianSpec, g2: GaussianSpec) -> float:
    d = g1.dim
    diff = g2.mean - g1.mean
    sol_cov = np.linalg.solve(g2.cov, g1.cov)
    sol_diff = np.linalg.solve(g2.cov, diff)
    _, logdet1 = np.linalg.slogdet(g1.cov)
    _, logdet2 = np.linalg.slogdet(g2.cov)
    return float(0.5 * (np.trace(sol_cov) + diff @ sol_diff - d
                        + logdet2 - logdet1))


def kl_empirical(logp, logq, samples_from_p: np.ndarray) -> float:
    """Mean of log p(x) - log q(x) over samples drawn from p."""
    lp = np.asarray(logp(samples_from_p), dtype=np.float64)
    lq = np.asarray(logq(samples_from_p), dtype=np.float64)
    if not (np.all(np.isfinite(lp)) and np.all(np.isfinite(lq))):
        raise ValueError("non-finite log density at a sample")
    return float(np.mean(lp - lq))


def kl_expfamily(theta1: np.ndarray, theta2: np.ndarray, log_partition) -> float:
    """Bregman divergence of the log-partition:
    A(theta2) - A(theta1) - <grad A(theta1), theta2 - theta1>."""
    theta1 = np.asarray(theta1, dtype=np.float64)
    theta2 = np.asarray(theta2, dtype=np.float64)
    return float(log_partition.value(theta2) - log_partition.value(theta1)
                 - log_partition.grad(theta1) @ (theta2 - theta1))


def expfamily_ipm_closed(theta1: np.ndarray, theta2: np.ndarray, log_partition) -> float:
    """sup over unit-ball linear functionals of <v, grad A(t1) - grad A(t2)>."""
    gap = log_partition.grad(np.asarray(theta1, dtype=np.float64)) \
        - log_partition.grad(np.asarray(theta2, dtype=np.float64))
    return float(np.linalg.norm(gap))
