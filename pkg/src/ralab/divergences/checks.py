"""Sandwich and transportation-inequality checkers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..generators import GaussianSpec, sample
from .assignment import MAX_BATCH, w1_exact
from .closed_forms import w2_gaussian


@dataclass
class SandwichReport:
    ipm: float
    stderr: float
    w2: float
    w1_surrogate: float
    kappa: float
    lower_ok: bool
    upper_ok: bool
    lower_margin: float  # ipm - kappa*W2 (+3se slack already applied in the flag)
    upper_margin: float  # W1 surrogate - ipm


def w1_population_surrogate(g1: GaussianSpec, g2: GaussianSpec, seed: int,
                            n: int = 4096, cap: int = 1024) -> float:
    """Empirical W1 at n samples, split into capped sub-batches and averaged.

    A cheap stand-in for the population W1; biased (empirical W1 between
    finite batches overshoots the population value, and capping batches
    moves it further), so sandwich checks prefer the W2 closed form.
    """
    cap = min(cap, MAX_BATCH)
    xs = sample(g1, n, seed)
    ys = sample(g2, n, seed + 1)
    parts = [w1_exact(xs[i:i + cap], ys[i:i + cap])
             for i in range(0, n - cap + 1, cap)]
    return float(np.mean(parts))


def check_sandwich_gaussian(g1: GaussianSpec, g2: GaussianSpec, ipm_value: float,
                            ipm_stderr: float, sigma_min: float, sigma_max: float,
                            w1_surrogate: float | None = None) -> SandwichReport:
    """Check kappa*W2 - 3se <= IPM <= W1 surrogate + 3se.

    kappa = sigma_min / (2 sqrt(2 pi d) sigma_max); the upper side uses
    the W2 closed form (>= W1) unless an empirical W1 is supplied.
    """
    d = g1.dim
    w2 = w2_gaussian(g1, g2)
    kappa = sigma_min / (2.0 * np.sqrt(2.0 * np.pi * d) * sigma_max)
    upper_ref = w2 if w1_surrogate is None else w1_surrogate
    slack = 3.0 * ipm_stderr
    lower_ok = ipm_value >= kappa * w2 - slack
    upper_ok = ipm_value <= upper_ref + slack
    return SandwichReport(ipm=ipm_value, stderr=ipm_stderr, w2=w2,
                          w1_surrogate=upper_ref, kappa=kappa,
                          lower_ok=bool(lower_ok), upper_ok=bool(upper_ok),
                          lower_margin=float(ipm_value - kappa * w2),
                          upper_margin=float(upper_ref - ipm_value))


def check_transport_inequality(kl: float, w_value: float, sigma2: float,
                               tol: float = 1e-9) -> bool:
    """W^2 <= 2 sigma^2 KL + tol (Bobkov-Gotze / Gozlan form)."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    return bool(w_value ** 2 <= 2.0 * sigma2 * kl + tol)
