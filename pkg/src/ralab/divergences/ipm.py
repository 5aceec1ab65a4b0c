"""Neural-net IPM and empirical Rademacher complexity by gradient ascent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import diffgraph as dg
from .._rng import rng_from
from ..families import gradient_penalty_graph
from ..training import rmsprop_init, rmsprop_step


@dataclass
class IpmConfig:
    restarts: int = 5
    steps: int = 500
    step_size: float = 1e-3
    batch: int = 256
    eval_batch: int = 2048
    regularization: str = "clip"  # or "gp"
    gp_coef: float = 10.0
    decay: float = 0.9
    eps: float = 1e-8

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.regularization not in ("clip", "gp"):
            raise ValueError("regularization must be 'clip' or 'gp'")


@dataclass
class IpmResult:
    value: float
    stderr: float
    best_params: list
    restart_values: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


class IpmDiverged(RuntimeError):
    """Optimizer hit a non-finite loss; diagnostics in args."""


def _mean_contrast(family, param_nodes, xp, xq) -> dg.Tensor:
    return dg.sub(dg.tmean(family.eval_graph(param_nodes, xp)),
                  dg.tmean(family.eval_graph(param_nodes, xq)))


def ipm_estimate(family, sampler_p, sampler_q, config: IpmConfig,
                 seed: int = 0) -> IpmResult:
    """sup_f |E_p f - E_q f| by multi-restart stochastic ascent.

    Each restart r uses the derived stream seed+r; the reported value is
    the best held-out contrast (fresh batches shared across restarts),
    so train-side overfitting does not leak into the estimate.
    """
    eval_rng = rng_from(seed, "ipm-eval")
    xp_eval = sampler_p(eval_rng, config.eval_batch)
    xq_eval = sampler_q(eval_rng, config.eval_batch)

    best_value = -np.inf
    best_params = None
    best_stderr = 0.0
    restart_values = []
    for r in range(config.restarts):
        rng = rng_from(seed + r, "ipm-restart")
        params = family.init_params(rng)
        state = rmsprop_init(params)
        try:
            for step in range(config.steps):
                xp = sampler_p(rng, config.batch)
                xq = sampler_q(rng, config.batch)
                nodes = [dg.Tensor(p) for p in params]
                contrast = _mean_contrast(family, nodes, xp, xq)
                sign = 1.0 if float(contrast.data) >= 0 else -1.0
                objective = dg.mul(sign, contrast)
                if config.regularization == "gp":
                    penalty = gradient_penalty_graph(family, nodes, xp, xq, rng)
                    objective = dg.sub(objective, dg.mul(config.gp_coef, penalty))
                grads = dg.grad(objective, nodes)
                params, state = rmsprop_step(params, [-g for g in grads], state,
                                             config.step_size, config.decay,
                                             config.eps)
                if config.regularization == "clip":
                    params = family.project(params)
        except dg.NonFiniteError as exc:
            raise IpmDiverged(f"restart {r}: non-finite loss ({exc})")

        fp = family.eval_np(params, xp_eval)
        fq = family.eval_np(params, xq_eval)
        value = abs(float(np.mean(fp) - np.mean(fq)))
        stderr = float(np.sqrt(np.var(fp) / fp.size + np.var(fq) / fq.size))
        restart_values.append(value)
        if value > best_value:
            best_value, best_params, best_stderr = value, params, stderr

    return IpmResult(value=best_value, stderr=best_stderr,
                     best_params=best_params, restart_values=restart_values,
                     metadata={"restarts": config.restarts, "steps": config.steps,
                               "step_size": config.step_size, "batch": config.batch,
                               "eval_batch": config.eval_batch, "seed": seed,
                               "regularization": config.regularization})


def rademacher_draw_sup(family, samples: np.ndarray, eps: np.ndarray,
                        config: IpmConfig, seed: int = 0) -> float:
    """sup_f |(1/n) sum_i eps_i f(X_i)| for one fixed sign vector.

    The inner problem is deterministic, so this uses plain projected
    gradient ascent (RMSProp's per-coordinate normalization would settle
    on the wrong point of a Euclidean constraint ball)."""
    samples = np.asarray(samples, dtype=np.float64)
    best = -np.inf
    for r in range(config.restarts):
        rng = rng_from(seed + r, "rademacher-opt")
        params = family.init_params(rng)
        try:
            for _ in range(config.steps):
                nodes = [dg.Tensor(p) for p in params]
                corr = dg.tmean(dg.mul(eps, family.eval_graph(nodes, samples)))
                sign = 1.0 if float(corr.data) >= 0 else -1.0
                grads = dg.grad(dg.mul(sign, corr), nodes)
                params = family.project(
                    [p + config.step_size * g for p, g in zip(params, grads)])
        except dg.NonFiniteError as exc:
            raise IpmDiverged(f"rademacher restart {r}: non-finite loss ({exc})")
        value = abs(float(np.mean(eps * family.eval_np(params, samples))))
        best = max(best, value)
    return best


def rademacher_estimate(family, samples: np.ndarray, m_draws: int,
                        config: IpmConfig, seed: int = 0):
    """Average over sign draws of sup_f |(1/n) sum_i eps_i f(X_i)|.

    The inner sup runs the same multi-restart ascent as ipm_estimate on
    the fixed sample set. Returns (value, stderr over draws).
    """
    if m_draws < 2:
        raise ValueError("m_draws must be >= 2")
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[0]
    sups = []
    for k in range(m_draws):
        eps = rng_from(seed, "rademacher-signs", k).choice([-1.0, 1.0], size=n)
        sups.append(rademacher_draw_sup(family, samples, eps, config,
                                        seed=int(rng_from(seed, "rademacher-sub",
                                                          k).integers(2 ** 31))))
    sups_arr = np.asarray(sups)
    return float(np.mean(sups_arr)), float(np.std(sups_arr) / np.sqrt(m_draws))
