"""Dataset builders and the three experiment protocols, CSV/JSON results.

All runs are reproducible: every random quantity derives from the config
seed plus a unit id, units are processed in sorted order, and CSVs are
written with repr-exact floats (wall-clock columns are the only
nondeterministic output).
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np
from scipy.stats import spearmanr

from ._rng import rng_from
from .discriminators import ConstraintViolation
from .divergences.assignment import w1_exact
from .divergences.closed_forms import kl_empirical
from .divergences.ipm import IpmConfig, ipm_estimate
from .families import ContrastFamily, LogDensityNetFamily, MlpFamily
from .generators import (InvertibleGeneratorSpec, log_density_invertible,
                         random_conditioned_matrix, sample)
from .training import MlpGenModel, TrainConfig, wgan_train
from . import svgplot


# datasets ----------------------------------------------------------------

def make_circle(n: int, seed) -> np.ndarray:
    """Uniform draws from the unit circle x^2 + y^2 = 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else rng_from(int(seed))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return np.column_stack([np.cos(theta), np.sin(theta)])


def make_swissroll(n: int, seed) -> np.ndarray:
    """(z cos 4 pi z, z sin 4 pi z) with z ~ U[0.25, 1]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else rng_from(int(seed))
    z = rng.uniform(0.25, 1.0, size=n)
    return np.column_stack([z * np.cos(4.0 * np.pi * z),
                            z * np.sin(4.0 * np.pi * z)])


def make_ground_truth_generator(d: int, layers: int, seed) -> InvertibleGeneratorSpec:
    """Well-conditioned generator: singular values in [0.5, 2], zero biases.

    The constraint box gets headroom (R_W = 2.5) above the ground-truth
    singular-value range, so mild perturbations stay in-family and the
    flag fires on genuine conditioning blowups.
    """
    if d < 1 or layers < 1:
        raise ValueError("d and layers must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else rng_from(int(seed))
    weights = tuple(random_conditioned_matrix(d, rng) for _ in range(layers))
    biases = tuple(np.zeros(d) for _ in range(layers))
    from .generators import ConstraintParams
    return InvertibleGeneratorSpec(weights=weights, biases=biases,
                                   gamma=np.ones(d), activation="exact-leaky",
                                   slope=0.5,
                                   constraints=ConstraintParams(r_w=2.5, r_b=1.0))


def perturb_generator(spec: InvertibleGeneratorSpec, noise_scale: float,
                      seed) -> tuple[InvertibleGeneratorSpec, bool]:
    """Additive Gaussian weight/bias noise; flags exits from the constraint set."""
    if noise_scale < 0:
        raise ValueError("noise_scale must be >= 0")
    rng = seed if isinstance(seed, np.random.Generator) else rng_from(int(seed))
    d = spec.dim
    weights = tuple(w + noise_scale * rng.standard_normal((d, d)) / np.sqrt(d)
                    for w in spec.weights)
    biases = tuple(b + noise_scale * rng.standard_normal(d) for b in spec.biases)
    perturbed = InvertibleGeneratorSpec(weights=weights, biases=biases,
                                        gamma=spec.gamma, activation=spec.activation,
                                        slope=spec.slope, constraints=spec.constraints)
    return perturbed, not perturbed.in_constraint_set()


# config ---------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    kind: str                       # circle | swissroll | invertible | perturbation
    scale: str = "desk"             # desk | paper
    seed: int = 0
    dims: int = 4
    layers: int = 2
    seeds: tuple = (0, 1, 2, 3, 4, 5)
    n_pairs: int = 30
    noise_scale_range: tuple = (0.01, 0.2)
    kl_samples: int = 100_000
    total_gen_steps: int = 3000
    eval_every: int = 150
    critic_steps: int = 10
    batch: int = 64
    lr: float = 1e-4
    regularizer: str = "gp"
    gp_coef: float = 10.0
    ipm_restarts: int = 5
    ipm_steps: int = 500
    ipm_step_size: float = 1e-3
    ipm_batch: int = 256
    ipm_eval_batch: int = 2048
    critic_warmup_steps: int = 1500
    vanilla_disc: bool = False      # MLP 50-10 discriminator variant
    w1_batch: int = 512
    write_svg: bool = True
    n_workers: int = 2              # seeds/pairs fan out across processes
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("circle", "swissroll", "invertible", "perturbation"):
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.scale not in ("desk", "paper"):
            raise ValueError("scale must be 'desk' or 'paper'")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        cfg = ExperimentConfig(kind=doc["kind"])
        known = {k: v for k, v in doc.items() if hasattr(cfg, k)}
        cfg = dc_replace(cfg, **known)
        if cfg.scale == "paper":
            cfg = dc_replace(cfg, dims=doc.get("dims", 10),
                             total_gen_steps=doc.get("total_gen_steps", 10_000),
                             eval_every=doc.get("eval_every", 500),
                             n_pairs=doc.get("n_pairs", 100))
        for k, v in doc.items():
            if not hasattr(cfg, k):
                cfg.extra[k] = v
        return cfg

    def to_dict(self) -> dict:
        doc = {k: getattr(self, k) for k in self.__dataclass_fields__}
        doc["seeds"] = list(self.seeds)
        doc["noise_scale_range"] = list(self.noise_scale_range)
        return doc

    def ipm_config(self) -> IpmConfig:
        return IpmConfig(restarts=self.ipm_restarts, steps=self.ipm_steps,
                         step_size=self.ipm_step_size, batch=self.ipm_batch,
                         eval_batch=self.ipm_eval_batch)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(batch=self.batch, critic_steps=self.critic_steps,
                           critic_warmup_steps=self.critic_warmup_steps,
                           lr=self.lr, regularizer=self.regularizer,
                           gp_coef=self.gp_coef,
                           total_gen_steps=self.total_gen_steps,
                           eval_every=self.eval_every, seed=seed)


@dataclass
class CorrelationResult:
    pairs: list                  # rows (pair_id, kl_pq, kl_qp, kl_sym, ipm, flagged)
    pearson_log: float
    n_outliers_dropped: int

    def __post_init__(self):
        if np.isfinite(self.pearson_log) and not -1.0 <= self.pearson_log <= 1.0:
            raise ValueError("correlation outside [-1, 1]")


# small numeric helpers --------------------------------------------------------

def pearson(xs, ys) -> float:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size < 2 or np.std(xs) == 0 or np.std(ys) == 0:
        return float("nan")
    return float(np.corrcoef(xs, ys)[0, 1])


def jackknife_sign_stable(xs, ys) -> bool:
    """Leave-one-out correlations never flip sign when |corr| >= 0.3."""
    base = pearson(xs, ys)
    if not np.isfinite(base) or abs(base) < 0.3:
        return True
    n = len(xs)
    for i in range(n):
        sub = pearson(np.delete(xs, i), np.delete(ys, i))
        if np.isfinite(sub) and np.sign(sub) != np.sign(base):
            return False
    return True


def _json_safe(obj):
    """Replace non-finite floats with None so summaries stay strict JSON."""
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not np.isfinite(obj):
        return None
    return obj


def write_csv(path: str, header: str, rows) -> None:
    lines = [header]
    for row in rows:
        cells = []
        for cell in row:
            if cell is None:
                cells.append("")
            elif isinstance(cell, (bool, np.bool_)):
                cells.append(str(int(cell)))
            elif isinstance(cell, (int, np.integer)):
                cells.append(str(int(cell)))
            elif isinstance(cell, str):
                cells.append(cell)
            else:
                cells.append(repr(float(cell)))
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path: str):
    """Parse back a CSV written by write_csv: (header, rows of floats/None)."""
    with open(path) as fh:
        lines = fh.read().strip().split("\n")
    rows = []
    for line in lines[1:]:
        row = []
        for cell in line.split(","):
            row.append(None if cell == "" else float(cell))
        rows.append(row)
    return lines[0], rows


# hooks -------------------------------------------------------------------

def make_invertible_hooks(target: InvertibleGeneratorSpec, config: ExperimentConfig):
    """ipm_eval (cold-start discriminator) + empirical KL hooks."""
    if config.vanilla_disc:
        family = MlpFamily((target.dim, 50, 10, 1))
    else:
        family = ContrastFamily(LogDensityNetFamily.for_generator(
            target, branch="trainable"))
    ipm_cfg = config.ipm_config()

    def target_sampler(rng, n):
        return sample(target, n, rng)

    def hook(step, model, params, rng):
        gen_spec = model.to_spec(params)

        def gen_sampler(r, n):
            return sample(gen_spec, n, r)

        res = ipm_estimate(family, target_sampler, gen_sampler, ipm_cfg,
                           seed=int(rng.integers(2 ** 31)))
        xs = sample(target, config.kl_samples, rng)
        kl = kl_empirical(lambda pts: log_density_invertible(target, pts),
                          lambda pts: log_density_invertible(gen_spec, pts), xs)
        return {"ipm_eval": res.value, "kl": kl}

    return [hook]


def make_w1_hooks(target_sampler, config: ExperimentConfig):
    """ipm_eval (cold-start MLP critic in norm balls) + exact W1 on fresh batches."""
    family = MlpFamily((2, 50, 50, 1))
    ipm_cfg = dc_replace(config.ipm_config(), regularization="clip")

    def hook(step, model, params, rng):
        def gen_sampler(r, n):
            return model.sample_np(params, model.draw_latent(r, n))

        res = ipm_estimate(family, target_sampler, gen_sampler, ipm_cfg,
                           seed=int(rng.integers(2 ** 31)))
        xs = target_sampler(rng, config.w1_batch)
        ys = gen_sampler(rng, config.w1_batch)
        return {"ipm_eval": res.value, "kl": None, "w1": w1_exact(xs, ys)}

    return [hook]


# experiment protocols ------------------------------------------------------

def _parallel_map(fn, jobs, n_workers: int):
    """Deterministic fan-out: results come back in job order."""
    if n_workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(n_workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def _perturbation_pair_job(args):
    doc, pair_id = args
    config = ExperimentConfig.from_dict(doc)
    lo, hi = config.noise_scale_range
    rng = rng_from(config.seed, "perturb-pair", pair_id)
    base = make_ground_truth_generator(config.dims, config.layers, rng)
    noise_scale = float(np.exp(rng.uniform(np.log(lo), np.log(hi)))) if hi > lo \
        else float(lo)
    pert, flagged = perturb_generator(base, noise_scale, rng)

    xs = sample(base, config.kl_samples, rng)
    ys = sample(pert, config.kl_samples, rng)
    logp = lambda pts: log_density_invertible(base, pts)   # noqa: E731
    logq = lambda pts: log_density_invertible(pert, pts)   # noqa: E731
    kl_pq = kl_empirical(logp, logq, xs)
    kl_qp = kl_empirical(logq, logp, ys)

    family = ContrastFamily(LogDensityNetFamily.for_generator(
        base, branch="trainable"))
    res = ipm_estimate(family,
                       lambda r, n: sample(base, n, r),
                       lambda r, n: sample(pert, n, r),
                       config.ipm_config(),
                       seed=int(rng.integers(2 ** 31)))
    return (pair_id, kl_pq, kl_qp, kl_pq + kl_qp, res.value, flagged)


def run_perturbation_experiment(config: ExperimentConfig,
                                out_dir: str) -> CorrelationResult:
    """Symmetric KL vs IPM across perturbed generator pairs.

    Pairs whose perturbation leaves the constraint set are flagged and
    dropped from the log-correlation (the outlier rule); degenerate
    pairs (nonpositive KL or IPM, e.g. zero noise) are guarded out too.
    """
    if config.n_pairs < 20:
        raise ValueError("need >= 20 generator pairs")
    os.makedirs(out_dir, exist_ok=True)
    jobs = [(config.to_dict(), pair_id) for pair_id in range(config.n_pairs)]
    rows = _parallel_map(_perturbation_pair_job, jobs, config.n_workers)

    logs = []
    dropped = 0
    for _, _, _, kl_sym, ipm, flagged in rows:
        if flagged:
            dropped += 1
        elif kl_sym > 0 and ipm > 0:
            logs.append((np.log(kl_sym), np.log(ipm)))
        else:
            dropped += 1

    write_csv(os.path.join(out_dir, "pairs.csv"),
              "pair_id,kl_pq,kl_qp,kl_sym,ipm,flagged", rows)
    xs_log = [p[0] for p in logs]
    ys_log = [p[1] for p in logs]
    result = CorrelationResult(pairs=rows, pearson_log=pearson(xs_log, ys_log),
                               n_outliers_dropped=dropped)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(_json_safe(
            {"pearson_log": result.pearson_log,
             "n_outliers_dropped": dropped,
             "n_pairs": config.n_pairs,
             "jackknife_sign_stable": jackknife_sign_stable(xs_log, ys_log),
             "config": config.to_dict()}), fh, indent=2)
    if config.write_svg and logs:
        svgplot.scatter_chart([np.exp(v) for v in xs_log],
                              [np.exp(v) for v in ys_log],
                              os.path.join(out_dir, "scatter.svg"),
                              title="symmetric KL vs IPM (log-log)",
                              x_label="KL(p|q)+KL(q|p)", y_label="IPM")
    return result


def _training_seed_job(args):
    doc, run_seed = args
    config = ExperimentConfig.from_dict(doc)
    target = make_ground_truth_generator(config.dims, config.layers,
                                         rng_from(config.seed, "target"))
    hooks = make_invertible_hooks(target, config)

    def target_sampler(rng, n):
        return sample(target, n, rng)

    init = make_ground_truth_generator(
        config.dims, config.layers, rng_from(config.seed, "init", run_seed))
    trace = wgan_train(init, _disc_family_for(target, config), target_sampler,
                       config.train_config(seed=int(run_seed)), hooks)
    rows = [(s, tr, ev, kl) for s, tr, ev, kl, _ in trace.rows]
    evals = [(s, ev, kl) for s, _, ev, kl, _ in trace.rows if ev is not None]
    return run_seed, rows, evals


def run_training_experiment(config: ExperimentConfig, out_dir: str) -> dict:
    """WGAN learning of a fixed invertible target from several seeds."""
    if config.kind != "invertible":
        raise ValueError("training experiment requires kind='invertible'")
    os.makedirs(out_dir, exist_ok=True)
    jobs = [(config.to_dict(), int(s)) for s in sorted(config.seeds)]
    results = _parallel_map(_training_seed_job, jobs, config.n_workers)

    per_seed = []
    for run_seed, rows, evals in results:
        write_csv(os.path.join(out_dir, f"trace_seed{run_seed}.csv"),
                  "step,ipm_train,ipm_eval,kl", rows)
        kls = [kl for _, _, kl in evals]
        ipms = [ev for _, ev, _ in evals]
        rho = spearmanr(kls, ipms).statistic if len(evals) >= 3 else float("nan")
        per_seed.append({"seed": int(run_seed), "initial_kl": kls[0],
                         "final_kl": kls[-1], "spearman_kl_ipm": float(rho)})
        if config.write_svg:
            steps = [s for s, _, _ in evals]
            svgplot.line_chart({"KL": (steps, kls), "IPM eval": (steps, ipms)},
                               os.path.join(out_dir, f"curves_seed{run_seed}.svg"),
                               title=f"seed {run_seed}", x_label="step")

    summary = {
        "per_seed": per_seed,
        "median_initial_kl": float(np.median([r["initial_kl"] for r in per_seed])),
        "median_final_kl": float(np.median([r["final_kl"] for r in per_seed])),
        "median_spearman": float(np.median([r["spearman_kl_ipm"]
                                            for r in per_seed])),
        "config": config.to_dict(),
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(_json_safe(summary), fh, indent=2)
    return summary


def _disc_family_for(target: InvertibleGeneratorSpec, config: ExperimentConfig):
    if config.vanilla_disc:
        return MlpFamily((target.dim, 50, 10, 1))
    return ContrastFamily(LogDensityNetFamily.for_generator(target,
                                                            branch="trainable"))


def _w1_tracking_seed_job(args):
    doc, run_seed = args
    config = ExperimentConfig.from_dict(doc)
    maker = make_circle if config.kind == "circle" else make_swissroll

    def target_sampler(rng, n):
        return maker(n, rng)

    hooks = make_w1_hooks(target_sampler, config)
    family = MlpFamily((2, 50, 50, 1))
    model = MlpGenModel((2, 50, 50, 2))
    params0 = model.init_params(rng_from(config.seed, "gen-init", run_seed))
    w1_series: list[tuple] = []

    def recording_hook(step, mdl, params, rng):
        out = hooks[0](step, mdl, params, rng)
        w1_series.append((step, out["ipm_eval"], out["w1"]))
        return {"ipm_eval": out["ipm_eval"], "kl": None}

    wgan_train((model, params0), family, target_sampler,
               config.train_config(seed=int(run_seed)), [recording_hook])
    return run_seed, w1_series


def run_w1_tracking_experiment(config: ExperimentConfig, out_dir: str) -> dict:
    """2-D toy training (circle / swissroll): IPM vs exact W1 per checkpoint."""
    if config.kind not in ("circle", "swissroll"):
        raise ValueError("w1 tracking requires kind 'circle' or 'swissroll'")
    os.makedirs(out_dir, exist_ok=True)
    jobs = [(config.to_dict(), int(s)) for s in sorted(config.seeds)]
    results = _parallel_map(_w1_tracking_seed_job, jobs, config.n_workers)

    per_seed = []
    for run_seed, w1_series in results:
        write_csv(os.path.join(out_dir, f"track_seed{run_seed}.csv"),
                  "step,ipm,w1", w1_series)
        ipms = [row[1] for row in w1_series]
        w1s = [row[2] for row in w1_series]
        per_seed.append({"seed": int(run_seed),
                         "corr_ipm_w1": pearson(ipms, w1s),
                         "w1_first": w1s[0], "w1_last": w1s[-1]})
        if config.write_svg:
            steps = [row[0] for row in w1_series]
            svgplot.line_chart({"IPM": (steps, ipms), "W1": (steps, w1s)},
                               os.path.join(out_dir, f"track_seed{run_seed}.svg"),
                               title=f"{config.kind} seed {run_seed}",
                               x_label="step")

    summary = {
        "per_seed": per_seed,
        "median_corr": float(np.median([r["corr_ipm_w1"] for r in per_seed])),
        "median_w1_first": float(np.median([r["w1_first"] for r in per_seed])),
        "median_w1_last": float(np.median([r["w1_last"] for r in per_seed])),
        "config": config.to_dict(),
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(_json_safe(summary), fh, indent=2)
    return summary


def run_experiment(config: ExperimentConfig, out_dir: str):
    if config.kind == "perturbation":
        return run_perturbation_experiment(config, out_dir)
    if config.kind == "invertible":
        return run_training_experiment(config, out_dir)
    return run_w1_tracking_experiment(config, out_dir)


_ = ConstraintViolation  # re-exported for CLI exit-code mapping
