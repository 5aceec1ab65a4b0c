"""WGAN min-max training loop with RMSProp and clip/GP regularization."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import diffgraph as dg
from ._rng import rng_from
from .families import gradient_penalty_graph
from .generators import InvertibleGeneratorSpec
from .graphops import act_graph


def rmsprop_step(params, grads, state, lr: float, decay: float = 0.9,
                 eps: float = 1e-8):
    """One RMSProp update; returns (new_params, new_state), inputs untouched."""
    new_state = [decay * s + (1.0 - decay) * g * g for s, g in zip(state, grads)]
    new_params = [p - lr * g / np.sqrt(s + eps)
                  for p, g, s in zip(params, grads, new_state)]
    return new_params, new_state


def rmsprop_init(params) -> list[np.ndarray]:
    return [np.zeros_like(np.asarray(p, dtype=np.float64)) for p in params]


def gradient_penalty(family, params, batch_p: np.ndarray, batch_q: np.ndarray,
                     seed) -> float:
    """Mean (|grad_x f(xhat)| - 1)^2 on random interpolates (scalar value)."""
    rng = seed if isinstance(seed, np.random.Generator) else rng_from(int(seed))
    nodes = [dg.as_tensor(p) for p in params]
    return float(gradient_penalty_graph(family, nodes, batch_p, batch_q, rng).data)


# generator models ------------------------------------------------------

class InvertibleGenModel:
    """Trainable wrapper around an invertible generator spec."""

    def __init__(self, template: InvertibleGeneratorSpec):
        self.template = template
        self.n_layers = template.n_layers
        self.dim = template.dim

    def params_from_spec(self, spec: InvertibleGeneratorSpec) -> list[np.ndarray]:
        return [np.array(w) for w in spec.weights] + \
               [np.array(b) for b in spec.biases]

    def to_spec(self, params) -> InvertibleGeneratorSpec:
        n = self.n_layers
        return InvertibleGeneratorSpec(
            weights=tuple(params[:n]), biases=tuple(params[n:2 * n]),
            gamma=self.template.gamma, activation=self.template.activation,
            slope=self.template.slope, constraints=self.template.constraints)

    def draw_latent(self, rng, n: int) -> np.ndarray:
        return rng.standard_normal((n, self.dim)) * self.template.gamma

    def sample_graph(self, param_nodes, z: np.ndarray) -> dg.Tensor:
        n = self.n_layers
        h = dg.constant(z)
        for i in range(n - 1):
            h = act_graph(dg.add(dg.matmul(h, dg.transpose(param_nodes[i])),
                                 param_nodes[n + i]),
                          self.template.activation, self.template.slope)
        return dg.add(dg.matmul(h, dg.transpose(param_nodes[n - 1])),
                      param_nodes[2 * n - 1])

    def sample_np(self, params, z: np.ndarray) -> np.ndarray:
        return self.sample_graph([dg.as_tensor(p) for p in params], z).data

    def project(self, params) -> list[np.ndarray]:
        # keep the learned generator inside its constraint set so the
        # change-of-variables density stays available for KL hooks
        c = self.template.constraints
        out = []
        for w in params[:self.n_layers]:
            u, s, vt = np.linalg.svd(np.asarray(w))
            if s[0] <= c.r_w * (1 + 1e-12) and s[-1] >= (1 - 1e-12) / c.r_w:
                out.append(np.asarray(w))
            else:
                out.append(u @ np.diag(np.clip(s, 1.0 / c.r_w, c.r_w)) @ vt)
        for b in params[self.n_layers:]:
            b = np.asarray(b)
            norm = float(np.linalg.norm(b))
            out.append(b if norm <= c.r_b * (1 + 1e-12) else b * (c.r_b / norm))
        return out


class MlpGenModel:
    """ReLU MLP generator (latent N(0, I_k) -> R^d), used by the 2-D toys."""

    def __init__(self, dims: tuple):
        self.dims = tuple(dims)
        self.latent_dim = self.dims[0]

    def init_params(self, rng) -> list[np.ndarray]:
        params = []
        for fan_in, fan_out in zip(self.dims[:-1], self.dims[1:]):
            scale = np.sqrt(2.0 / (fan_in + fan_out))
            params.append(rng.standard_normal((fan_out, fan_in)) * scale)
            params.append(np.zeros(fan_out))
        return params

    def draw_latent(self, rng, n: int) -> np.ndarray:
        return rng.standard_normal((n, self.latent_dim))

    def sample_graph(self, param_nodes, z: np.ndarray) -> dg.Tensor:
        h = dg.constant(z)
        n_layers = len(self.dims) - 1
        for i in range(n_layers):
            h = dg.add(dg.matmul(h, dg.transpose(param_nodes[2 * i])),
                       param_nodes[2 * i + 1])
            if i < n_layers - 1:
                h = dg.relu(h)
        return h

    def sample_np(self, params, z: np.ndarray) -> np.ndarray:
        return self.sample_graph([dg.as_tensor(p) for p in params], z).data

    def project(self, params) -> list[np.ndarray]:
        return [np.asarray(p) for p in params]

    def to_spec(self, params):
        return None


# training loop ---------------------------------------------------------

@dataclass
class TrainConfig:
    batch: int = 64
    critic_steps: int = 10
    critic_warmup_steps: int = 0  # critic-only steps before the first gen step
    lr: float = 1e-4
    decay: float = 0.9
    eps: float = 1e-8
    regularizer: str = "clip"  # or "gp"
    gp_coef: float = 10.0
    total_gen_steps: int = 2000
    eval_every: int = 200
    seed: int = 0
    project_generator: bool = True

    def __post_init__(self):
        if self.batch < 2:
            raise ValueError("batch must be >= 2")
        if self.critic_steps < 1:
            raise ValueError("critic_steps must be >= 1")
        if self.regularizer not in ("clip", "gp"):
            raise ValueError("regularizer must be 'clip' or 'gp'")


@dataclass
class TrainTrace:
    rows: list = field(default_factory=list)  # (step, ipm_train, ipm_eval, kl, wall_ms)
    metadata: dict = field(default_factory=dict)

    def append(self, step, ipm_train, ipm_eval=None, kl=None, wall_ms=0.0):
        if self.rows and step <= self.rows[-1][0]:
            raise ValueError("trace steps must be strictly increasing")
        for val in (ipm_train, ipm_eval, kl):
            if val is not None and not np.isfinite(val):
                raise ValueError("refusing to write non-finite metric to trace")
        self.rows.append((int(step), float(ipm_train),
                          None if ipm_eval is None else float(ipm_eval),
                          None if kl is None else float(kl), float(wall_ms)))

    def column(self, name: str) -> list:
        idx = {"step": 0, "ipm_train": 1, "ipm_eval": 2, "kl": 3, "wall_ms": 4}[name]
        return [row[idx] for row in self.rows]

    def to_csv(self) -> str:
        lines = ["step,ipm_train,ipm_eval,kl,wall_ms"]
        for step, tr, ev, kl, wall in self.rows:
            ev_s = "" if ev is None else repr(ev)
            kl_s = "" if kl is None else repr(kl)
            lines.append(f"{step},{tr!r},{ev_s},{kl_s},{wall!r}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_csv(text: str) -> "TrainTrace":
        trace = TrainTrace()
        lines = text.strip().split("\n")
        if lines[0] != "step,ipm_train,ipm_eval,kl,wall_ms":
            raise ValueError("unexpected trace header")
        for line in lines[1:]:
            step, tr, ev, kl, wall = line.split(",")
            trace.append(int(step), float(tr),
                         float(ev) if ev else None,
                         float(kl) if kl else None, float(wall))
        return trace


class TrainingAborted(RuntimeError):
    """Non-finite loss; carries the partial trace."""

    def __init__(self, message: str, trace: TrainTrace):
        super().__init__(message)
        self.trace = trace


def wgan_train(gen_init, disc_family, target_sampler, config: TrainConfig,
               metric_hooks=()) -> TrainTrace:
    """Alternating critic-ascent / generator-descent loop.

    gen_init is an InvertibleGeneratorSpec or a (model, params) pair.
    metric_hooks are callables (step, model, params, rng) -> dict merged
    into the trace row at eval points.
    """
    if isinstance(gen_init, InvertibleGeneratorSpec):
        model = InvertibleGenModel(gen_init)
        params_g = model.params_from_spec(gen_init)
    else:
        model, params_g = gen_init
        params_g = [np.array(p) for p in params_g]

    seed = config.seed
    rng_data = rng_from(seed, "data")
    rng_z = rng_from(seed, "latent")
    rng_gp = rng_from(seed, "gp")
    params_d = disc_family.init_params(rng_from(seed, "disc-init"))
    state_d = rmsprop_init(params_d)
    state_g = rmsprop_init(params_g)

    trace = TrainTrace(metadata={
        "batch": config.batch, "critic_steps": config.critic_steps,
        "critic_warmup_steps": config.critic_warmup_steps,
        "lr": config.lr, "decay": config.decay, "eps": config.eps,
        "regularizer": config.regularizer, "gp_coef": config.gp_coef,
        "seed": seed})
    t0 = time.perf_counter()

    def eval_hooks(step):
        merged = {}
        for idx, hook in enumerate(metric_hooks):
            merged.update(hook(step, model, params_g, rng_from(seed, "hook", step, idx)))
        return merged

    def critic_update(params_d, state_d):
        x_real = target_sampler(rng_data, config.batch)
        x_fake = model.sample_np(params_g, model.draw_latent(rng_z, config.batch))
        nodes = [dg.Tensor(p) for p in params_d]
        contrast = dg.sub(dg.tmean(disc_family.eval_graph(nodes, x_real)),
                          dg.tmean(disc_family.eval_graph(nodes, x_fake)))
        objective = contrast
        if config.regularizer == "gp":
            penalty = gradient_penalty_graph(disc_family, nodes,
                                             x_real, x_fake, rng_gp)
            objective = dg.sub(contrast, dg.mul(config.gp_coef, penalty))
        grads = dg.grad(objective, nodes)
        params_d, state_d = rmsprop_step(params_d, [-g for g in grads], state_d,
                                         config.lr, config.decay, config.eps)
        if config.regularizer == "clip":
            params_d = disc_family.project(params_d)
        return params_d, state_d, float(contrast.data)

    try:
        for _ in range(config.critic_warmup_steps):
            params_d, state_d, _ = critic_update(params_d, state_d)

        for step in range(1, config.total_gen_steps + 1):
            ipm_train = 0.0
            for _ in range(config.critic_steps):
                params_d, state_d, ipm_train = critic_update(params_d, state_d)

            z = model.draw_latent(rng_z, config.batch)
            nodes_g = [dg.Tensor(p) for p in params_g]
            x_fake = model.sample_graph(nodes_g, z)
            d_nodes = [dg.constant(p) for p in params_d]
            gen_loss = dg.neg(dg.tmean(disc_family.eval_graph(d_nodes, x_fake)))
            grads_g = dg.grad(gen_loss, nodes_g)
            params_g, state_g = rmsprop_step(params_g, grads_g, state_g,
                                             config.lr, config.decay, config.eps)
            if config.project_generator:
                params_g = model.project(params_g)

            at_eval = (step % config.eval_every == 0
                       or step == 1 or step == config.total_gen_steps)
            metrics = eval_hooks(step) if at_eval and metric_hooks else {}
            trace.append(step, ipm_train,
                         ipm_eval=metrics.get("ipm_eval"),
                         kl=metrics.get("kl"),
                         wall_ms=(time.perf_counter() - t0) * 1e3)
    except dg.NonFiniteError as exc:
        raise TrainingAborted(f"non-finite loss at training step: {exc}", trace)

    trace.metadata["final_params_g"] = params_g
    trace.metadata["final_params_d"] = params_d
    return trace
