"""JSON round trip for generator and discriminator specs.

Matrices are nested lists, row-major; floats rely on repr-style JSON
encoding, which round-trips IEEE doubles exactly (17 significant
digits). Each document carries a family tag.
"""

from __future__ import annotations

import json

import numpy as np

from .discriminators import (BranchNet, LinearStatDiscSpec, LogDensityNetSpec,
                             MlpSpec, MogBranch, MogDiscSpec, ReluDiscSpec)
from .generators import (ConstraintParams, ExpFamilySpec, GaussianSpec,
                         InjectiveGeneratorSpec, InvertibleGeneratorSpec,
                         MixtureSpec)


def _arr(a) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def _constraints_doc(c: ConstraintParams) -> dict:
    return {"r_w": c.r_w, "r_b": c.r_b, "c_sigma": c.c_sigma,
            "beta_sigma": c.beta_sigma, "delta": c.delta}


def _constraints_from(doc: dict) -> ConstraintParams:
    return ConstraintParams(**doc)


def spec_to_doc(spec) -> dict:
    if isinstance(spec, GaussianSpec):
        return {"family": "gaussian", "mean": _arr(spec.mean), "cov": _arr(spec.cov)}
    if isinstance(spec, MixtureSpec):
        return {"family": "mixture", "weights": _arr(spec.weights),
                "means": _arr(spec.means),
                "weight_floor_log": spec.weight_floor_log,
                "mean_bound": spec.mean_bound}
    if isinstance(spec, ExpFamilySpec):
        return {"family": "expfamily", "theta": _arr(spec.theta), "kind": spec.kind}
    if isinstance(spec, InvertibleGeneratorSpec):
        return {"family": "invertible",
                "weights": [_arr(w) for w in spec.weights],
                "biases": [_arr(b) for b in spec.biases],
                "gamma": _arr(spec.gamma), "activation": spec.activation,
                "slope": spec.slope,
                "constraints": _constraints_doc(spec.constraints)}
    if isinstance(spec, InjectiveGeneratorSpec):
        return {"family": "injective",
                "weights": [_arr(w) for w in spec.weights],
                "biases": [_arr(b) for b in spec.biases],
                "activation": spec.activation, "slope": spec.slope,
                "activation_on_output": spec.activation_on_output}
    if isinstance(spec, ReluDiscSpec):
        return {"family": "relu_disc", "v": _arr(spec.v), "b": spec.b,
                "b_bound": spec.b_bound}
    if isinstance(spec, LinearStatDiscSpec):
        return {"family": "linear_stat_disc", "v": _arr(spec.v)}
    if isinstance(spec, LogDensityNetSpec):
        branch = None
        if spec.logsig_branch is not None:
            br = spec.logsig_branch
            branch = {"w": _arr(br.w), "c": _arr(br.c), "a": _arr(br.a),
                      "d0": br.d0}
        return {"family": "logdensity_net",
                "layer_weights": [_arr(w) for w in spec.layer_weights],
                "layer_biases": [_arr(b) for b in spec.layer_biases],
                "out_bias": spec.out_bias, "gamma": _arr(spec.gamma),
                "activation": spec.activation, "slope": spec.slope,
                "logsig_branch": branch,
                "constraints": _constraints_doc(spec.constraints)}
    if isinstance(spec, MogDiscSpec):
        def branch_doc(br: MogBranch) -> dict:
            return {"weights": _arr(br.weights), "means": _arr(br.means),
                    "biases": _arr(br.biases)}
        return {"family": "mog_disc", "branch1": branch_doc(spec.branch1),
                "branch2": branch_doc(spec.branch2),
                "weight_floor_log": spec.weight_floor_log,
                "mean_bound": spec.mean_bound}
    if isinstance(spec, MlpSpec):
        return {"family": "mlp_disc",
                "weights": [_arr(w) for w in spec.weights],
                "biases": [_arr(b) for b in spec.biases],
                "clip_radius": spec.clip_radius}
    raise ValueError(f"cannot serialize {type(spec).__name__}")


def spec_from_doc(doc: dict):
    family = doc["family"]
    if family == "gaussian":
        return GaussianSpec(mean=np.array(doc["mean"]), cov=np.array(doc["cov"]))
    if family == "mixture":
        return MixtureSpec(weights=np.array(doc["weights"]),
                           means=np.array(doc["means"]),
                           weight_floor_log=doc["weight_floor_log"],
                           mean_bound=doc["mean_bound"])
    if family == "expfamily":
        return ExpFamilySpec(theta=np.array(doc["theta"]), kind=doc["kind"])
    if family == "invertible":
        return InvertibleGeneratorSpec(
            weights=tuple(np.array(w) for w in doc["weights"]),
            biases=tuple(np.array(b) for b in doc["biases"]),
            gamma=np.array(doc["gamma"]), activation=doc["activation"],
            slope=doc["slope"], constraints=_constraints_from(doc["constraints"]))
    if family == "injective":
        return InjectiveGeneratorSpec(
            weights=tuple(np.array(w) for w in doc["weights"]),
            biases=tuple(np.array(b) for b in doc["biases"]),
            activation=doc["activation"], slope=doc["slope"],
            activation_on_output=doc["activation_on_output"])
    if family == "relu_disc":
        return ReluDiscSpec(v=np.array(doc["v"]), b=doc["b"], b_bound=doc["b_bound"])
    if family == "linear_stat_disc":
        return LinearStatDiscSpec(v=np.array(doc["v"]))
    if family == "logdensity_net":
        branch = None
        if doc["logsig_branch"] is not None:
            br = doc["logsig_branch"]
            branch = BranchNet(w=np.array(br["w"]), c=np.array(br["c"]),
                               a=np.array(br["a"]), d0=br["d0"])
        return LogDensityNetSpec(
            layer_weights=tuple(np.array(w) for w in doc["layer_weights"]),
            layer_biases=tuple(np.array(b) for b in doc["layer_biases"]),
            out_bias=doc["out_bias"], gamma=np.array(doc["gamma"]),
            activation=doc["activation"], slope=doc["slope"],
            logsig_branch=branch,
            constraints=_constraints_from(doc["constraints"]))
    if family == "mog_disc":
        def branch_from(d: dict) -> MogBranch:
            return MogBranch(weights=np.array(d["weights"]),
                             means=np.array(d["means"]),
                             biases=np.array(d["biases"]))
        return MogDiscSpec(branch1=branch_from(doc["branch1"]),
                           branch2=branch_from(doc["branch2"]),
                           weight_floor_log=doc["weight_floor_log"],
                           mean_bound=doc["mean_bound"])
    if family == "mlp_disc":
        return MlpSpec(weights=tuple(np.array(w) for w in doc["weights"]),
                       biases=tuple(np.array(b) for b in doc["biases"]),
                       clip_radius=doc["clip_radius"])
    raise ValueError(f"unknown spec family {family!r}")


def spec_to_json(spec) -> str:
    return json.dumps(spec_to_doc(spec), indent=2)


def spec_from_json(text: str):
    return spec_from_doc(json.loads(text))
