"""Datasets, perturbation protocol, CSV contracts, CLI, determinism."""

import json
import os

import numpy as np
import pytest
from scipy.stats import kstest

from ralab._rng import rng_from
from ralab.cli import main as cli_main
from ralab.divergences import kl_empirical
from ralab.experiments import (CorrelationResult, ExperimentConfig,
                               jackknife_sign_stable, make_circle,
                               make_ground_truth_generator, make_swissroll,
                               pearson, perturb_generator, read_csv,
                               run_perturbation_experiment, write_csv)
from ralab.generators import (invertible_forward, invertible_inverse,
                              log_density_invertible, sample)


# datasets --------------------------------------------------------------------

def test_circle_on_unit_circle():
    xs = make_circle(1000, 0)
    np.testing.assert_allclose(np.sum(xs * xs, axis=1), 1.0, atol=1e-12)


def test_circle_mean_near_origin():
    xs = make_circle(1_000_000, 1)
    assert np.all(np.abs(xs.mean(axis=0)) < 0.005)


def test_circle_deterministic():
    assert np.array_equal(make_circle(64, 5), make_circle(64, 5))


def test_swissroll_norm_equals_z():
    xs = make_swissroll(2000, 0)
    norms = np.linalg.norm(xs, axis=1)
    assert np.all(norms >= 0.25 - 1e-12) and np.all(norms <= 1.0 + 1e-12)


def test_swissroll_endpoint():
    # z = 0.25 maps to 0.25*(cos pi, sin pi) = (-0.25, 0)
    z = 0.25
    want = np.array([z * np.cos(4 * np.pi * z), z * np.sin(4 * np.pi * z)])
    np.testing.assert_allclose(want, np.array([-0.25, 0.0]), atol=1e-12)


def test_swissroll_z_uniform_ks():
    xs = make_swissroll(10_000, 3)
    z = np.linalg.norm(xs, axis=1)
    stat = kstest(z, "uniform", args=(0.25, 0.75))
    assert stat.pvalue > 0.01


# ground truth + perturbation ------------------------------------------------------

def test_ground_truth_singular_values_in_range():
    spec = make_ground_truth_generator(6, 3, 0)
    for w in spec.weights:
        svals = np.linalg.svd(w, compute_uv=False)
        assert np.all(svals >= 0.5 - 1e-12) and np.all(svals <= 2.0 + 1e-12)
    z = rng_from(1).standard_normal((50, 6))
    err = np.max(np.abs(invertible_inverse(spec, invertible_forward(spec, z)) - z))
    assert err < 1e-8
    again = make_ground_truth_generator(6, 3, 0)
    assert all(np.array_equal(a, b) for a, b in zip(spec.weights, again.weights))


def test_perturb_zero_noise_identity():
    spec = make_ground_truth_generator(3, 2, 1)
    pert, flagged = perturb_generator(spec, 0.0, 2)
    assert not flagged
    assert all(np.array_equal(a, b) for a, b in zip(spec.weights, pert.weights))


def test_perturb_increases_kl():
    spec = make_ground_truth_generator(3, 2, 1)
    for seed in range(10):
        pert, _ = perturb_generator(spec, 0.05, seed)
        xs = sample(spec, 20_000, seed + 100)
        kl = kl_empirical(lambda p: log_density_invertible(spec, p),
                          lambda p: log_density_invertible(pert, p), xs)
        assert kl > 0


def test_perturb_flags_conditioning_blowup():
    spec = make_ground_truth_generator(3, 2, 1)
    flags = [perturb_generator(spec, 1.5, s)[1] for s in range(10)]
    assert any(flags)


# csv + correlation helpers -----------------------------------------------------------

def test_write_read_csv_lossless(tmp_path):
    path = os.path.join(tmp_path, "t.csv")
    rows = [(0, 0.1 + 0.2, None, True), (1, np.pi, 1e-300, False)]
    write_csv(path, "a,b,c,d", rows)
    header, back = read_csv(path)
    assert header == "a,b,c,d"
    assert back[0][1] == 0.1 + 0.2 and back[1][1] == np.pi
    assert back[0][2] is None and back[1][2] == 1e-300


def test_pearson_and_jackknife():
    xs = np.arange(10.0)
    ys = 2 * xs + 1
    assert pearson(xs, ys) == pytest.approx(1.0)
    assert jackknife_sign_stable(xs, ys)
    assert np.isnan(pearson([1.0], [2.0]))


def test_correlation_result_validates():
    with pytest.raises(ValueError):
        CorrelationResult(pairs=[], pearson_log=1.5, n_outliers_dropped=0)


# experiment configs --------------------------------------------------------------

def test_config_from_dict_defaults_and_paper_scale():
    cfg = ExperimentConfig.from_dict({"kind": "perturbation"})
    assert cfg.scale == "desk" and cfg.dims == 4
    paper = ExperimentConfig.from_dict({"kind": "invertible", "scale": "paper"})
    assert paper.dims == 10 and paper.total_gen_steps == 10_000


def test_config_rejects_unknown_kind():
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"kind": "imagenet"})


# small end-to-end runs ------------------------------------------------------------

def _tiny_perturbation_config():
    return ExperimentConfig(
        kind="perturbation", seed=7, dims=3, layers=1, n_pairs=20,
        noise_scale_range=(0.03, 0.12), kl_samples=20_000,
        ipm_restarts=2, ipm_steps=150, ipm_batch=128, ipm_eval_batch=1024,
        write_svg=True)


def test_perturbation_experiment_contract(tmp_path):
    out = str(tmp_path / "run")
    res = run_perturbation_experiment(_tiny_perturbation_config(), out)
    with open(os.path.join(out, "pairs.csv")) as fh:
        header = fh.readline().strip()
    assert header == "pair_id,kl_pq,kl_qp,kl_sym,ipm,flagged"
    assert len(res.pairs) == 20
    assert -1.0 <= res.pearson_log <= 1.0
    with open(os.path.join(out, "summary.json")) as fh:
        summary = json.load(fh)
    assert summary["n_pairs"] == 20
    assert os.path.exists(os.path.join(out, "scatter.svg"))


def test_perturbation_rerun_byte_identical(tmp_path):
    cfg = _tiny_perturbation_config()
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    run_perturbation_experiment(cfg, out1)
    run_perturbation_experiment(cfg, out2)
    for name in ("pairs.csv",):
        with open(os.path.join(out1, name), "rb") as fh:
            b1 = fh.read()
        with open(os.path.join(out2, name), "rb") as fh:
            b2 = fh.read()
        assert b1 == b2


def test_perturbation_guard_requires_enough_pairs(tmp_path):
    cfg = _tiny_perturbation_config()
    cfg.n_pairs = 5
    with pytest.raises(ValueError, match="20"):
        run_perturbation_experiment(cfg, str(tmp_path / "x"))


def test_cli_runs_perturbation(tmp_path):
    cfg_path = str(tmp_path / "cfg.json")
    with open(cfg_path, "w") as fh:
        json.dump({"dims": 3, "layers": 1, "n_pairs": 20,
                   "kl_samples": 10_000, "ipm_restarts": 1, "ipm_steps": 60,
                   "ipm_batch": 64, "ipm_eval_batch": 512,
                   "write_svg": False}, fh)
    out = str(tmp_path / "cli-out")
    code = cli_main(["perturbation", "--config", cfg_path, "--out", out,
                     "--seed", "3"])
    assert code == 0
    assert os.path.exists(os.path.join(out, "pairs.csv"))


def test_cli_invalid_config_exit_2(tmp_path):
    bad = str(tmp_path / "bad.json")
    with open(bad, "w") as fh:
        fh.write("{not json")
    assert cli_main(["perturbation", "--config", bad,
                     "--out", str(tmp_path / "o")]) == 2


def test_cli_constraint_violation_exit_2(tmp_path):
    cfg_path = str(tmp_path / "cfg.json")
    with open(cfg_path, "w") as fh:
        json.dump({"n_pairs": 3}, fh)  # below the >= 20 pair precondition
    assert cli_main(["perturbation", "--config", cfg_path,
                     "--out", str(tmp_path / "o")]) == 2


def test_cli_nonfinite_abort_exit_3(tmp_path, monkeypatch):
    from ralab.training import TrainingAborted, TrainTrace
    import ralab.cli as cli_mod

    def exploding_run(config, out_dir):
        raise TrainingAborted("non-finite loss", TrainTrace())

    monkeypatch.setattr(cli_mod, "run_experiment", exploding_run)
    assert cli_mod.main(["invertible", "--out", str(tmp_path / "o")]) == 3


def test_w1_tracking_tiny_run(tmp_path):
    cfg = ExperimentConfig(kind="circle", seed=1, seeds=(0,),
                           total_gen_steps=40, eval_every=20,
                           ipm_restarts=1, ipm_steps=50, ipm_batch=64,
                           ipm_eval_batch=256, w1_batch=128, write_svg=False)
    from ralab.experiments import run_w1_tracking_experiment
    out = str(tmp_path / "w1")
    summary = run_w1_tracking_experiment(cfg, out)
    path = os.path.join(out, "track_seed0.csv")
    with open(path) as fh:
        assert fh.readline().strip() == "step,ipm,w1"
    header, rows = read_csv(path)
    assert len(rows) >= 3
    assert "median_corr" in summary


def test_training_experiment_tiny_run(tmp_path):
    cfg = ExperimentConfig(kind="invertible", seed=1, seeds=(0, 1), dims=2,
                           layers=1, total_gen_steps=30, eval_every=10,
                           kl_samples=5000, ipm_restarts=1, ipm_steps=40,
                           ipm_batch=64, ipm_eval_batch=256, write_svg=False)
    from ralab.experiments import run_training_experiment
    out = str(tmp_path / "train")
    summary = run_training_experiment(cfg, out)
    assert os.path.exists(os.path.join(out, "trace_seed0.csv"))
    assert "median_final_kl" in summary
    header, rows = read_csv(os.path.join(out, "trace_seed0.csv"))
    assert header == "step,ipm_train,ipm_eval,kl"
    assert len(rows) == 30


def test_vanilla_disc_variant_runs(tmp_path):
    cfg = ExperimentConfig(kind="invertible", seed=1, seeds=(0,), dims=2,
                           layers=1, total_gen_steps=12, eval_every=6,
                           kl_samples=2000, ipm_restarts=1, ipm_steps=20,
                           ipm_batch=64, ipm_eval_batch=128, write_svg=False,
                           vanilla_disc=True)
    from ralab.experiments import run_training_experiment
    summary = run_training_experiment(cfg, str(tmp_path / "v"))
    assert len(summary["per_seed"]) == 1
