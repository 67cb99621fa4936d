import math
import os
import subprocess
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from cpsim import ConfigError
from cpsim.cli import main
from cpsim.harness.config import LemmaLattice, config_from_dict, load_config
from cpsim.harness.experiments import (
    run_experiment,
    run_lemma_checks,
    run_sde_moments,
    run_strong_rate,
    run_sve_moments,
)
from cpsim.harness.output import MOMENT_HEADER, STRONG_HEADER, OutputError, emit_outputs
from cpsim.harness.parallel import map_chunks, path_chunks
from cpsim.harness.stats import fit_rate, mean_se, within_band, z_score

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

SDE_MODEL = {"sigma0": 0.1, "mu0": 0.3, "mu1": 0.7, "s0": 0.4, "s1": 0.6, "alpha": 0.5, "beta": 0.5}


def small_sde(tmp_path, **over):
    raw = {"kind": "sde-moments", "n-paths": 400, "epsilon": 0.01, "output": str(tmp_path), "model": dict(SDE_MODEL)}
    raw.update(over)
    return config_from_dict(raw)


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


# ------------------------------------------------------------------ config


def test_shipped_configs_load():
    kinds = {
        "sde_moments.toml": "sde-moments", "sve_moments_set1.toml": "sve-moments",
        "sve_moments_set2.toml": "sve-moments", "strong_rate.toml": "sde-strong-rate",
        "weak_rate.toml": "sve-weak-rate", "lemma_checks.toml": "lemma-checks",
        "kernel_table.toml": "kernel-table", "oracle.toml": "oracle",
    }
    for name, kind in kinds.items():
        assert load_config(CONFIGS / name).kind == kind


def test_shipped_parameters():
    sde = load_config(CONFIGS / "sde_moments.toml").sde_model
    assert (sde.sigma0, sde.mu0, sde.mu1, sde.s0, sde.s1, sde.alpha, sde.beta) == (0.1, 0.3, 0.7, 0.4, 0.6, 0.5, 0.5)
    s1 = load_config(CONFIGS / "sve_moments_set1.toml").sve_model
    assert (s1.mu, s1.sigma, s1.alpha0, s1.beta0, s1.alpha1, s1.beta1, s1.s0, s1.s1) == (0.2, 0.1, 0.3, 0.5, 0.2, 0.4, 0.2, 0.0)
    s2 = load_config(CONFIGS / "sve_moments_set2.toml").sve_model
    assert (s2.mu, s2.sigma, s2.alpha1, s2.beta1, s2.s1) == (0.0, 0.3, 0.05, 0.25, 0.2)


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ConfigError, match="unknown key"):
        config_from_dict({"kind": "sde-moments", "n_paths": 100, "model": SDE_MODEL})
    with pytest.raises(ConfigError, match="unknown key"):
        config_from_dict({"kind": "sde-moments", "model": {**SDE_MODEL, "gamma": 1.0}})


def test_validation_errors(tmp_path):
    with pytest.raises(ConfigError, match="eval-times is empty"):
        small_sde(tmp_path, **{"eval-times": []})
    with pytest.raises(ConfigError):
        small_sde(tmp_path, **{"epsilon": -0.1})
    with pytest.raises(ConfigError):
        config_from_dict({"kind": "sde-strong-rate", "epsilon-ladder": [0.1, 0.2, 0.05, 0.01], "model": SDE_MODEL})
    with pytest.raises(ConfigError, match="model"):
        config_from_dict({"kind": "sde-moments", "model": {**SDE_MODEL, "s0": 0.7}})
    with pytest.raises(ConfigError, match="does not match"):
        config_from_dict({"kind": "oracle"}, kind="sde-moments")


def test_cli_invalid_config_exit_code(tmp_path, capsys):
    bad = write(tmp_path, 'kind = "sde-moments"\nbogus = 1\n')
    assert main(["sde-moments", "--config", str(bad)]) == 2
    empty = write(tmp_path, 'kind = "sde-moments"\neval-times = []\n[model]\nsigma0 = 0.1\n', "e.toml")
    assert main(["sde-moments", "--config", str(empty)]) == 2
    assert main(["sde-moments", "--config", str(tmp_path / "missing.toml")]) == 2
    with pytest.raises(SystemExit) as info:
        main(["sde-moments"])
    assert info.value.code == 2


# ------------------------------------------------------------------ stats and parallel


def test_stats_helpers():
    m, se = mean_se([1.0, 2.0, 3.0, 4.0])
    assert m == 2.5 and se == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert math.isnan(mean_se([])[0])
    assert z_score(1.0, 0.0, 1.0) == 0.0
    assert math.isnan(z_score(math.nan, 1.0, 1.0))
    assert within_band(1.05, 0.01, 1.0, 4, 0.02)
    assert not within_band(1.1, 0.01, 1.0, 4, 0.02)
    assert fit_rate([0.1, 0.01], [0.0, 0.0]).degenerate
    assert fit_rate([0.1, 0.01, 0.001], [1e-1, 1e-2, 1e-3]).slope == pytest.approx(1.0)


def test_chunks_cover_paths_in_order(monkeypatch):
    monkeypatch.setenv("CPSIM_THREADS", "3")
    out = map_chunks(lambda b: b * 2, 10, 3)
    assert np.array_equal(np.concatenate(out), 2 * np.arange(10))
    assert [len(c) for c in path_chunks(10, 4)] == [4, 4, 2]


# ------------------------------------------------------------------ experiments


def test_zero_model_reports_exact_values(tmp_path):
    cfg = small_sde(tmp_path, model={**SDE_MODEL, "sigma0": 0.0, "mu0": 0.0, "mu1": 0.0})
    rep = run_sde_moments(cfg)
    for r in rep.rows:
        assert r.cp_mean == r.ref_mean == 1.0 and r.cp_mean_se == 0.0
        assert r.z_mean == 0.0
    assert rep.em_failures == 0 and rep.passed


def test_em_singular_hits_recorded(tmp_path):
    rep = run_sde_moments(small_sde(tmp_path, **{"em-step": 0.001}))
    assert rep.cp_failures == 0
    assert rep.em_failures > 0
    assert rep.em_first_failure_time == pytest.approx(0.4)


def test_sve_constant_report(tmp_path):
    cfg = config_from_dict({"kind": "sve-moments", "n-paths": 200, "epsilon": 0.01, "eval-times": [0.5, 1.0],
                            "model": {"mu": 0.0, "sigma": 0.0}})
    rep = run_sve_moments(cfg)
    for r in rep.rows:
        assert r.cp_mean == r.ref_mean == 1.0 and r.cp_sq == r.ref_sq == 1.0
    assert rep.passed


def test_strong_rate_degenerate_for_zero_model(tmp_path):
    cfg = config_from_dict({"kind": "sde-strong-rate", "n-paths": 200, "epsilon-ladder": [0.1, 0.05, 0.025, 0.0125],
                            "model": {**SDE_MODEL, "sigma0": 0.0, "mu0": 0.0, "mu1": 0.0}})
    rep = run_strong_rate(cfg)
    assert all(r.error == 0.0 for r in rep.rows)
    assert rep.fit.degenerate and rep.checks["slope-in-band"] is None


def test_lemma_exact_ratio_cases():
    lat = LemmaLattice(alphas=(1.0,), betas=(2.0,), ks=(1, 10), ps=(2.0,), ts=(0.5, 1.0, 2.0), epsilons=(0.1, 0.01))
    cfg = config_from_dict({"kind": "lemma-checks", "n-paths": 100_000})
    rep = run_lemma_checks(replace(cfg, lemma=lat))
    # E(eps N - t)^2 = eps t and E(k eps - S_k)^2 = k eps^2 make both ratios exactly one
    for r in rep.rows:
        assert abs(r.ratio - 1.0) <= 3 * r.se, r
    assert rep.passed


def test_outputs_schema_and_determinism(tmp_path):
    cfg = small_sde(tmp_path / "a")
    emit_outputs(run_experiment(cfg), cfg.output)
    head = (tmp_path / "a" / "sde_mean.csv").read_text().splitlines()[0]
    assert head == ",".join(MOMENT_HEADER)
    assert (tmp_path / "a" / "plot_sde_moments.py").exists()
    cfg_b = replace(cfg, output=str(tmp_path / "b"), chunk_size=97)
    emit_outputs(run_experiment(cfg_b), cfg_b.output)
    for name in ("sde_mean.csv", "sde_second_moment.csv", "sde_summary.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_strong_rate_outputs(tmp_path):
    cfg = config_from_dict({"kind": "sde-strong-rate", "n-paths": 200, "epsilon-ladder": [0.1, 0.05, 0.025, 0.0125],
                            "output": str(tmp_path), "model": SDE_MODEL})
    emit_outputs(run_experiment(cfg), tmp_path)
    assert (tmp_path / "strong_rate.csv").read_text().splitlines()[0] == ",".join(STRONG_HEADER)
    assert (tmp_path / "strong_rate_slope.txt").read_text().startswith("slope=")


def test_output_error_has_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = small_sde(blocker / "sub", **{"n-paths": 100})
    with pytest.raises(OutputError, match="file"):
        emit_outputs(run_experiment(cfg), cfg.output)


def test_cli_end_to_end(tmp_path):
    cfg = write(tmp_path, 'kind = "kernel-table"\n[kernel]\nhs = [0.25, 0.5]\nts = [1.0]\nss = [0.5]\n')
    env = {**os.environ, "CPSIM_THREADS": "2"}
    out = subprocess.run([sys.executable, "-m", "cpsim.cli", "kernel-table", "--config", str(cfg), "--out",
                          str(tmp_path / "o")], capture_output=True, text=True, env=env)
    assert out.returncode == 0, out.stderr
    rows = (tmp_path / "o" / "kernel_table.csv").read_text().splitlines()
    assert rows[0] == "H,t,s,K,method"
    assert rows[2] == "0.5,1.0,0.5,1.0,identity-half"
