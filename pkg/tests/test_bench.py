import math
import os

import numpy as np
import pytest
import yaml

from scorelab.bench import (
    RATE_COLUMNS,
    RateRecord,
    RunConfig,
    config_hash,
    emit_report,
    fit_slope,
    load_config,
    read_records,
    resolve_density,
    resolve_plan,
    run_end_to_end,
    write_records,
)
from scorelab.errors import DomainError, FormatError


TINY = dict(
    density="preset:bench1d",
    n=1024,
    steps=200,
    batch_size=64,
    width=16,
    depth=2,
    t_lo=1e-3,
    t_hi=3.0,
    sampler_steps=100,
    chains=2048,
    score_l2_mc=512,
)


def make_record(seed=0, n=1024, tv=0.5):
    return RateRecord(
        config_hash="abc", density_hash="def", seed=seed, d=1, dstar=1, beta=1.0,
        n=n, width=4, depth=1, trunc_B=10.0, t_lo=1e-4, t_hi=2.0,
        sampler_steps=100, chains=n, piecewise=False, oracle_score=False, tv_hist=tv,
    )


def test_config_hash_stable_and_sensitive():
    a = RunConfig(density="preset:bench1d", seed=0)
    b = RunConfig(density="preset:bench1d", seed=0)
    c = RunConfig(density="preset:bench1d", seed=1)
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(c)


def test_load_config_aliases(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(
        yaml.safe_dump(
            {"density": "preset:bench1d", "schedule_kind": "linear-in-t",
             "schedule_params": [0.5, 0.5], "n": 2048}
        )
    )
    cfg = load_config(path)
    assert cfg.schedule_kind == "linear"
    assert cfg.schedule_params == (0.5, 0.5)


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump({"density": "preset:bench1d", "bogus": 1}))
    with pytest.raises(FormatError):
        load_config(path)


def test_resolve_density_preset_and_padded():
    assert resolve_density("preset:bench1d").d == 1
    assert resolve_density("padded:3").d == 3
    with pytest.raises(DomainError):
        resolve_density("preset:nope")


def test_resolve_plan_uses_scaling_when_unset():
    cfg = RunConfig(density="preset:bench1d", n=2**12)
    plan = resolve_plan(cfg)
    assert plan.width * plan.depth == round((2**12) ** (1 / 6))
    cfg2 = RunConfig(density="preset:bench1d", n=2**12, width=10, depth=2,
                     t_lo=1e-3, t_hi=2.0)
    plan2 = resolve_plan(cfg2)
    assert (plan2.width, plan2.depth) == (10, 2)
    assert plan2.window.t_lo == 1e-3


def test_records_round_trip(tmp_path):
    path = tmp_path / "rate.csv"
    recs = [make_record(seed=0), make_record(seed=1, tv=0.4)]
    write_records(path, recs, append=False)
    rows = read_records(path)
    assert len(rows) == 2
    assert rows[0]["seed"] == "0"
    assert float(rows[1]["tv_hist"]) == pytest.approx(0.4)
    assert list(rows[0].keys()) == RATE_COLUMNS


def test_emit_report_empty_is_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit_report([], path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 1
    assert lines[0].split(",") == RATE_COLUMNS


def test_emit_report_two_records_stable_order(tmp_path):
    path = tmp_path / "two.csv"
    emit_report([make_record(seed=0), make_record(seed=1)], path)
    rows = read_records(path)
    assert [r["seed"] for r in rows] == ["0", "1"]


def test_read_records_schema_mismatch(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(FormatError):
        read_records(path)


def test_fit_slope_matches_closed_form():
    # independent least-squares oracle computed from the normal equations
    ns = np.array([1000, 2000, 4000, 8000], dtype=float)
    errs = np.array([0.5, 0.36, 0.25, 0.18])
    slope, se = fit_slope(ns, errs)
    lx, ly = np.log(ns), np.log(errs)
    A = np.stack([np.ones(4), lx], axis=1)
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    assert slope == pytest.approx(coef[1], rel=1e-12)
    dof_var = res[0] / 2 / np.sum((lx - lx.mean()) ** 2)
    assert se == pytest.approx(np.sqrt(dof_var), rel=1e-9)


def test_fit_slope_degenerate_constant_errors():
    slope, se = fit_slope([1000, 2000, 4000, 8000], [0.3, 0.3, 0.3, 0.3])
    assert slope == pytest.approx(0.0, abs=1e-12)


def test_run_end_to_end_smoke_and_determinism(tmp_path):
    cfg = RunConfig(seed=3, out_dir=str(tmp_path / "runs"), **TINY)
    rec1 = run_end_to_end(cfg, persist=False)
    rec2 = run_end_to_end(cfg, persist=False)
    for field in ("tv_hist", "tv_hist_clipped", "w1_value", "val_loss_best",
                  "train_loss_final", "outside_frac", "marginal_tv"):
        assert getattr(rec1, field) == getattr(rec2, field)
    assert rec1.tv_hist > 0
    assert rec1.w1_method == "exact-1d"


def test_run_end_to_end_persists_artifacts(tmp_path):
    out = tmp_path / "runs"
    cfg = RunConfig(seed=4, out_dir=str(out), **TINY)
    rec = run_end_to_end(cfg, persist=True)
    files = os.listdir(out)
    assert any(f.endswith("_ckpt.npz") for f in files)
    assert any(f.endswith("_samples.csv") for f in files)
    assert any(f.endswith("_train.csv") for f in files)
    assert "rate.csv" in files
    rows = read_records(out / "rate.csv")
    assert rows[0]["config_hash"] == rec.config_hash


def test_oracle_bypass_beats_tiny_trained_run(tmp_path):
    trained = run_end_to_end(RunConfig(seed=5, out_dir=str(tmp_path), **TINY), persist=False)
    cfg_o = RunConfig(seed=5, out_dir=str(tmp_path), oracle_score=True,
                      **{k: v for k, v in TINY.items()})
    oracle = run_end_to_end(cfg_o, persist=False)
    assert oracle.tv_hist < trained.tv_hist


def test_env_out_dir_override(tmp_path, monkeypatch):
    override = tmp_path / "elsewhere"
    monkeypatch.setenv("SCORELAB_OUT", str(override))
    cfg = RunConfig(seed=6, out_dir=str(tmp_path / "ignored"), **TINY)
    run_end_to_end(cfg, persist=True)
    assert override.exists()
    assert not (tmp_path / "ignored").exists()


def test_cli_density_and_report(tmp_path, capsys):
    from scorelab.cli import main

    spec = tmp_path / "dens.yaml"
    from scorelab.density import save_density
    from scorelab.presets import benchmark_density_1d

    save_density(benchmark_density_1d(), spec)
    out_csv = tmp_path / "s.csv"
    assert main(["density", "sample", str(spec), "-n", "100", "--seed", "1",
                 "-o", str(out_csv)]) == 0
    from scorelab.density import load_samples

    x, meta = load_samples(out_csv)
    assert x.shape == (100, 1)

    rate = tmp_path / "rate.csv"
    write_records(rate, [make_record(n=n, tv=tv) for n, tv in
                         [(1000, 0.5), (2000, 0.4), (4000, 0.3)]], append=False)
    assert main(["report", str(rate)]) == 0
    assert "slope" in capsys.readouterr().out


def test_cli_verify_decomposition(tmp_path, capsys):
    from scorelab.cli import main

    out = tmp_path / "report.csv"
    assert main(["verify-decomposition", "--spec", "linear", "-o", str(out)]) == 0
    text = capsys.readouterr().out
    assert "identity" in text
    assert out.exists()
