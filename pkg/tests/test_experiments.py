import dataclasses
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from scl.experiments import config as cfg_mod
from scl.experiments.report import Report, Row, SummaryStats, emit_report, validate_summary
from scl.experiments import runners


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"seed": 5, "bogus": 1}))
    with pytest.raises(cfg_mod.ConfigError):
        cfg_mod.load_config("kernels", str(path))


def test_config_round_trip(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"seed": 123, "trials": 7, "fast_mode": True}))
    cfg = cfg_mod.load_config("cover", str(path))
    assert cfg.seed == 123 and cfg.trials == 7 and cfg.fast_mode


def test_unknown_experiment():
    with pytest.raises(cfg_mod.ConfigError):
        cfg_mod.load_config("nope")


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("SCL_THREADS", "3")
    assert cfg_mod.worker_count() == 3
    monkeypatch.setenv("SCL_THREADS", "0")
    with pytest.raises(cfg_mod.ConfigError):
        cfg_mod.worker_count()


def test_row_tolerance_kinds():
    assert Row("a", "q", 1.0005, 1.0, "abs", 1e-3).passed
    assert not Row("a", "q", 1.01, 1.0, "abs", 1e-3).passed
    assert Row("a", "q", 1.05, 1.0, "rel", 0.06).passed
    assert Row("a", "q", 1.2, 1.0, "se", 3.0, se=0.1).passed
    assert not Row("a", "q", 1.4, 1.0, "se", 3.0, se=0.1).passed
    assert Row("a", "q", 0.5, 1.0, "upper", 0.0).passed
    assert Row("a", "q", 1.5, 1.0, "lower", 0.0).passed
    assert Row("a", "q", 7.0, 8.0, "interval", 2.0).passed
    assert Row("a", "q", float("nan"), 8.0, "interval", 2.0).passed is False
    assert Row("a", "q", 123.0).passed  # report rows always pass


def test_summary_stats():
    st = SummaryStats.from_sample([1.0, 2.0, 3.0, 4.0])
    assert st.mean == 2.5
    assert st.count == 4
    assert st.se == pytest.approx(math.sqrt(st.variance / 4))
    q = list(st.quantiles.values())
    assert q == sorted(q)


def _tiny_report():
    rep = Report("demo", seed=1, trials=2, config={"x": 1})
    rep.add("r1", "val", 0.5, 0.5, "abs", 0.1)
    rep.add("r2", "val", 2.0, None, "report", 0.0, required=False, detail="extra, note")
    rep.fitted_constants["c0"] = 2.8
    return rep


def test_emit_report_deterministic(tmp_path):
    d1, d2 = tmp_path / "a", tmp_path / "b"
    emit_report(_tiny_report(), str(d1))
    emit_report(_tiny_report(), str(d2))
    for name in ("demo.csv", "summary.json"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()
    header = (d1 / "demo.csv").read_text().splitlines()[0]
    assert header.startswith("experiment,row_id,quantity,value")


def test_emit_report_empty(tmp_path):
    rep = Report("empty", seed=0, trials=0)
    csv_path, json_path = emit_report(rep, str(tmp_path))
    lines = open(csv_path).read().splitlines()
    assert len(lines) == 1  # header only
    summary = json.load(open(json_path))
    assert summary["rows"] == [] and summary["pass"] is True


def test_summary_schema_validation(tmp_path):
    emit_report(_tiny_report(), str(tmp_path))
    summary = json.load(open(tmp_path / "summary.json"))
    assert validate_summary(summary) == []
    del summary["seed"]
    assert any("seed" in p for p in validate_summary(summary))


def test_float_formatting_round_trip():
    from scl.experiments.report import fmt

    x = 1.0 / 3.0
    assert float(fmt(x)) == x
    assert fmt(True) == "true"
    assert fmt(None) == ""


def test_cli_smoke(tmp_path):
    from scl.experiments.cli import main

    out = tmp_path / "out"
    code = main([
        "wasserstein", "--fast-mode", "--seed", "42", "--out", str(out),
    ])
    assert code == 0
    summary = json.load(open(out / "summary.json"))
    assert summary["experiment"] == "wasserstein"
    assert summary["seed"] == 42
    assert validate_summary(summary) == []


def test_cli_entrypoint_subprocess(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "scl.experiments.cli", "--help"],
        capture_output=True, text=True,
    )
    assert res.returncode == 0
    assert "cover" in res.stdout


def test_seed_determinism_byte_identical(tmp_path):
    cfg = dataclasses.replace(cfg_mod.WassersteinConfig(), fast_mode=True, seed=9)
    rep1 = runners.run_wasserstein(cfg)
    rep2 = runners.run_wasserstein(cfg)
    d1, d2 = tmp_path / "r1", tmp_path / "r2"
    emit_report(rep1, str(d1))
    emit_report(rep2, str(d2))
    assert (d1 / "wasserstein.csv").read_bytes() == (d2 / "wasserstein.csv").read_bytes()
    assert (d1 / "summary.json").read_bytes() == (d2 / "summary.json").read_bytes()


def test_cover_worker_count_invariance(tmp_path, monkeypatch):
    # same seed, different worker counts: identical trial results
    cfg = dataclasses.replace(
        cfg_mod.CoverConfig(), eps_list=(0.8, 0.5), accept_eps=0.5,
        step_fraction=0.5, grid_fraction=0.25, chunk=3000, seed=31,
    )
    monkeypatch.setenv("SCL_THREADS", "1")
    rep1 = runners.run_cover_time(cfg, trials=3)
    monkeypatch.setenv("SCL_THREADS", "2")
    rep2 = runners.run_cover_time(cfg, trials=3)
    v1 = {r.row_id: r.value for r in rep1.rows}
    v2 = {r.row_id: r.value for r in rep2.rows}
    assert v1.keys() == v2.keys()
    for k in v1:
        assert v1[k] == pytest.approx(v2[k], abs=0.0)


def test_plane_engine_unit_case():
    times = runners.plane_excursion_times(1.0, 1.0, 1500, 4e-4, np.random.default_rng(5))
    se = times.std(ddof=1) / math.sqrt(len(times))
    assert abs(times.mean() - 1.0) <= max(3.5 * se, 0.05)
