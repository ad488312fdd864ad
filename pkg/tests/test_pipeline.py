import json

import pandas as pd
import pytest

from calabi_lab import pipeline
from calabi_lab.pipeline import CHAIN, Check, run_pipeline, run_stages
from calabi_lab.settings import ExperimentConfig


@pytest.fixture
def flat_config():
    return ExperimentConfig.defaults({"model": {"c": []}})


def test_check_defaults_to_threshold():
    assert Check("small", 1e-9, 1e-8).passed
    assert not Check("large", 1.0, 1e-8).passed
    assert not Check("forced", 0.0, 1.0, passed=False).passed


def test_geometry_stage(toy_config):
    manifest = run_stages(toy_config, ["geometry"])
    record = manifest.stages["geometry"]
    assert record.status == "passed", record.diagnostic
    assert abs(record.values["weyl_exponent"] - 0.4) < 0.08


def test_mode_solve_stage(toy_config):
    manifest = run_stages(toy_config, ["mode_solve"], options={"lam": 4.0, "j": 0, "source": "z^-2"})
    assert manifest.passed, manifest.stages["mode_solve"].diagnostic
    assert list(manifest.tables["mode_solution"].columns) == ["z", "u", "residual"]


def test_flat_chain_writes_every_report(flat_config, tmp_path):
    manifest = run_pipeline(flat_config, tmp_path)
    assert manifest.passed, {name: record.diagnostic for name, record in manifest.stages.items()}
    assert list(manifest.stages) == list(CHAIN)
    assert manifest.stages["compatibility"].values["lambda"] == 0.0
    assert manifest.stages["final"].values["r_exponent"] is None

    assert (tmp_path / "decay.csv").read_text(encoding="utf-8").splitlines()[0] == "z,F_0,F_1,F_2,F_3"
    for name in ("checks.csv", "newton_trace.csv", "specfun.csv", "manifest.json", "decay.svg"):
        assert (tmp_path / name).exists(), name
    stored = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert stored["config_hash"] == flat_config.config_hash()
    assert stored["outputs"]["decay_plot"] == "decay.svg"
    checks = pd.read_csv(tmp_path / "checks.csv")
    assert checks["pass"].all()


@pytest.mark.slow
def test_default_chain(toy_config, tmp_path):
    manifest = run_pipeline(toy_config, tmp_path)
    assert manifest.passed, {name: record.diagnostic for name, record in manifest.stages.items()}
    assert manifest.stages["compatibility"].values["lambda"] != 0.0
    assert manifest.stages["final"].values["final_exponent"] <= -4.8


def test_missing_prerequisite_is_skipped(toy_config):
    manifest = run_stages(toy_config, ["newton"])
    assert manifest.stages["newton"].status == "skipped"
    assert "final" in manifest.stages["newton"].diagnostic
    assert not manifest.passed


def test_failure_is_recorded(toy_config):
    manifest = run_stages(toy_config, ["poisson", "geometry"], options={"source": "not-a-source"})
    assert manifest.stages["poisson"].status == "failed"
    assert manifest.stages["poisson"].diagnostic.startswith("DomainError")
    assert manifest.stages["geometry"].status == "passed"


def test_compatibility_stage_rejects_a_wrong_lambda(toy_config, monkeypatch):
    monkeypatch.setattr(pipeline, "solve_compatibility", lambda C, vol, fiber=1.0: -1.0005 * C / (vol * fiber))
    manifest = run_stages(toy_config, ["iterate", "compatibility"], options={"refine_steps": 0})
    record = manifest.stages["compatibility"]
    assert record.status == "failed"
    assert not record.checks["end integral after lambda z"]

    manifest = run_stages(toy_config, ["iterate", "compatibility"])
    record = manifest.stages["compatibility"]
    assert record.checks["end integral after lambda z"], record.diagnostic
    table = manifest.tables["compatibility"]
    assert table["refine_steps"].iloc[0] >= 1
    assert abs(table["defect"].iloc[0]) <= 10 * table["tolerance"].iloc[0]


def test_runs_are_byte_identical(flat_config, tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    run_pipeline(flat_config, first)
    run_pipeline(flat_config, second)
    written = sorted(path.name for path in first.iterdir() if path.suffix in (".csv", ".svg"))
    assert "decay.csv" in written and "decay.svg" in written
    for name in written:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


@pytest.mark.slow
def test_smoke_stage(toy_config):
    manifest = run_stages(toy_config, ["smoke"])
    record = manifest.stages["smoke"]
    assert record.status == "passed", record.diagnostic
    oracle = [name for name in record.checks if name.endswith("vs oracle")]
    shapes = [name for name in record.checks if name.endswith("bound shape")]
    assert len(oracle) == 30
    assert len(shapes) == 4
