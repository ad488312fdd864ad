import pytest
from pydantic import ValidationError

from calabi_lab.settings import ExperimentConfig, RunManifest


def test_defaults_follow_config_module(toy_config):
    assert toy_config.model.n == 3
    assert toy_config.model.c == [0.3, 0.05]
    assert toy_config.grid.fit_window == (10.0, 100.0)
    assert toy_config.iteration.steps == 3
    assert toy_config.newton.z_max == 50.0


def test_output_dir_from_environment(monkeypatch):
    monkeypatch.setenv("CALABI_OUTPUT_DIR", "elsewhere")
    assert ExperimentConfig.defaults().output.output_dir == "elsewhere"


def test_json_round_trip(toy_config, tmp_path):
    path = toy_config.dump(tmp_path / "config.json")
    assert ExperimentConfig.load(path) == toy_config


def test_partial_file_falls_back_to_defaults(tmp_path):
    path = tmp_path / "toy.json"
    path.write_text('{"model": {"n": 2, "c": [0.2]}}', encoding="utf-8")
    config = ExperimentConfig.load(path)
    assert config.model.n == 2
    assert config.grid.num == 4000


def test_hash_ignores_output_location():
    base = ExperimentConfig.defaults()
    moved = ExperimentConfig.defaults({"output": {"output_dir": "/tmp/other", "threads": 4}})
    reseeded = ExperimentConfig.defaults({"output": {"seed": 7}})
    assert base.config_hash() == moved.config_hash()
    assert base.config_hash() != reseeded.config_hash()
    assert len(base.config_hash()) == 64


@pytest.mark.parametrize("overrides", [
    {"iteration": {"steps": 9}},
    {"model": {"c": [0.1, 0.2, 0.3]}},
    {"grid": {"z_min": 300.0}},
    {"grid": {"fit_window": [1.0, 100.0]}},
    {"newton": {"z_max": 500.0}},
    {"model": {"unknown": 1}},
])
def test_invalid_configurations(overrides):
    with pytest.raises(ValidationError):
        ExperimentConfig.defaults(overrides)


def test_manifest_records_and_round_trips(tmp_path):
    manifest = RunManifest(config_hash="abc")
    manifest.record("iterate", "passed", checks={"F_0 order": True}, values={"lambda": 0.5, "kappa": None})
    assert manifest.passed
    manifest.record("newton", "skipped", "prerequisite final did not pass")
    assert not manifest.passed

    path = manifest.save(tmp_path / "manifest.json")
    loaded = RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
    assert loaded == manifest
    assert loaded.stages["iterate"].values["kappa"] is None
    assert loaded.stages["newton"].diagnostic.startswith("prerequisite")
