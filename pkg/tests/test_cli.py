import pandas as pd
import pytest

from calabi_lab.cli import _flag_overrides, build_parser, load_config, main


def test_report_without_manifest(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) is False


def test_iterate_on_the_flat_toy(tmp_path):
    assert main(["iterate", "--toy", "flat", "--no-plots", "--out", str(tmp_path)]) is True
    assert (tmp_path / "manifest.json").exists()
    assert not (tmp_path / "decay.svg").exists()

    assert main(["report", "--out", str(tmp_path)]) is True
    assert (tmp_path / "decay.svg").exists()


def test_invalid_flags_are_reported(tmp_path, capsys):
    assert main(["iterate", "--steps", "9", "--out", str(tmp_path)]) is False
    assert "Invalid configuration" in capsys.readouterr().out
    assert not (tmp_path / "manifest.json").exists()


def test_flag_overrides():
    args = build_parser().parse_args(["ma-solve", "--c", "0.1,0.2", "--window", "5,40", "--tol", "1e-9",
                                      "--threads", "2", "--no-plots"])
    overrides = _flag_overrides(args)
    assert overrides["model"] == {"c": [0.1, 0.2]}
    assert overrides["newton"] == {"z_min": 5.0, "z_max": 40.0, "tol": 1e-9}
    assert overrides["output"] == {"threads": 2, "plots": False}


def test_config_layers(tmp_path):
    path = tmp_path / "overrides.json"
    path.write_text('{"model": {"c": [0.2]}, "iteration": {"steps": 2}}', encoding="utf-8")
    args = build_parser().parse_args(["iterate", "--toy", "surface", "--config", str(path), "--steps", "1"])
    config = load_config(args)
    assert config.model.n == 2
    assert config.model.c == [0.2]
    assert config.iteration.steps == 1


@pytest.mark.slow
def test_verify(tmp_path):
    assert main(["verify", "--no-plots", "--out", str(tmp_path)]) is True
    checks = pd.read_csv(tmp_path / "checks.csv")
    assert checks["pass"].all()
    assert checks["check"].str.endswith("vs oracle").sum() == 30
