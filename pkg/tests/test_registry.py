import numpy as np
import pandas as pd
import pytest

from calabi_lab.errors import DomainError
from calabi_lab.registry import SMOKE_SOURCES, get_toy_config, parse_source


def test_power_sources():
    func, order = parse_source("z^-2.5")
    assert order == -2.5
    np.testing.assert_allclose(func(np.array([4.0])), [4.0 ** -2.5])
    _, order = parse_source(" z^3 ")
    assert order == 3.0


def test_named_sources():
    for name, entry in SMOKE_SOURCES.items():
        func, order = parse_source(name)
        assert order == entry["order"]
        assert np.isfinite(func(np.array([2.0]))).all()


def test_unknown_source():
    with pytest.raises(DomainError):
        parse_source("exp(-z)")


def test_csv_source(tmp_path):
    z = np.geomspace(1.0, 10.0, 40)
    path = tmp_path / "source.csv"
    pd.DataFrame({"z": z, "v": z ** -2.0}).to_csv(path, index=False)
    func, order = parse_source(str(path))
    assert order is None
    points = np.array([1.7, 3.3, 8.1])
    np.testing.assert_allclose(func(points), points ** -2.0, rtol=1e-4)
    beyond = np.array([12.0, 40.0])
    np.testing.assert_allclose(func(beyond), beyond ** -2.0, rtol=1e-10)


def test_csv_source_validation(tmp_path):
    path = tmp_path / "bad.csv"
    pd.DataFrame({"z": [1.0, 2.0, 3.0, 4.0], "w": [1.0, 2.0, 3.0, 4.0]}).to_csv(path, index=False)
    with pytest.raises(DomainError):
        parse_source(str(path))
    with pytest.raises(DomainError):
        parse_source(str(tmp_path / "missing.csv"))


def test_toy_configs():
    assert get_toy_config("flat") == {"model": {"n": 3, "c": []}}
    with pytest.raises(DomainError):
        get_toy_config("torus")
