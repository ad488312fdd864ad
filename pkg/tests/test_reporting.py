import numpy as np
import pandas as pd

from calabi_lab.reporting import TABLE_SCHEMAS, decay_columns, plot_decay, write_table, write_tables


def test_decay_columns():
    assert decay_columns(3) == ["z", "F_0", "F_1", "F_2", "F_3"]


def test_missing_tables_are_header_only(tmp_path):
    outputs = write_tables({}, tmp_path, decay_columns(2))
    assert set(outputs) == set(TABLE_SCHEMAS) | {"decay"}
    assert (tmp_path / "decay.csv").read_text(encoding="utf-8") == "z,F_0,F_1,F_2\n"
    assert (tmp_path / "checks.csv").read_text(encoding="utf-8") == "stage,check,value,threshold,pass\n"


def test_floats_keep_seventeen_digits(tmp_path):
    path = write_table(pd.DataFrame({"x": [0.1], "y": [-2.0]}), tmp_path / "t.csv")
    assert path.read_text(encoding="utf-8") == "x,y\n1.0000000000000001e-01,-2.0000000000000000e+00\n"


def test_columns_follow_the_schema(tmp_path):
    frame = pd.DataFrame({"phi": [1.0], "z": [2.0], "residual": [0.0], "extra": [5.0]})
    write_tables({"newton_solution": frame}, tmp_path, decay_columns(0))
    header = (tmp_path / "newton_solution.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "z,phi,residual"


def test_plot_is_reproducible(tmp_path):
    z = np.geomspace(1.0, 100.0, 50)
    decay = pd.DataFrame({"z": z, "F_0": -0.6 / z, "F_1": 0.1 / z ** 2, "F_2": np.zeros_like(z)})
    first = plot_decay(decay, tmp_path / "a.svg")
    second = plot_decay(decay, tmp_path / "b.svg")
    assert first.read_bytes() == second.read_bytes()
    assert b"<svg" in first.read_bytes()


def test_nothing_to_plot(tmp_path):
    assert plot_decay(pd.DataFrame({"z": []}), tmp_path / "empty.svg") is None
    assert not (tmp_path / "empty.svg").exists()
