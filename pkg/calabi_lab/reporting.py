"""
CSV and SVG writers for run outputs

Every table has a documented header; CSVs are UTF-8, comma separated, with
17 significant digits. Plots are derived from the CSV data and written with a
fixed SVG hash salt and no date so reruns are byte-identical.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.16e"

# Header of every table; decay.csv is z, F_0, ..., F_m and is built per run
TABLE_SCHEMAS = {
    "decay_reports": ["index", "z_lo", "z_hi", "exponent", "target", "residual", "n_points", "degenerate"],
    "gradient_reports": ["index", "z_lo", "z_hi", "exponent", "target", "residual", "n_points", "degenerate"],
    "compatibility": ["C", "grid_part", "tail_part", "tail_order", "lambda_linear", "lambda", "refine_steps",
                      "defect", "tolerance", "order_before", "order_after"],
    "final": ["z", "F", "closeness"],
    "newton_trace": ["iteration", "max_residual", "step_norm", "damping"],
    "newton_solution": ["z", "phi", "residual"],
    "specfun": ["function", "parameter", "y", "value", "envelope_lo", "envelope_hi", "pass"],
    "mode_solution": ["z", "u", "residual"],
    "poisson": ["z", "sup_u", "sup_centered", "laplace_residual"],
    "poisson_modes": ["index", "lam", "j", "level", "v_norm", "u_norm", "bound_ratio", "tail_bound",
                      "max_residual"],
    "checks": ["stage", "check", "value", "threshold", "pass"],
}

PLOT_STYLE = {
    "svg.hashsalt": "calabi-lab",
    "svg.fonttype": "none",
    "figure.figsize": (7.0, 4.5),
}


def decay_columns(steps: int) -> List[str]:
    return ["z"] + [f"F_{j}" for j in range(steps + 1)]


def empty_table(name: str, columns: Optional[List[str]] = None) -> pd.DataFrame:
    columns = TABLE_SCHEMAS[name] if columns is None else columns
    return pd.DataFrame({column: pd.Series(dtype=float) for column in columns})


def write_table(frame: pd.DataFrame, path: Path, columns: Optional[Iterable[str]] = None) -> Path:
    """
    Write a table with its documented column order.

    Raises:
        OSError: the file could not be written
        KeyError: a documented column is missing
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is not None:
        frame = frame.loc[:, list(columns)]
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, encoding="utf-8", lineterminator="\n")
    logger.debug(f"wrote {path} ({len(frame)} rows)")
    return path


def plot_decay(decay: pd.DataFrame, path: Path) -> Optional[Path]:
    """
    log|F_j| against log z, one line per F column.

    Returns:
        the SVG path, or None when there is nothing to plot
    """
    columns = [column for column in decay.columns if column != "z"]
    if decay.empty or not columns:
        return None
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(PLOT_STYLE):
        fig, ax = plt.subplots()
        z = decay["z"].to_numpy()
        for column in columns:
            values = np.abs(decay[column].to_numpy())
            positive = values > 0
            if np.any(positive):
                ax.loglog(z[positive], values[positive], label=column, linewidth=1.2)
        ax.set_xlabel("z")
        ax.set_ylabel("|F_j|")
        ax.set_title("Decay of the volume-ratio defect")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(loc="lower left")
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.debug(f"wrote plot {path} ({', '.join(columns)})")
    return path


def write_tables(tables: Dict[str, pd.DataFrame], out_dir: Path, decay_header: List[str]) -> Dict[str, str]:
    """
    Write every documented table; missing ones become header-only files.

    Returns:
        table name -> path relative to out_dir
    """
    out_dir = Path(out_dir)
    outputs = {}
    schemas = dict(TABLE_SCHEMAS, decay=decay_header)
    for name in sorted(schemas):
        columns = schemas[name]
        frame = tables.get(name)
        if frame is None:
            frame = empty_table(name, columns)
        path = write_table(frame, out_dir / f"{name}.csv", columns)
        outputs[name] = path.name
    return outputs
