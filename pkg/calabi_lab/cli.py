"""
Command-line entry point

Usage:
    python -m calabi_lab all --out results/
    python -m calabi_lab iterate --config toy.json
    python -m calabi_lab mode-solve --lambda 4 --j 0 --source "z^-2" --zmax 6
    python -m calabi_lab report --out results/
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from .errors import CalabiLabError
from .pipeline import CHAIN, run_stages
from .registry import get_toy_config
from .reporting import plot_decay
from .settings import ExperimentConfig, RunManifest

logger = logging.getLogger(__name__)

COMMANDS: Dict[str, Sequence[str]] = {
    "specfun-check": ("specfun",),
    "verify": ("geometry", "wronskian", "smoke"),
    "mode-solve": ("mode_solve",),
    "poisson": ("poisson",),
    "iterate": ("iterate", "compatibility", "final"),
    "ma-solve": CHAIN,
    "all": CHAIN + ("specfun", "geometry", "wronskian", "smoke", "poisson"),
}


def _floats(text: str) -> List[float]:
    return [float(item) for item in text.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="calabi_lab", description="Numerical laboratory for the Calabi model end")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file of overrides on the defaults")
    common.add_argument("--toy", help="named toy configuration (standard, flat, surface)")
    common.add_argument("--out", type=Path, help="output directory (default: CALABI_OUTPUT_DIR or results/)")
    common.add_argument("--threads", type=int, help="workers for the per-mode solves")
    common.add_argument("--seed", type=int, help="recorded in the config hash")
    common.add_argument("--no-plots", action="store_true", help="skip the SVG decay plot")
    common.add_argument("--verbose", "-v", action="store_true", help="debug logging")

    commands = parser.add_subparsers(dest="command", required=True)
    subs = {name: commands.add_parser(name, parents=[common]) for name in COMMANDS}
    commands.add_parser("report", parents=[common], help="re-plot decay.csv and print the manifest")

    mode = subs["mode-solve"]
    mode.add_argument("--n", type=int, help="complex dimension")
    mode.add_argument("--lambda", "--lam", dest="lam", type=float, default=1.0, help="divisor eigenvalue")
    mode.add_argument("--j", type=int, default=0, help="fiber degree")
    mode.add_argument("--source", default="z^-2", help="registry source name, 'z^p' or a CSV with columns z,v")
    mode.add_argument("--zmax", "--z-max", dest="z_max", type=float, default=6.0, help="outer truncation")

    poisson = subs["poisson"]
    poisson.add_argument("--modes", type=int, help="truncation N of the spectrum")
    poisson.add_argument("--grid", type=int, help="radial samples")
    poisson.add_argument("--source", default="z^-2", help="radial profile of the source modes, 'z^p'")

    for name in ("iterate", "ma-solve", "all"):
        subs[name].add_argument("--n", type=int, help="complex dimension")
        subs[name].add_argument("--c", type=_floats, help="wedge ratios, e.g. 0.3,0.05")
        subs[name].add_argument("--steps", type=int, help="iteration steps, at most n+2")
        subs[name].add_argument("--grid", type=int, help="radial samples")
    for name in ("ma-solve", "all"):
        subs[name].add_argument("--window", type=_floats, help="Newton window z_min,z_max")
        subs[name].add_argument("--tol", type=float, help="Newton tolerance on the max residual")
        subs[name].add_argument("--max-iter", type=int, help="Newton iteration cap")
    return parser


def _flag_overrides(args: argparse.Namespace) -> Dict[str, Dict]:
    """Config sections touched by command-line flags."""
    flags = vars(args)
    overrides: Dict[str, Dict] = {}

    def put(section: str, key: str, value):
        if value is not None:
            overrides.setdefault(section, {})[key] = value

    if args.command in ("iterate", "ma-solve", "all"):
        put("model", "n", flags.get("n"))
        put("model", "c", flags.get("c"))
        put("iteration", "steps", flags.get("steps"))
        put("grid", "num", flags.get("grid"))
    if args.command == "poisson":
        put("spectral", "truncation", flags.get("modes"))
        put("spectral", "num", flags.get("grid"))
    window = flags.get("window")
    if window is not None:
        if len(window) != 2:
            raise ValueError(f"--window needs z_min,z_max, got {window}")
        put("newton", "z_min", window[0])
        put("newton", "z_max", window[1])
    put("newton", "tol", flags.get("tol"))
    put("newton", "max_iter", flags.get("max_iter"))

    put("output", "output_dir", None if args.out is None else str(args.out))
    put("output", "threads", args.threads)
    put("output", "seed", args.seed)
    if args.no_plots:
        put("output", "plots", False)
    return overrides


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then --toy, then --config, then the command-line flags."""
    data = ExperimentConfig.defaults().model_dump()
    layers = []
    if args.toy:
        layers.append(get_toy_config(args.toy))
    if args.config:
        layers.append(json.loads(args.config.read_text(encoding="utf-8")))
    layers.append(_flag_overrides(args))
    for layer in layers:
        for section, values in layer.items():
            data.setdefault(section, {}).update(values)
    return ExperimentConfig.model_validate(data)


def print_summary(manifest: RunManifest, out_dir: Path):
    print()
    print("=" * 60)
    print("Run Summary")
    print("=" * 60)
    print(f"Config hash: {manifest.config_hash[:16]}")
    print(f"Version: {manifest.version}")
    print()
    for name, record in manifest.stages.items():
        icon = {"passed": "✅", "failed": "❌", "skipped": "⏭️ "}[record.status]
        print(f"{icon} {name}: {record.status}")
        if record.diagnostic:
            print(f"     {record.diagnostic}")
        for key, value in record.values.items():
            print(f"     {key} = {'n/a' if value is None else format(value, '.6g')}")
    print("-" * 60)
    print(f"Outputs in {out_dir}: {len(manifest.outputs)} files")
    print("=" * 60)


def report(out_dir: Path) -> bool:
    """Re-plot decay.csv and print the stored manifest."""
    manifest_path = out_dir / "manifest.json"
    if not manifest_path.exists():
        print(f"❌ No manifest in {out_dir}")
        return False
    manifest = RunManifest.model_validate_json(manifest_path.read_text(encoding="utf-8"))
    decay_path = out_dir / "decay.csv"
    if decay_path.exists():
        plot_decay(pd.read_csv(decay_path), out_dir / "decay.svg")
    print_summary(manifest, out_dir)
    return manifest.passed


def main(argv: Optional[List[str]] = None) -> bool:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )

    try:
        config = load_config(args)
    except (ValidationError, CalabiLabError, OSError, ValueError) as exc:
        print(f"❌ Invalid configuration: {exc}")
        return False
    out_dir = Path(config.output.output_dir)

    if args.command == "report":
        return report(out_dir)

    options = {}
    if args.command == "mode-solve":
        options = {"lam": args.lam, "j": args.j, "source": args.source, "z_max": args.z_max}
        if args.n is not None:
            options["n"] = args.n
    elif args.command == "poisson":
        options = {"source": args.source}

    print("=" * 60)
    print(f"calabi_lab {args.command}")
    print("=" * 60)
    try:
        manifest = run_stages(config, COMMANDS[args.command], out_dir, options)
    except OSError as exc:
        print(f"❌ Could not write outputs: {exc}")
        return False
    print_summary(manifest, out_dir)
    return manifest.passed


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
