"""
Command-line front end.

Subcommands: simulate, estimate, gof, boot-density, ingest.  Every command
writes a ``manifest.json`` recording the arguments, seed, versions and
timestamps next to its outputs.

Exit codes: 0 ok, 2 usage or parse error, 3 numerical failure,
4 degenerate threshold with ``--strict``.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import platform
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .fields import MMA, BrownResnick, LatticeField, simulate, to_unit_frechet
from .gof import (
    DegenerateThresholdWarning,
    GofConfig,
    default_parameter_grid,
    run_test,
    statistic_densities,
    whittle_estimate,
)
from .ingest import idw_grid, read_stations

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_DEGENERATE = 0, 2, 3, 4


class UsageError(Exception):
    pass


# ----------------------------------------------------------------------------
# argument types
# ----------------------------------------------------------------------------

def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _open_unit(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {v}")
    return v


def _theta(text):
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {v}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=_seed, default=0, help="64-bit RNG seed (default 0)")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker threads for replicates")
    p.add_argument("--out", default=None, help="output file or directory")
    p.add_argument("--naive", action="store_true", help="use the direct lag-sum evaluation of surfaces")
    p.add_argument("--strict", action="store_true", help="escalate degenerate-threshold warnings (exit 4)")
    p.add_argument("--plot", action="store_true", help="also render PNG figures next to the outputs")
    return p


def _model_flags(p: argparse.ArgumentParser, required: bool):
    p.add_argument("--model", choices=["mma", "br"], required=required)
    p.add_argument("--phi", type=_positive_float, default=0.5, help="MMA weight base")
    p.add_argument("--radius", type=_nonneg_int, default=5, help="MMA L1 truncation radius")
    p.add_argument("--hurst", type=_open_unit, default=0.5, help="BR Hurst index")
    p.add_argument("--terms", type=_positive_int, default=1000, help="BR Poisson terms")
    p.add_argument("--br-convention", choices=["half-variogram", "exact"], default="half-variogram",
                   help="BR extremogram formula used for fitting")


def _test_flags(p: argparse.ArgumentParser):
    p.add_argument("--p0", type=_open_unit, default=0.05, help="exceedance probability 1/m_n")
    p.add_argument("--B", type=_positive_int, default=200, help="replicates per procedure")
    p.add_argument("--alpha", type=_open_unit, default=0.05)
    p.add_argument("--theta", type=_theta, default=None, help="geometric block parameter (default 1/n)")
    p.add_argument("--theta-rule", choices=["inverse-n", "ratio"], default="inverse-n")
    p.add_argument("--r-n", type=_nonneg_int, default=None, help="lag cap of the bootstrap (default floor(2 log n))")
    p.add_argument("--lag-cap", type=_positive_float, default=None,
                   help="lag cap of the simulation surfaces (default all ||h|| < n)")
    p.add_argument("--no-standardize", action="store_true", help="skip the rank transform to unit Frechet")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="maxgof", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a benchmark field")
    _model_flags(p, required=True)
    p.add_argument("--n", type=_positive_int, required=True, help="lattice side length")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--to-frechet", action="store_true", help="rank-transform to unit Frechet")

    p = sub.add_parser("estimate", parents=[common], help="fit a null model by spectral contrast")
    p.add_argument("observed", help="field CSV")
    p.add_argument("--null", choices=["mma", "br"], required=True)
    p.add_argument("--p0", type=_open_unit, default=0.05)
    p.add_argument("--r-n", type=_nonneg_int, default=None)
    p.add_argument("--br-convention", choices=["half-variogram", "exact"], default="half-variogram")
    p.add_argument("--radius", type=_nonneg_int, default=5)

    p = sub.add_parser("gof", parents=[common], help="run the goodness-of-fit test")
    p.add_argument("observed", help="field CSV")
    p.add_argument("--null", choices=["mma", "br"], required=True)
    p.add_argument("--estimate", type=float, default=None, help="skip fitting and use this parameter")
    p.add_argument("--radius", type=_nonneg_int, default=5)
    p.add_argument("--terms", type=_positive_int, default=1000)
    p.add_argument("--br-convention", choices=["half-variogram", "exact"], default="half-variogram")
    _test_flags(p)

    p = sub.add_parser("boot-density", parents=[common],
                       help="paired simulation/bootstrap statistic samples")
    _model_flags(p, required=True)
    p.add_argument("--observed", default=None, help="field CSV to bootstrap (default: one model draw)")
    p.add_argument("--n", type=_positive_int, default=None, help="lattice side (default from --observed, else 50)")
    _test_flags(p)

    p = sub.add_parser("ingest", parents=[common], help="grid station data and/or standardize a field")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--stations", help="CSV of x,y,value rows")
    src.add_argument("--grid-csv", help="an already gridded field CSV")
    p.add_argument("--idw", type=_positive_float, default=2.0, metavar="POWER", help="IDW power (default 2)")
    p.add_argument("--grid", type=_positive_int, nargs=2, metavar=("NX", "NY"))
    p.add_argument("--bbox", type=float, nargs=4, metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    p.add_argument("--to-frechet", action="store_true")
    return parser


# ----------------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------------

def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(path: Path, args: argparse.Namespace, argv, started: str, outputs) -> Path:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "config": config,
        "seed": args.seed,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "started": started,
        "finished": _now(),
        "outputs": [str(o) for o in outputs],
    }
    path.write_text(json.dumps(manifest, indent=2, default=str))
    return path


def _load_field(path) -> LatticeField:
    try:
        return LatticeField.from_csv(Path(path))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read field {path}: {exc}") from exc


def _model_from_args(args, family=None):
    family = family or args.model
    if family == "mma":
        return MMA(phi=getattr(args, "phi", 0.5), radius=args.radius)
    return BrownResnick(hurst=getattr(args, "hurst", 0.5), terms=getattr(args, "terms", 1000),
                        convention=args.br_convention)


def _config_from_args(args) -> GofConfig:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return GofConfig(p0=args.p0, B=args.B, alpha=args.alpha, r_n=args.r_n,
                         theta=args.theta, theta_rule=args.theta_rule, lag_cap=args.lag_cap,
                         seed=args.seed, standardize=not args.no_standardize,
                         naive=args.naive, threads=args.threads)


def _write_stats(path: Path, stats) -> Path:
    lines = ["replicate,statistic"] + [f"{b},{float(v)!r}" for b, v in enumerate(stats, start=1)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_stats(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1]


def _out_dir(args, default: str) -> Path:
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------

def cmd_simulate(args, argv, started):
    spec = _model_from_args(args)
    field = simulate(spec, args.n, args.seed)
    if args.to_frechet:
        field = to_unit_frechet(field)
    out = Path(args.out or f"{args.model}_n{args.n}_seed{args.seed}.{args.format}")
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        field.to_csv(out)
    else:
        out.write_text(field.to_json())
    outputs = [out]
    if args.plot:
        from .plotting import plot_field

        outputs.append(plot_field(field.values, out.with_suffix(".png"),
                                  title=f"{args.model} n={args.n} seed={args.seed}"))
    write_manifest(out.with_name(out.stem + ".manifest.json"), args, argv, started, outputs)
    return EXIT_OK


def cmd_estimate(args, argv, started):
    observed = _load_field(args.observed)
    template = MMA(phi=0.5, radius=args.radius) if args.null == "mma" \
        else BrownResnick(hurst=0.5, convention=args.br_convention)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cfg = GofConfig(p0=args.p0, r_n=args.r_n, seed=args.seed)
    est = whittle_estimate(observed, template, default_parameter_grid(template), cfg)
    result = {"family": args.null, "estimate": est, "n": observed.n, "p0": args.p0,
              "r_n": cfg.resolve_r_n(observed.n)}
    text = json.dumps(result, indent=2)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")
        write_manifest(out.with_name(out.stem + ".manifest.json"), args, argv, started, [out])
    print(text)
    return EXIT_OK


def cmd_gof(args, argv, started):
    observed = _load_field(args.observed)
    cfg = _config_from_args(args)
    template = _model_from_args(args, family=args.null)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateThresholdWarning)
        report = run_test(observed, template, cfg, estimate=args.estimate)
    degenerate = [w for w in caught if issubclass(w.category, DegenerateThresholdWarning)]
    for w in degenerate:
        print(f"warning: {w.message}", file=sys.stderr)
    out = _out_dir(args, "gof_out")
    sim_path = _write_stats(out / "sim_stats.csv", report.sim_stats)
    boot_path = _write_stats(out / "boot_stats.csv", report.boot_stats)
    surface_path = out / "surface.csv"
    report.normalized_surface.to_csv(surface_path)
    report_path = out / "report.json"
    report_path.write_text(report.to_json(sim_stats_path=sim_path, boot_stats_path=boot_path) + "\n")
    outputs = [report_path, sim_path, boot_path, surface_path]
    if args.plot:
        from .plotting import plot_densities, plot_surface

        outputs.append(plot_surface(report.normalized_surface.values, out / "surface.png",
                                    report.c_sim, report.c_boot, report.t_obs))
        outputs.append(plot_densities(report.sim_stats, report.boot_stats, out / "densities.png"))
    write_manifest(out / "manifest.json", args, argv, started, outputs)
    print(json.dumps({"t_obs": report.t_obs, "c_sim": report.c_sim, "c_boot": report.c_boot,
                      "estimate": report.estimate, "decisions": report.decisions}))
    if degenerate and args.strict:
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_boot_density(args, argv, started):
    observed = _load_field(args.observed) if args.observed else None
    n = observed.n if observed is not None else (args.n or 50)
    if observed is not None and args.n is not None and args.n != n:
        raise UsageError(f"--n {args.n} does not match the observed field size {n}")
    cfg = _config_from_args(args)
    spec = _model_from_args(args)
    sim_stats, boot_stats, plan = statistic_densities(spec, n, cfg, observed=observed)
    out = Path(args.out or "boot_density.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = ["kind,replicate,statistic"]
    lines += [f"sim,{b},{float(v)!r}" for b, v in enumerate(sim_stats, start=1)]
    lines += [f"boot,{b},{float(v)!r}" for b, v in enumerate(boot_stats, start=1)]
    out.write_text("\n".join(lines) + "\n")
    outputs = [out]
    if args.plot:
        from .plotting import plot_densities

        outputs.append(plot_densities(sim_stats, boot_stats, out.with_suffix(".png")))
    write_manifest(out.with_name(out.stem + ".manifest.json"), args, argv, started, outputs)
    return EXIT_OK


def cmd_ingest(args, argv, started):
    if args.stations:
        if args.grid is None or args.bbox is None:
            raise UsageError("--stations requires --grid NX NY and --bbox XMIN XMAX YMIN YMAX")
        nx, ny = args.grid
        if nx != ny:
            raise UsageError("lattice fields are square: --grid needs NX == NY")
        try:
            stations = read_stations(Path(args.stations))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read stations: {exc}") from exc
        if not stations:
            raise UsageError("empty station set")
        try:
            values = idw_grid(stations, nx, ny, args.bbox, power=args.idw)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        field = LatticeField(values)
    else:
        field = _load_field(args.grid_csv)
    if args.to_frechet:
        field = to_unit_frechet(field)
    out = Path(args.out or "gridded.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    field.to_csv(out)
    outputs = [out]
    if args.plot:
        from .plotting import plot_field

        outputs.append(plot_field(field.values, out.with_suffix(".png")))
    write_manifest(out.with_name(out.stem + ".manifest.json"), args, argv, started, outputs)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "gof": cmd_gof,
    "boot-density": cmd_boot_density,
    "ingest": cmd_ingest,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = _now()
    try:
        return COMMANDS[args.command](args, argv, started)
    except UsageError as exc:
        print(f"maxgof {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ImportError as exc:
        print(f"maxgof {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        print(f"maxgof {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
