"""seakde command line.

Exit codes: 0 success, 2 configuration error, 3 data or I/O error,
4 numerical error, 5 bandwidth search did not converge, 1 anything else.
Log verbosity comes from SEAKDE_LOG_LEVEL (default WARNING).
"""

import argparse
from dataclasses import replace
import logging
import os
import sys

from . import bandwidth as bw
from . import pipeline
from .clutter_sim import ClutterScenario, generate
from .errors import ConfigError, DataError, DomainError, NumericalError, SolverError
from .kernels import Family
from .samples_io import save_amplitude_csv

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL, EXIT_NOT_CONVERGED = 0, 1, 2, 3, 4, 5
LOG_ENV = "SEAKDE_LOG_LEVEL"

log = logging.getLogger("seakde")


def _floats(text):
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _kv(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k.strip(), float(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter {k!r}: {v!r} is not a number")


def _common(p, data=True):
    p.add_argument("--config", help="TOML or JSON run configuration")
    if data:
        p.add_argument("--data", help="amplitude CSV (cell_id,label,amplitude); "
                                      "simulated from [scenario] when omitted")
        p.add_argument("--normalize", choices=["maxabs", "rms", "none"],
                       help="amplitude normalization, one scale from pooled clutter cells "
                            "(default maxabs, or SEAKDE_NORMALIZE)")
    p.add_argument("--out-dir", default=".", help="directory for output files")


def _fixed_point_args(p):
    d = bw.FixedPointConfig()
    p.add_argument("--h0", type=float, help=f"initial bandwidth (default {d.h0})")
    p.add_argument("--tol", type=float, help=f"relative stopping tolerance (default {d.tol})")
    p.add_argument("--max-iter", type=int, help=f"iteration cap (default {d.max_iter})")
    p.add_argument("--scheme", choices=bw.SCHEMES,
                   help=f"update rule (default {d.scheme})")
    q = bw.QuadratureConfig()
    p.add_argument("--grid-points", type=int,
                   help=f"quadrature intervals for R(f'') (default {q.grid_points})")


def build_parser():
    ap = argparse.ArgumentParser(prog="seakde", description="Kernel density modeling of "
                                 "sea-clutter amplitudes and CFAR detection.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write a synthetic dataset CSV")
    s.add_argument("--config", help="TOML or JSON file with a [scenario] table")
    s.add_argument("--family", help="rayleigh, weibull or k (default rayleigh)")
    s.add_argument("--param", type=_kv, action="append", default=[],
                   help="family parameter name=value, repeatable "
                        "(rayleigh: scale=1; weibull: c, s; k: shape, mean_power)")
    s.add_argument("--cells", type=int, help="number of cells (default 14)")
    s.add_argument("--samples", type=int, help="samples per cell (default 2048)")
    s.add_argument("--seed", type=int, help="64-bit RNG seed (default 0)")
    s.add_argument("--target-amplitude", type=float, help="target amplitude (default 0)")
    s.add_argument("--target-fraction", type=float,
                   help="probability a primary-cell sample carries the target (default 0)")
    s.add_argument("-o", "--out", required=True, help="output CSV path")

    f = sub.add_parser("fit", help="fit the parametric models")
    _common(f)
    f.add_argument("--bins", type=int, help="histogram bins (default 128)")

    b = sub.add_parser("bandwidth", help="fixed-point bandwidth per kernel")
    _common(b)
    _fixed_point_args(b)
    b.add_argument("--kernel", default="all",
                   help="gaussian, gamma, weibull or all (default all)")

    e = sub.add_parser("evaluate", help="fit report, PDF and CCDF curves")
    _common(e)
    _fixed_point_args(e)
    e.add_argument("--bins", type=int, help="histogram bins (default 128)")
    e.add_argument("--models", help="reuse models.json from an earlier run")

    d = sub.add_parser("detect", help="Pd versus Pfa for every model")
    _common(d)
    _fixed_point_args(d)
    d.add_argument("--bins", type=int, help="histogram bins (default 128)")
    d.add_argument("--pfa", type=_floats, help="comma-separated Pfa grid (default 1e-3,1e-2,1e-1)")
    d.add_argument("--models", help="reuse models.json from an earlier run")
    return ap


def _config(args):
    cfg = pipeline.load_config(args.config) if args.config else pipeline.RunConfig()
    if getattr(args, "normalize", None):
        cfg = replace(cfg, normalize=args.normalize)
    elif not args.config and os.environ.get("SEAKDE_NORMALIZE"):
        cfg = replace(cfg, normalize=os.environ["SEAKDE_NORMALIZE"])
    fp = {}
    for name in ("h0", "tol", "max_iter", "scheme"):
        v = getattr(args, name, None)
        if v is not None:
            fp[name] = v
    if fp:
        cfg = replace(cfg, fixed_point=replace(cfg.fixed_point, **fp))
    if getattr(args, "grid_points", None) is not None:
        cfg = replace(cfg, quadrature=replace(cfg.quadrature, grid_points=args.grid_points))
    if getattr(args, "bins", None) is not None:
        cfg = replace(cfg, bins=args.bins)
    if getattr(args, "pfa", None):
        cfg = replace(cfg, pfa_grid=args.pfa)
    return cfg


def cmd_simulate(args):
    base = {}
    if args.config:
        base = pipeline.load_config(args.config).scenario
        base = base.to_dict() if base is not None else {}
    if args.family is not None:
        base["family"] = args.family
        base.pop("params", None)
    if args.param:
        base["params"] = dict(args.param)
    for key, attr in (("n_cells", "cells"), ("samples_per_cell", "samples"), ("rng_seed", "seed"),
                      ("target_amplitude", "target_amplitude"),
                      ("target_fraction", "target_fraction")):
        v = getattr(args, attr)
        if v is not None:
            base[key] = v
    sc = ClutterScenario.from_dict(base)
    out_dir = os.path.dirname(os.path.abspath(args.out))
    if not os.path.isdir(out_dir):
        raise FileNotFoundError(f"output directory {out_dir!r} does not exist")
    save_amplitude_csv(generate(sc), args.out)
    log.info("wrote %d cells to %s", sc.n_cells, args.out)
    return EXIT_OK


def cmd_fit(args):
    cfg = _config(args)
    pipeline.run_fit(pipeline.load_dataset(cfg, args.data), cfg, args.out_dir)
    return EXIT_OK


def cmd_bandwidth(args):
    cfg = _config(args)
    if args.kernel == "all":
        kernels = cfg.kernels
    else:
        kernels = (cfg.kernel(Family.parse(args.kernel)),)
    results = pipeline.run_bandwidth(pipeline.load_dataset(cfg, args.data), cfg, args.out_dir,
                                     kernels)
    for r in results:
        print(f"{r.kernel.family.value}\t{r.status}\th={r.h_opt:.6g}\titerations={len(r.iterations)}")
    return EXIT_OK if all(r.converged for r in results) else EXIT_NOT_CONVERGED


def cmd_evaluate(args):
    cfg = _config(args)
    for r in pipeline.run_evaluate(pipeline.load_dataset(cfg, args.data), cfg, args.out_dir,
                                   args.models):
        print(f"{r.model_name}\tpdf_mse={r.pdf_mse:.6g}\tccdf_gap={r.ccdf_max_abs_gap:.6g}")
    return EXIT_OK


def cmd_detect(args):
    cfg = _config(args)
    for r in pipeline.run_detect(pipeline.load_dataset(cfg, args.data), cfg, args.out_dir,
                                 args.models):
        print(f"{r.model_name}\tpfa={r.pfa_target:g}\tpfa_emp={r.pfa_empirical:.6g}"
              f"\tpd={r.pd_empirical:.6g}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "bandwidth": cmd_bandwidth,
            "evaluate": cmd_evaluate, "detect": cmd_detect}


def main(argv=None):
    level = getattr(logging, os.environ.get(LOG_ENV, "WARNING").upper(), None)
    logging.basicConfig(level=level if isinstance(level, int) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DomainError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as e:
        print(f"bandwidth search failed: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
