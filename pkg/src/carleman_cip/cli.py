"""Command line: simulate data, invert it, process experimental traces and
reproduce the numerical tests.

Every subcommand reads an optional INI config (``--config``) and accepts
``--set section.key=value`` overrides; dedicated flags win over both.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .carleman import InversionError, run_algorithm, supported_extent
from .config import ConfigError, RunConfig, load_config, to_ini
from .model import CoefficientProfile, make_true_profile
from .pipeline import differentiate, experimental_data, simulate_data
from .preprocess import TimeSeries, relative_dielectric

log = logging.getLogger("carleman_cip")

CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"


def _fmt(v: float) -> str:
    return io.FMT % v


def _true_profile(cfg: RunConfig) -> CoefficientProfile:
    if cfg.test is not None:
        return make_true_profile(cfg.test, cfg.forward_grid(), cfg.cmax)
    if cfg.profile is not None:
        return io.read_profile(cfg.profile, "c", cfg.cmax)
    raise ConfigError("[problem] test: set a test id or a profile file")


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def do_simulate(cfg: RunConfig):
    out = _outdir(cfg)
    c = _true_profile(cfg)
    data = simulate_data(c, cfg.forward_grid(), cfg.eps, cfg.delta, cfg.seed, cfg.reg, cfg.t_window)
    io.write_boundary_data(out, data)
    io.write_profile(out / "c_true.csv", c)
    print(f"wrote g0.csv, g1.csv, c_true.csv to {out} ({len(data.times)} samples, noise {cfg.delta:g}, seed {cfg.seed})")
    return data


def do_invert(cfg: RunConfig, data, c_true: CoefficientProfile | None = None, timing: bool = False):
    out = _outdir(cfg)
    if data.g1 is None:
        data = differentiate(data, cfg.reg)
    grid = cfg.inversion_grid(eps=data.eps)

    def progress(r):
        err = "" if np.isnan(r.consec_err) else f", consecutive error {r.consec_err:.3g}"
        cm, xm = r.c.max()
        print(f"  iteration {r.n}: max c = {cm:.4f} at x = {xm:.4f}{err} ({r.seconds:.1f} s)", flush=True)

    t0 = time.perf_counter()
    trace = run_algorithm(
        data, cfg.params(), grid, cfg.solver, cfg.tol, cfg.clamp, cfg.cmax, cfg.solver_options(), progress
    )
    wall = time.perf_counter() - t0

    io.write_profile(out / "c_comp.csv", trace.c_comp)
    io.write_trace(out / "trace.csv", trace, seconds=timing)
    prof = out / "iterations"
    prof.mkdir(exist_ok=True)
    for r in trace.records:
        io.write_profile(prof / f"c_{r.n:02d}.csv", r.c, "c_n")

    cm, xm = trace.c_comp.max()
    print(f"max c_comp = {_fmt(cm)} at x = {_fmt(xm)}")
    status = "converged" if trace.converged else "iteration cap reached"
    print(f"iterations: {trace.iterations} ({status}, tol {cfg.tol:g})")
    horizon = supported_extent(trace.c_comp, grid.T)
    if horizon < grid.xmax:
        print(f"data constrain c only up to x = {horizon:.3f} (round trip time exceeds T beyond)")
    if c_true is not None:
        ct = c_true.at(trace.c_comp.x)
        tm, tx = float(ct.max()), float(trace.c_comp.x[np.argmax(ct)])
        print(f"true max = {_fmt(tm)} at x = {_fmt(tx)}; relative error of max {abs(cm - tm) / tm:.2%}")
    print(f"wall time: {wall:.1f} s")
    return trace


def cmd_simulate(args, cfg):
    do_simulate(cfg)


def cmd_invert(args, cfg):
    data = io.read_boundary_data(args.g0, args.g1)
    c_true = io.read_profile(args.truth, "c", cfg.cmax) if args.truth else None
    do_invert(cfg, data, c_true, args.timing)


def cmd_experiment(args, cfg):
    if cfg.domain is None:
        raise ConfigError("[experiment] domain: the target interval D is required (lo,hi)")
    ctx = cfg.target_context()
    raw = io.read_csv(args.raw, ["t", "value"])
    try:
        series = TimeSeries(raw["t"], raw["value"])
    except ValueError as exc:
        raise io.ParseError(f"{args.raw}: {exc}") from None
    try:
        data, side = experimental_data(series, cfg.medium, cfg.window, cfg.baseline, cfg.envelope, cfg.reg)
    except ValueError as exc:
        raise RuntimeError(f"preprocessing failed: {exc}") from None
    if side is not None:
        msg = f"{side.value} envelope"
        log.info(msg)
        print(f"using the {msg}")
    out = _outdir(cfg)
    io.write_boundary_data(out, data)
    trace = do_invert(cfg, data, timing=args.timing)
    c_rel, c_comp = relative_dielectric(trace.c_comp, ctx)
    io.write_profile(out / "c_rel.csv", c_rel, "c_rel")
    if isinstance(c_comp, tuple):
        value = f"[{c_comp[0]:.2f}, {c_comp[1]:.2f}]"
    else:
        value = f"{c_comp:.2f}"
    rel = c_rel.values.max() if c_rel.values.max() > 1 else c_rel.values.min()
    lines = [
        f"medium: {cfg.medium}",
        f"envelope: {side.value if side else 'none'}",
        f"target domain: [{ctx.domain[0]:g}, {ctx.domain[1]:g}]",
        f"c_bckgr: {cfg.c_bckgr[0]:g}" if len(cfg.c_bckgr) == 1 else f"c_bckgr: [{cfg.c_bckgr[0]:g}, {cfg.c_bckgr[1]:g}]",
        f"computed c_rel: {rel:.2f}",
        f"computed c_target: {value}",
    ]
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))


def cmd_reproduce(args, cfg):
    out = _outdir(cfg)
    (out / "config.ini").write_text(to_ini(cfg))
    data = do_simulate(cfg)
    do_invert(cfg, data, _true_profile(cfg), args.timing)


def _overrides(args) -> dict:
    ov = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        k, v = item.split("=", 1)
        ov[k.strip()] = v.strip()
    for flag, key in (
        ("test", "problem.test"),
        ("profile", "problem.profile"),
        ("noise", "noise.delta"),
        ("seed", "noise.seed"),
        ("solver", "solver.solver"),
        ("out", "output.output"),
        ("medium", "experiment.medium"),
        ("c_bckgr", "experiment.c_bckgr"),
        ("domain", "experiment.domain"),
    ):
        v = getattr(args, flag, None)
        if v is not None:
            ov[key] = str(v)
    return ov


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI file with run settings")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override one setting (repeatable)")
    common.add_argument("--out", help="output directory (overrides config and $CIP_OUTPUT_DIR)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging")

    inv = argparse.ArgumentParser(add_help=False)
    inv.add_argument("--solver", choices=["direct", "gd", "gp"], help="minimizer for each quadratic step")
    inv.add_argument("--timing", action="store_true", help="add a seconds column to trace.csv")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--noise", type=float, help="multiplicative noise level delta")
    sim.add_argument("--seed", type=int, help="noise seed")

    p = argparse.ArgumentParser(prog="carleman-cip", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common, sim], help="forward solve and boundary data")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--test", type=int, choices=[1, 2, 3, 4])
    g.add_argument("--profile", help="CSV with columns x,c")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("invert", parents=[common, inv], help="reconstruct c from g0 (and g1)")
    s.add_argument("--g0", required=True, type=Path, help="CSV with columns t,g0")
    s.add_argument("--g1", type=Path, help="CSV with columns t,g1 (computed from g0 if omitted)")
    s.add_argument("--truth", type=Path, help="CSV x,c of the true profile, for error reporting")
    s.set_defaults(func=cmd_invert)

    s = sub.add_parser("experiment", parents=[common, inv], help="process a raw trace and estimate the target constant")
    s.add_argument("--raw", required=True, type=Path, help="CSV with columns t,value")
    s.add_argument("--medium", choices=["air", "ground"])
    s.add_argument("--c-bckgr", dest="c_bckgr", help="background constant, number or lo,hi")
    s.add_argument("--domain", help="target interval D as lo,hi")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("reproduce", parents=[common, inv, sim], help="simulate and invert a numerical test")
    s.add_argument("--test", type=int, choices=[1, 2, 3, 4], required=True)
    s.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = args.config
        if config is None and args.command == "reproduce":
            default = CONFIG_DIR / f"test{args.test}.ini"
            config = default if default.exists() else None
        cfg = load_config(config, _overrides(args))
        args.func(args, cfg)
    except (ConfigError, io.ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InversionError as exc:
        print(f"error: inversion failed at {exc}", file=sys.stderr)
        return 1
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
