"""Command-line pipelines: simulate, extract, estimate, switch, selfcheck.

Exit status is 0 on success, 2 on a usage error and 1 on a numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError

from . import __version__
from . import estimators as est
from . import extract as ext
from . import io
from . import simulate as sim
from . import switch as sw
from .core import RngStream, inv_std_normal_cdf, std_normal_cdf
from .grid import Field, Grid
from .models import (
    DiscreteShape,
    ModelSyntaxError,
    ShapeModel,
    VariogramModel,
    choose_margin,
    parse_model_string,
)

log = logging.getLogger("maxrep")


class UsageError(ValueError):
    pass


# -- argument helpers ---------------------------------------------------------


def parse_box(text: str) -> tuple[list, list]:
    """``lo:hi`` per dimension, joined by ``;``."""
    lo, hi = [], []
    for part in text.split(";"):
        bits = part.split(":")
        if len(bits) != 2:
            raise UsageError(f"bad box {text!r}, expected lo:hi per dimension")
        lo.append(float(bits[0]))
        hi.append(float(bits[1]))
    return lo, hi


def parse_points(text: str, ndim: int) -> np.ndarray:
    """Points separated by ``;``, coordinates by ``,``."""
    pts = [[float(x) for x in p.split(",")] for p in text.split(";") if p.strip()]
    arr = np.asarray(pts, float)
    if arr.ndim != 2 or arr.shape[1] != ndim:
        raise UsageError(f"points {text!r} must have {ndim} coordinate(s) each")
    return arr


def parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _grid(args) -> Grid:
    if not args.grid:
        raise UsageError("--grid is required")
    try:
        return Grid.parse(args.grid)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _t0(args, grid: Grid) -> tuple:
    if args.t0:
        p = parse_points(args.t0, grid.ndim)[0]
    else:
        p = np.zeros(grid.ndim)
    if not grid.contains(p):
        raise UsageError(f"t0 {tuple(p)} is not a grid point")
    return tuple(float(x) for x in p)


def _need_seed(args) -> int:
    if args.seed is None:
        raise UsageError("--seed is required for randomized commands")
    return int(args.seed)


def _need(args, name: str):
    v = getattr(args, name)
    if v is None:
        raise UsageError(f"--{name.replace('_', '-')} is required here")
    return v


# -- simulate -----------------------------------------------------------------


def _correlation(text: str, grid: Grid) -> np.ndarray:
    name, p = parse_model_string(text)
    if name not in ("exponential", "gaussian"):
        raise ModelSyntaxError(f"unknown correlation {name!r}", text, 0)
    return sim.correlation_matrix(name, float(p.get("scale", 1.0)), grid)


def cmd_simulate(args) -> dict:
    seed = _need_seed(args)
    model = args.model
    counters: dict = {}
    info: dict = {}
    if model == "logistic":
        q, k = float(_need(args, "q")), int(_need(args, "k"))
        grid = Grid((0.0,), (float(k),), (1.0,))
        budget = args.atom_budget or sim.DEFAULT_ATOM_BUDGET
        inc = sim.LogisticIncrements(q, k)
        run = lambda r: sim.simulate_incremental(inc, r, budget)
    else:
        grid = _grid(args)
    if model in ("m3", "mda", "m3-discrete"):
        shape = ShapeModel.parse(_need(args, "shape"), grid.ndim)
        margin = args.margin if args.margin is not None else choose_margin(shape)
        info["margin"] = margin
    if model == "m3":
        budget = args.atom_budget or 10**6
        run = lambda r: sim.simulate_m3(shape, grid, margin, r, budget, keep_events=args.events)
    elif model == "m3-discrete":
        rad = args.radius if args.radius is not None else int(math.ceil(margin))
        dshape = DiscreteShape.from_shape(shape, rad)
        budget = args.atom_budget or 10**6
        run = lambda r: sim.simulate_m3_discrete(dshape, grid, r, budget)
    elif model == "mda":
        c, eps, kappa = (float(_need(args, n)) for n in ("c", "eps", "kappa"))
        run = lambda r: sim.simulate_mda_sample(c, eps, kappa, shape, grid, margin, r)
    elif model == "brown-resnick":
        vario = VariogramModel.parse(_need(args, "variogram"))
        budget = args.atom_budget or sim.DEFAULT_ATOM_BUDGET
        inc = sim.BrownResnickIncrements(vario, grid, _t0(args, grid))
        run = lambda r: sim.simulate_incremental(inc, r, budget)
    elif model == "extremal-gaussian":
        cov = _correlation(_need(args, "correlation"), grid)
        budget = args.atom_budget or sim.DEFAULT_ATOM_BUDGET
        inc = sim.ExtremalGaussianIncrements(cov, grid)
        run = lambda r: sim.simulate_incremental(inc, r, budget)

    out = Path(args.out)
    names = []
    residual, n_approx = 0.0, 0
    for i in range(args.reps):
        res = run(RngStream(seed, i))
        if isinstance(res, sim.SimResult):
            if not res.exact:
                n_approx += 1
                residual = max(residual, res.residual)
            f = res.field
            if model == "m3" and args.events:
                recs = [ev.to_record(shape.spec()) for ev in res.events]
                ename = f"rep-{i}-events.json"
                io.write_json(out / ename, recs)
                names.append(ename)
        else:
            f = res
        name = f"rep-{i}.csv"
        io.write_field_csv(out / name, f)
        names.append(name)
    counters.update({"replicates": args.reps, "approximate": n_approx})
    if model in ("brown-resnick", "extremal-gaussian", "logistic"):
        info["atom_budget"] = budget
        info["max_residual"] = residual
    return {"outputs": names, "counters": counters, "info": info}


# -- extract ------------------------------------------------------------------


def _threshold(text: str, stats) -> tuple[float, str]:
    if text.startswith("value:"):
        return float(text[6:]), text
    try:
        pol = ext.ThresholdPolicy.parse(text)
    except ValueError as e:
        raise UsageError(str(e)) from None
    return ext.choose_threshold(stats, pol), pol.spec()


def cmd_extract(args) -> dict:
    src = Path(_need(args, "input"))
    arr, grid, man = io.read_replicates(src)
    mode = args.mode
    if mode == "increments":
        t0 = _t0(args, grid)
        a, pol = _threshold(args.threshold, arr[(slice(None),) + grid.index_of(t0)])
        ev = ext.extract_increments(arr, t0, a, grid=grid)
    elif mode == "shapes":
        if args.Q:
            qlo, qhi = parse_box(args.Q)
        else:
            qlo, qhi = sw.central_box(grid, 0.2)
        K = Grid.parse(_need(args, "K"))
        L = args.L if args.L is not None else 0.0
        stat = arr[(slice(None),) + grid.slices_for(grid.subgrid(qlo, qhi))].reshape(arr.shape[0], -1).max(axis=1)
        a, pol = _threshold(args.threshold, stat)
        ev = ext.extract_shapes(arr, (qlo, qhi), L, K, a, grid=grid)
    elif mode == "shapes-discrete":
        t0 = _t0(args, grid)
        pts = parse_points(_need(args, "points"), grid.ndim)
        a, pol = _threshold(args.threshold, arr[(slice(None),) + grid.index_of(t0)])
        ev = ext.extract_shapes_discrete(arr, t0, int(_need(args, "radius")), pts, a, grid=grid)
    names, meta = io.write_event_set(Path(args.out), ev)
    return {"inputs": [str(src)], "outputs": names,
            "counters": {"replicates": int(arr.shape[0]), "selected": len(ev), **ev.dropped},
            "info": {"events": meta, "threshold_policy": pol, "source_seed": man.seed}}


# -- estimate -----------------------------------------------------------------


def _lags(text: str, ndim: int) -> np.ndarray:
    if ndim == 1:
        return np.asarray(parse_floats(text)).reshape(-1, 1)
    return parse_points(text, ndim)


def _coord_cols(ndim: int, name: str) -> list[str]:
    return [name] if ndim == 1 else [f"{name}{j + 1}" for j in range(ndim)]


def cmd_estimate(args) -> dict:
    src = Path(_need(args, "input"))
    out = Path(args.out)
    name = args.estimator
    man = io.RunManifest.read(src)
    if name == "unit-mean":
        if "events" in man.info:
            evs = io.read_event_set(src)
            arr, grid = evs.samples, evs.grid
        else:
            arr, grid = io.read_samples(src)
        rep = est.unit_mean_diagnostic(arr, grid)
        io.write_field_csv(out / "deviation.csv", rep.deviation)
        io.write_field_csv(out / "stderr.csv", rep.stderr)
        result = {"name": "unit-mean", "max_deviation": float(rep.deviation.values.max()),
                  "flagged": int(rep.flagged.sum()), "n": rep.n}
        io.write_json(out / "result.json", result)
        return {"inputs": [str(src)], "outputs": ["deviation.csv", "stderr.csv", "result.json"],
                "counters": {"flagged": result["flagged"]}, "info": {"result": result}}

    ev = io.read_event_set(src)
    outputs = ["result.json"]
    counters: dict = {}
    if name == "logistic-mle":
        if ev.kind != "increments":
            raise UsageError(f"logistic-mle needs increment events, got {ev.kind}")
        res = est.logistic_mle(ev, tuple(parse_floats(args.q_bounds)))
        result = res.to_dict()
    elif name == "shape-ls":
        if ev.kind != "shapes":
            raise UsageError(f"shape-ls needs shape events, got {ev.kind}")
        ms = est.mean_shape(ev)
        io.write_field_csv(out / "meanshape.csv", ms)
        outputs.append("meanshape.csv")
        res = est.fit_shape_beta(ms, args.family, nu=args.nu)
        result = res.to_dict()
        pts = ms.grid.points
        curve = est.shape_curve(np.sqrt(np.sum(pts * pts, axis=1)), args.family, res.estimate, args.nu)
        io.write_table_csv(out / "shape_fit.csv", _coord_cols(ms.grid.ndim, "t") + ["mean", "fitted"],
                           [[*map(float, p), float(m), float(f)]
                            for p, m, f in zip(pts, ms.values.ravel(), curve)])
        outputs.append("shape_fit.csv")
    elif name == "variogram-theta":
        if ev.kind != "shapes":
            raise UsageError(f"variogram-theta needs shape events, got {ev.kind}")
        inner = parse_box(args.inner) if args.inner else None
        rows, table = [], []
        clamps = 0
        for h in _lags(_need(args, "lags"), ev.grid.ndim):
            v = est.variogram_from_shapes(ev, h, inner)
            clamps += int(v.clamped)
            rows.append([*map(float, h), v.theta, v.gamma, int(v.clamped)])
            table.append({"h": h.tolist(), "theta": v.theta, "gamma": v.gamma,
                          "clamped": v.clamped, "boundary": v.boundary})
        hcols = _coord_cols(ev.grid.ndim, "h")
        io.write_table_csv(out / "variogram.csv", hcols + ["theta", "gamma", "clamped"], rows)
        outputs.append("variogram.csv")
        result = {"name": "variogram-theta", "n": len(ev), "lags": table}
        counters["clamped"] = clamps
    io.write_json(out / "result.json", result)
    return {"inputs": [str(src)], "outputs": outputs, "counters": counters, "info": {"result": result}}


# -- switch -------------------------------------------------------------------


def _density(text: str, grid: Grid, margin: float) -> sw.ShiftDensity:
    name, p = parse_model_string(text)
    if name == "uniform":
        return sw.UniformShift.around(grid, float(p.get("margin", margin)))
    if name == "gaussian":
        mid = (np.asarray(grid.lo) + np.asarray(grid.hi)) / 2
        return sw.GaussianShift(mid, float(p.get("scale", 1.0)))
    raise ModelSyntaxError(f"unknown shift density {name!r}", text, 0)


def cmd_switch(args) -> dict:
    seed = _need_seed(args)
    grid = _grid(args)
    n = int(args.n)
    rng = RngStream(seed, 0)
    info: dict = {}
    counters: dict = {}
    if args.direction == "m3-to-inc":
        shape = ShapeModel.parse(_need(args, "shape"), grid.ndim)
        arr = sw.m3_to_incremental_sample(shape, grid, rng, size=n)
        fields = [Field(grid, a) for a in arr]
    elif args.direction == "m3-to-v":
        shape = ShapeModel.parse(_need(args, "shape"), grid.ndim)
        margin = args.margin if args.margin is not None else choose_margin(shape)
        dens = _density(args.density, grid, margin)
        arr = sw.m3_to_v_representation(shape, dens, grid, rng, size=n)
        fields = [Field(grid, a) for a in arr]
    else:
        vario = VariogramModel.parse(_need(args, "variogram"))
        inc = sim.BrownResnickIncrements(vario, grid, _t0(args, grid))
        K = parse_box(args.K) if args.K else None
        fit = sw.incremental_to_m3(inc, n, rng, K)
        fields = [s.profile for s in fit.samples]
        info.update({"c": fit.c, "weights": fit.weights.tolist(), "offsets": fit.offsets.spec(),
                     "tau": [list(s.tau) for s in fit.samples]})
        counters.update({"drawn": fit.n_drawn, "dropped": fit.n_dropped,
                         "drop_fraction": fit.drop_fraction, "boundary_ratio": fit.boundary_ratio})
    names = io.write_fields(Path(args.out), fields, "sample")
    counters["samples"] = len(names)
    return {"outputs": names, "counters": counters, "info": info}


# -- selfcheck ----------------------------------------------------------------


def selfcheck_lines() -> list[tuple[str, bool, str]]:
    checks = []
    x = np.linspace(-6, 6, 2001)
    err = float(np.max(np.abs(inv_std_normal_cdf(std_normal_cdf(x)) - x)))
    checks.append(("normal quantile inverts the CDF on [-6, 6]", err < 1e-6, f"max error {err:.2e}"))
    g = np.geomspace(1e-6, 25, 400)
    back = np.array([est.variogram_from_theta(t).gamma for t in est.theta_from_variogram(g)])
    err = float(np.max(np.abs(back - g)))
    checks.append(("variogram/extremal coefficient round trip", err < 1e-9, f"max error {err:.2e}"))
    v = float(est.logistic_increment_cdf(np.array([1.0]), 2.0))
    checks.append(("logistic increment CDF at s=1, q=2", abs(v - 2 ** -0.5) < 1e-15, f"{v!r}"))
    from functools import partial
    tab = sw.increment_law_from_exponent_measure(partial(sw.logistic_exponent_density, q=2.0),
                                                 np.array([0.5, 2.0]), 1)
    ref = (1 + np.array([0.5, 2.0]) ** -2.0) ** -0.5
    err = float(np.max(np.abs(tab - ref)))
    checks.append(("exponent-measure quadrature matches the closed form", err < 1e-3, f"max error {err:.2e}"))
    a = sim.simulate_logistic_vector(2.0, 2, RngStream(1, 0))
    b = sim.simulate_logistic_vector(2.0, 2, RngStream(1, 0))
    checks.append(("seeded simulation is reproducible", bool(np.array_equal(a, b)), ""))
    return checks


def cmd_selfcheck(args) -> int:
    ok = True
    for name, passed, detail in selfcheck_lines():
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}".rstrip())
    return 0 if ok else 1


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxrep", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="JSON file of option values (a run manifest also works)")
        sp.add_argument("--out", help="output directory")
        if seed:
            sp.add_argument("--seed", type=int)

    s = sub.add_parser("simulate", help="simulate replicated fields")
    common(s)
    s.add_argument("--model", choices=["m3", "m3-discrete", "mda", "brown-resnick",
                                       "extremal-gaussian", "logistic"])
    s.add_argument("--shape")
    s.add_argument("--variogram")
    s.add_argument("--correlation", help="extremal Gaussian correlation, e.g. exponential:scale=1")
    s.add_argument("--grid", help="min:max:step per dimension joined by ';'")
    s.add_argument("--margin", type=float)
    s.add_argument("--radius", type=int, help="discrete shape radius")
    s.add_argument("--t0")
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--atom-budget", type=int)
    s.add_argument("--q", type=float)
    s.add_argument("--k", type=int)
    s.add_argument("--c", type=float)
    s.add_argument("--eps", type=float)
    s.add_argument("--kappa", type=float)
    s.add_argument("--events", action="store_true", help="also write contributing storm events")
    s.set_defaults(func=cmd_simulate, randomized=True)

    e = sub.add_parser("extract", help="select single extreme events")
    common(e, seed=False)
    e.add_argument("--input")
    e.add_argument("--mode", choices=["increments", "shapes", "shapes-discrete"], default="increments")
    e.add_argument("--threshold", default="quantile:0.95",
                   help="quantile:p, power:rho or value:a")
    e.add_argument("--t0")
    e.add_argument("--Q", help="box lo:hi per dimension")
    e.add_argument("--L", type=float)
    e.add_argument("--K", help="offset window as a grid spec")
    e.add_argument("--radius", type=int)
    e.add_argument("--points")
    e.set_defaults(func=cmd_extract, randomized=False)

    m = sub.add_parser("estimate", help="estimate parameters from an event set")
    common(m, seed=False)
    m.add_argument("--input")
    m.add_argument("--estimator", choices=["logistic-mle", "shape-ls", "variogram-theta", "unit-mean"])
    m.add_argument("--q-bounds", default="1.000001,20")
    m.add_argument("--family", choices=["gaussian", "exponential", "student"], default="gaussian")
    m.add_argument("--nu", type=float)
    m.add_argument("--lags")
    m.add_argument("--inner", help="inner window box lo:hi per dimension")
    m.set_defaults(func=cmd_estimate, randomized=False)

    w = sub.add_parser("switch", help="convert between representations")
    common(w)
    w.add_argument("--direction", choices=["m3-to-inc", "m3-to-v", "inc-to-m3"])
    w.add_argument("--shape")
    w.add_argument("--variogram")
    w.add_argument("--grid")
    w.add_argument("--t0")
    w.add_argument("--n", type=int, default=1)
    w.add_argument("--density", default="uniform")
    w.add_argument("--margin", type=float)
    w.add_argument("--K", help="reference box lo:hi per dimension")
    w.set_defaults(func=cmd_switch, randomized=True)

    c = sub.add_parser("selfcheck", help="run deterministic numerical checks")
    c.set_defaults(func=None, randomized=False)
    p.commands = {"simulate": s, "extract": e, "estimate": m, "switch": w, "selfcheck": c}
    return p


_REQUIRED = {"simulate": ["model"], "extract": ["input"], "estimate": ["input", "estimator"],
             "switch": ["direction"]}
_NOT_ECHOED = {"func", "config", "out", "verbose", "randomized", "command"}


def _glue_dash_values(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Rewrite ``--grid -5:5:0.1`` as ``--grid=-5:5:0.1``.

    argparse would otherwise take a value starting with ``-`` for an option.
    """
    takes_value = set()
    for sp in parser.commands.values():
        for a in sp._actions:
            if a.option_strings and a.nargs is None:  # flags have nargs=0
                takes_value.update(a.option_strings)
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in takes_value and i + 1 < len(argv) and argv[i + 1].startswith("-") \
                and argv[i + 1] not in takes_value:
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    argv = _glue_dash_values(parser, list(sys.argv[1:] if argv is None else argv))
    args = parser.parse_args(argv)
    path = getattr(args, "config", None)
    if not path:
        return args
    cfg = io.read_json(path)
    if "config" in cfg and "command" in cfg:
        if cfg["command"] != args.command:
            raise UsageError(f"manifest is for {cfg['command']!r}, not {args.command!r}")
        cfg = cfg["config"]
    subparser = parser.commands[args.command]
    known = {a.dest for a in subparser._actions}
    unknown = set(cfg) - known
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    subparser.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as e:
        return int(e.code or 0)
    except (UsageError, OSError, json.JSONDecodeError) as e:
        print(f"maxrep: error: {e}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "selfcheck":
        return cmd_selfcheck(args)
    for name in _REQUIRED.get(args.command, []):
        if getattr(args, name) is None:
            print(f"maxrep {args.command}: error: --{name} is required", file=sys.stderr)
            return 2
    if not args.out:
        print(f"maxrep {args.command}: error: --out is required", file=sys.stderr)
        return 2
    config = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}
    t_start = time.perf_counter()
    try:
        if args.randomized:
            _need_seed(args)
        out = io.prepare_output_dir(args.out)
        res = args.func(args)
    except (UsageError, ModelSyntaxError, FileNotFoundError, FileExistsError) as e:
        print(f"maxrep {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (FloatingPointError, LinAlgError, sw.QuadratureError, ArithmeticError) as e:
        print(f"maxrep {args.command}: numerical failure: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"maxrep {args.command}: error: {e}", file=sys.stderr)
        return 2
    manifest = io.RunManifest(
        command=args.command, config=config, seed=getattr(args, "seed", None), version=__version__,
        inputs=res.get("inputs", []), outputs=res.get("outputs", []),
        counters=res.get("counters", {}), info=res.get("info", {}),
        wall_time=time.perf_counter() - t_start)
    manifest.write(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
