"""Command-line interface.

Subcommands: shapes, profile, landscape, rabi, analyze, fit, validate.
Artifacts go to ``--outdir``, else ``$FINITEPULSE_OUTPUT_DIR``, else the
working directory. Exit status: 0 on success, 2 when validation fails,
1 on usage or numeric errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import analysis as an
from . import plotting
from .errors import FinitePulseError
from .fitting import UNIT_FACTORS, FitConfig, fit, ingest_csv
from .shapes import ShapeKind, area, calibrate_area, catalog, diagnose, make_shape, write_csv
from .split_model import SplitMode

OUTPUT_ENV = "FINITEPULSE_OUTPUT_DIR"
DEFAULT_SEED = 0

_TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9, "ps": 1e-12}
_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Prints help and exits 1 on usage errors."""

    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(1, f"\n{self.prog}: error: {message}\n")


# ------------------------------------------------------------------ parsing

def parse_duration(text: str) -> float:
    """'42.67ns' -> 4.267e-08 seconds; a bare number is taken as seconds."""
    m = re.fullmatch(rf"\s*({_NUM})\s*([a-zµ]*)\s*", text)
    if not m or m.group(2) not in ("", *_TIME_UNITS):
        raise UsageError(f"cannot parse duration {text!r}; use e.g. 42.67ns or 1e-8s")
    return float(m.group(1)) * _TIME_UNITS.get(m.group(2), 1.0)


def parse_area(text: str) -> float:
    """'pi', '3pi', '3*pi/2', 'pi/2' or a plain number, in radians."""
    t = text.replace(" ", "").lower()
    m = re.fullmatch(rf"({_NUM})?\*?(pi)?(?:/({_NUM}))?", t)
    if not t or not m or (m.group(1) is None and m.group(2) is None):
        raise UsageError(f"cannot parse area {text!r}")
    val = float(m.group(1)) if m.group(1) is not None else 1.0
    if m.group(2):
        val *= math.pi
    if m.group(3):
        val /= float(m.group(3))
    return val


def parse_grid(text: str) -> np.ndarray:
    """'min:max:count' -> linspace."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must be min:max:count, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"grid must be min:max:count, got {text!r}") from None
    if n < 1 or (n > 1 and not hi > lo):
        raise UsageError("grid needs count >= 1 and max > min")
    return np.linspace(lo, hi, n)


def parse_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


# ------------------------------------------------------------------ helpers

def _outdir(args) -> Path:
    d = Path(args.outdir or os.environ.get(OUTPUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _out(args, default_name: str) -> Path:
    if getattr(args, "output", None):
        p = Path(args.output)
        if not p.is_absolute() and args.outdir:
            p = _outdir(args) / p
        p.parent.mkdir(parents=True, exist_ok=True)
        return p
    return _outdir(args) / default_name


def _shape_from(args):
    T = parse_duration(args.duration)
    tau = parse_duration(args.tau) if args.tau else T
    sh = make_shape(args.shape, tau, T)
    if args.omega0 is not None:
        if args.omega_units is None:
            raise UsageError("--omega0 needs an explicit --omega-units (rad_per_s, hz or mhz)")
        return sh.with_omega0(args.omega0 * UNIT_FACTORS[args.omega_units])
    return calibrate_area(sh, parse_area(args.area))


def _detunings(args, T: float, grid_text: str) -> np.ndarray:
    g = parse_grid(grid_text)
    return g if args.grid_units == "rad_per_s" else g / T


def _echo(args, text: str):
    if not args.quiet:
        print(text)


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, default=_jsonable))
    return path


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _pulse_meta(sh) -> dict:
    return {"shape": sh.kind.value, "tau_s": sh.tau, "duration_s": sh.duration,
            "omega0_rad_per_s": sh.omega0, "area_rad": area(sh)}


# ------------------------------------------------------------------ commands

def cmd_shapes(args) -> int:
    if args.action == "list":
        for name, formula in catalog():
            print(f"{name:12s} {formula}")
        return 0
    sh = _shape_from(args)
    if args.action == "sample":
        path = write_csv(sh, _out(args, f"shape_{sh.kind.value}.csv"), args.samples)
        _echo(args, str(path))
        if args.plot:
            t, om = sh.sample(args.samples)
            plotting.line_plot(path.with_suffix(".svg"), [(t / sh.duration, om * sh.duration, sh.kind.value)],
                               title=f"{sh.kind.value} envelope", xlabel="t / T", ylabel="Omega T")
        return 0
    dg = diagnose(sh)
    info = {"schema_version": an.SCHEMA_VERSION, **_pulse_meta(sh), "slope_at_start_per_s": dg.slope_at_start,
            "endpoint_ratio": dg.endpoint_ratio, "linearity_ratio": dg.linearity_ratio,
            "inflection_offsets_s": list(dg.inflection_offsets), "cusp_detected": dg.cusp_detected,
            "cusp_jump": dg.cusp_jump}
    print(json.dumps(info, indent=2, default=_jsonable))
    return 0


def cmd_profile(args) -> int:
    sh = _shape_from(args)
    d = _detunings(args, sh.duration, args.grid)
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    lam = None if args.lam is None else args.lam * sh.duration
    profiles = {}
    for m in methods:
        try:
            an.Method(m)
        except ValueError:
            raise UsageError(f"unknown method {m!r}; choose from {[x.value for x in an.Method]}") from None
        profiles[m] = an.detuning_profile(sh, d, m, lam=lam, mode=args.mode, tol=args.tol)
    path = _out(args, "profile.csv")
    an.write_columns(path, d, {f"probability_{m}": p.probabilities for m, p in profiles.items()})
    meta = {"schema_version": an.SCHEMA_VERSION, **_pulse_meta(sh),
            "grid": {"text": args.grid, "units": args.grid_units, "count": int(d.size)},
            "columns": ["detuning_rad_per_s", *(f"probability_{m}" for m in profiles)],
            "methods": {m: p.metadata() for m, p in profiles.items()}}
    _write_json(path.with_suffix(".json"), meta)
    _echo(args, str(path))
    if args.plot:
        plotting.line_plot(path.with_suffix(".svg"),
                           [(d * sh.duration, p.probabilities, m) for m, p in profiles.items()],
                           title=f"{sh.kind.value}, area {area(sh) / math.pi:.3g} pi",
                           xlabel="Delta T", ylabel="P", ylog=args.log)
    return 0


def cmd_landscape(args) -> int:
    sh = _shape_from(args)
    T = sh.duration
    om = parse_grid(args.omega0_grid) / T
    d = _detunings(args, T, args.grid)
    land = an.landscape(sh, om, d, args.method, tol=args.tol)
    path = _out(args, "landscape.csv")
    with path.open("w") as fh:
        fh.write("omega0_rad_per_s,detuning_rad_per_s,probability\n")
        for o, row in zip(om, land.probabilities):
            for di, p in zip(d, row):
                fh.write(f"{o!r},{float(di)!r},{float(p)!r}\n")
    try:
        expo = an.broadening_exponent(land)
    except (FinitePulseError, ValueError):
        expo = None
    meta = {"schema_version": an.SCHEMA_VERSION, **_pulse_meta(sh), "method": land.method.value,
            "omega0_grid": args.omega0_grid, "detuning_grid": args.grid, "grid_units": args.grid_units,
            "ridges": [{"omega0_rad_per_s": r.omega0, "area_rad": r.area, "probability": r.probability}
                       for r in land.ridges],
            "crossing_broadening_exponent": expo}
    _write_json(path.with_suffix(".json"), meta)
    _echo(args, str(path))
    if args.plot:
        plotting.heatmap(path.with_suffix(".svg"), d * T, om * T, land.probabilities,
                         title=f"{sh.kind.value} excitation landscape", xlabel="Delta T", ylabel="Omega0 T")
    return 0


def cmd_rabi(args) -> int:
    base = _shape_from(args)
    T = base.duration
    om = parse_grid(args.omega0_grid) / T
    dts = parse_list(args.detunings)
    d = np.asarray(dts) / T if args.grid_units == "dt" else np.asarray(dts)
    land = an.landscape(base, om, d, args.method, tol=args.tol)
    cols = {}
    for j, dt in enumerate(dts):
        cols[f"probability_dt_{dt:g}" if args.grid_units == "dt" else f"probability_{dt:g}"] = land.probabilities[:, j]
    path = _out(args, "rabi.csv")
    with path.open("w") as fh:
        fh.write(",".join(["omega0_rad_per_s", "area_rad", *cols]) + "\n")
        unit_area = area(base.with_omega0(1.0))
        for i, o in enumerate(om):
            fh.write(",".join([repr(float(o)), repr(float(o * unit_area)),
                               *(repr(float(c[i])) for c in cols.values())]) + "\n")
    _write_json(path.with_suffix(".json"), {"schema_version": an.SCHEMA_VERSION, **_pulse_meta(base),
                                            "method": args.method, "detunings": dts,
                                            "detuning_units": args.grid_units, "omega0_grid": args.omega0_grid})
    _echo(args, str(path))
    if args.plot:
        plotting.line_plot(path.with_suffix(".svg"), [(om * T, c, k) for k, c in cols.items()],
                           title=f"{base.kind.value} Rabi oscillations", xlabel="Omega0 T", ylabel="P")
    return 0


def cmd_analyze(args) -> int:
    sh = _shape_from(args)
    if args.input:
        data = ingest_csv(args.input, args.units, args.column)
        prof = an.Profile(an.Method(args.method), data[:, 0], np.clip(data[:, 1], 0, 1), sh)
    else:
        prof = an.detuning_profile(sh, _detunings(args, sh.duration, args.grid), args.method, tol=args.tol)
    out = {"schema_version": an.SCHEMA_VERSION, **_pulse_meta(sh), "method": prof.method.value}
    wr = tuple(parse_list(args.wing_range)) if args.wing_range else None
    if wr is not None and args.grid_units == "dt":
        wr = (wr[0] / sh.duration, wr[1] / sh.duration)
    try:
        feats = an.extract_features(prof, refine=args.refine, wing_range=wr)
        out.update(half_width_rad_per_s=feats.half_width,
                   satellites=[{"detuning_rad_per_s": x, "probability": p} for x, p in feats.satellites],
                   wing_exponent=feats.wing_exponent)
    except FinitePulseError as exc:
        out["features_error"] = f"{type(exc).__name__}: {exc}"
    dh = an.delta_half_solve()
    out["delta_half"] = {"root": dh.root, "coefficient": dh.coefficient,
                         "claimed": dh.claimed, "claimed_coefficient": dh.claimed_coefficient}
    path = _write_json(_out(args, "analysis.json"), out)
    _echo(args, json.dumps(out, indent=2, default=_jsonable))
    _echo(args, str(path))
    return 0


def cmd_fit(args) -> int:
    sh = _shape_from(args)
    data = ingest_csv(args.input, args.units, args.column)
    cfg = FitConfig(method=args.method, mode=None if args.mode is None else SplitMode(args.mode),
                    fit_lambda=args.lam is None, lam=None if args.lam is None else args.lam * sh.duration,
                    free_omega_scale=args.free_omega_scale, restarts=args.restarts, seed=args.seed,
                    enforce_range=not args.no_range_penalty)
    res = fit(data, args.method, cfg, shape=sh)
    path = _out(args, "fit.json")
    res.to_json(path)
    m = res.model
    _echo(args, f"method={m.method.value} eps1={m.eps1:.6g} eps2={m.eps2:.6g} "
                f"offset={m.resonance_offset:.6g} rad/s mae={res.mae:.6g} sdrf={res.sdrf}")
    _echo(args, str(path))
    if args.plot:
        d = data[:, 0]
        fine = np.linspace(d[0], d[-1], 600)
        plotting.line_plot(path.with_suffix(".svg"), [(d * sh.duration, data[:, 1], "data"),
                                                      (fine * sh.duration, m.predict(fine), "fit")],
                           title=f"{m.method.value} fit", xlabel="Delta T", ylabel="P")
    return 0


def cmd_validate(args) -> int:
    from . import validation

    results = validation.run_all(seed=args.seed, echo=None if args.quiet else print)
    ok = all(r.passed for r in results)
    report = {"schema_version": an.SCHEMA_VERSION, "seed": args.seed, "passed": ok,
              "criteria": [r.to_dict() for r in results]}
    path = _write_json(_out(args, "validation.json"), report)
    _echo(args, f"{sum(r.passed for r in results)}/{len(results)} criteria passed; report: {path}")
    return 0 if ok else 2


# ------------------------------------------------------------------ parser

def _pulse_options(p):
    g = p.add_argument_group("pulse")
    g.add_argument("--shape", default="sine", choices=[k.value for k in ShapeKind])
    g.add_argument("--duration", default="1s", help="pulse length T, e.g. 42.67ns (default 1s)")
    g.add_argument("--tau", default=None, help="raw width tau (default T)")
    g.add_argument("--area", default="pi", help="pulse area, e.g. pi, 3pi, pi/2 (default pi)")
    g.add_argument("--omega0", type=float, default=None, help="peak Rabi frequency; overrides --area")
    g.add_argument("--omega-units", choices=sorted(UNIT_FACTORS), default=None,
                   help="units of --omega0 (required with it); hz and mhz are cyclic")


def _grid_options(p, default):
    p.add_argument("--grid", default=default, help=f"detuning grid min:max:count (default {default})")
    p.add_argument("--grid-units", choices=("dt", "rad_per_s"), default="dt",
                   help="dt: grid values are Delta T (default); rad_per_s: absolute")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--outdir", default=None, help=f"output directory (default ${OUTPUT_ENV} or .)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for randomized steps (default 0)")
    common.add_argument("--quiet", action="store_true")

    parser = _Parser(prog="finitepulse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("shapes", parents=[common], help="list, sample or diagnose pulse shapes")
    p.add_argument("action", choices=("list", "sample", "diagnose"))
    _pulse_options(p)
    p.add_argument("--samples", type=int, default=201)
    p.add_argument("--output")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_shapes)

    methods = [m.value for m in an.Method]
    p = sub.add_parser("profile", parents=[common], help="transition probability against detuning")
    _pulse_options(p)
    _grid_options(p, "-30:30:501")
    p.add_argument("--method", default="exact", help=f"comma-separated subset of {methods}")
    p.add_argument("--lam", type=float, default=None, help="split matching point in units of T (default 0.25)")
    p.add_argument("--mode", choices=[m.value for m in SplitMode], default=None)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--output")
    p.add_argument("--plot", action="store_true")
    p.add_argument("--log", action="store_true", help="log-scale probability axis in the plot")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("landscape", parents=[common], help="probability over peak Rabi frequency and detuning")
    _pulse_options(p)
    _grid_options(p, "-30:30:121")
    p.add_argument("--omega0-grid", default="1:60:60", help="Omega0 T grid min:max:count")
    p.add_argument("--method", default="exact", choices=methods)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--output")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("rabi", parents=[common], help="off-resonant Rabi oscillations against Omega0")
    _pulse_options(p)
    p.add_argument("--detunings", default="0,5,10", help="comma-separated detunings (default Delta T = 0,5,10)")
    p.add_argument("--grid-units", choices=("dt", "rad_per_s"), default="dt")
    p.add_argument("--omega0-grid", default="0:40:201", help="Omega0 T grid min:max:count")
    p.add_argument("--method", default="exact", choices=methods)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--output")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_rabi)

    p = sub.add_parser("analyze", parents=[common], help="half-width, satellites and wing exponent")
    _pulse_options(p)
    _grid_options(p, "0:300:601")
    p.add_argument("--method", default="exact", choices=methods)
    p.add_argument("--input", help="analyze a CSV profile instead of computing one")
    p.add_argument("--units", choices=sorted(UNIT_FACTORS), default="rad_per_s", help="detuning units of --input")
    p.add_argument("--column", default=None)
    p.add_argument("--wing-range", default="30,300", help="wing fit range lo,hi in grid units")
    p.add_argument("--refine", type=int, default=0, help="satellites to refine per side")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--output")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", parents=[common], help="fit a measured or synthetic profile")
    _pulse_options(p)
    p.add_argument("--input", required=True)
    p.add_argument("--units", required=True, choices=sorted(UNIT_FACTORS), help="detuning units of the input")
    p.add_argument("--column", default=None, help="probability column (default: first probability*)")
    p.add_argument("--method", default="integrated", choices=("integrated", "split"))
    p.add_argument("--mode", choices=[m.value for m in SplitMode], default=None)
    p.add_argument("--lam", type=float, default=None, help="fix the split matching point (units of T)")
    p.add_argument("--free-omega-scale", action="store_true")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--no-range-penalty", action="store_true",
                   help="drop the penalty keeping eps1 +/- eps2 near [0, 1]")
    p.add_argument("--output")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("validate", parents=[common], help="run the acceptance suite")
    p.add_argument("--output")
    p.set_defaults(func=cmd_validate)
    return parser


_VALUE_FLAGS = ("--grid", "--omega0-grid", "--detunings", "--wing-range")


def _join_negative_values(argv: list[str]) -> list[str]:
    # argparse takes "-30:30:501" for an option, so glue such values to their flag
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_negative_values(list(sys.argv[1:] if argv is None else argv)))
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"finitepulse {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (FinitePulseError, ValueError, KeyError, OSError) as exc:
        print(f"finitepulse {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
