"""Command-line front end: ``vpme {solve,rates,spectrum,dynamics,sweep,figures}``.

Parameters start from the typical molecular set, are overridden by a
``key = value`` config file (``--config``) and then by ``--set key=value``.
Exit status is 0 only when every requested computation converged.
"""

from __future__ import annotations

import argparse
import csv
import inspect
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .correlations import BathFunctions, TruncationError
from .observables import absorption_spectrum, secular_dynamics
from .params import ParameterError, build_params, classify_regime, parse_config
from .quadrature import QuadratureError
from .rates import coherence_rates, nonres_rates, rate_rows, to_csv, to_json, vpme_rates, wcme_rates
from .recipes import FIGURES, SWEEP_AXES, SweepSpec, default_jobs, sweep
from .spectral import InfraredDivergenceError, SpectralDensity
from .variational import SolverError, solve_self_consistent

log = logging.getLogger("vpme")

TYPICAL_RAW = {"g_eV": "1e-7", "N": "1000000", "T_K": "300", "A": "0.083", "p": "3",
               "omega0_eV": "6e-3", "omega_m_eV": "2.0"}

SPECTRUM_COLUMNS = ["omega_eV", "intensity"]
TRAJECTORY_COLUMNS = ["t_inv_eV", "p_plus", "p_minus", "p_dark_total", "p_G"]


class NotConverged(RuntimeError):
    pass


def _params(args):
    raw = dict(TYPICAL_RAW)
    if args.config:
        raw.update(parse_config(Path(args.config).read_text(encoding="utf-8")))
    for item in args.set or []:
        if "=" not in item:
            raise ParameterError(f"--set expects key=value, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        raw[k] = v
    return build_params(raw)


def _solve(params):
    sd = SpectralDensity.from_params(params)
    return sd, solve_self_consistent(sd, params)


def _write(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def rows_to_csv(rows, columns=None) -> str:
    if columns is None:
        columns = []
        for r in rows:
            columns += [k for k in r if k not in columns]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: _plain(v) for k, v in r.items()})
    return buf.getvalue()


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _check_flags(flags):
    bad = sorted(f for f in flags if f.startswith(("truncation", "markovian-divergent")))
    if bad:
        raise NotConverged("; ".join(bad))


def _rate_sets(args, params):
    """(RateSet, LambShiftSet) for the requested theory."""
    if args.theory == "wcme":
        return wcme_rates(params)
    sd, sol = _solve(params)
    bath = BathFunctions.from_solution(sd, params, sol, max_order=args.max_phonons)
    if args.nonresonant or args.delta is not None:
        return nonres_rates(params, sol, bath, delta=args.delta)
    return vpme_rates(params, sol, bath)


# --------------------------------------------------------------- commands

def cmd_solve(args) -> int:
    params = _params(args)
    sd, sol = _solve(params)
    reg = classify_regime(params, sol)
    report = {"gbar": sol.gbar, "frak_b": sol.frak_b, "delta": sol.delta, "omega_r": sol.omega_r,
              "theta": sol.theta, "lambda_v": sol.lambda_v, "regime": reg.tag.value,
              "resonant": reg.resonant, "f_fbp": sol.f_fbp, "iterations": sol.iterations,
              "omega_beta": params.omega_beta, "Omega": params.Omega, "N": params.N}
    _write(json.dumps(report, indent=2) + "\n", args.output)
    return 0


def cmd_rates(args) -> int:
    params = _params(args)
    rs, ls = _rate_sets(args, params)
    rows = rate_rows(rs, ls)
    _write(to_json(rows) + "\n" if args.format == "json" else to_csv(rows), args.output)
    _check_flags(rs.flags)
    return 0


def cmd_spectrum(args) -> int:
    params = _params(args)
    rs, ls = _rate_sets(args, params)
    coh = coherence_rates(rs, ls)
    grid = None
    if args.omega_min is not None and args.omega_max is not None:
        grid = np.linspace(args.omega_min, args.omega_max, args.points)
    spec = absorption_spectrum(coh, grid, theory=rs.theory, points=args.points)
    _write(rows_to_csv([{"omega_eV": w, "intensity": a} for w, a in zip(spec.omega, spec.intensity)],
                       SPECTRUM_COLUMNS), args.output)
    print("peak,center_eV,fwhm_eV,delta_line", file=sys.stderr)
    for p in ("+", "-"):
        print(f"{p},{spec.centers[p]!r},{spec.fwhm[p]!r},{p in spec.delta_lines}", file=sys.stderr)
    print(f"area_over_pi,{spec.area / math.pi!r}", file=sys.stderr)
    _check_flags(rs.flags)
    return 0


def cmd_dynamics(args) -> int:
    params = _params(args)
    rs, ls = _rate_sets(args, params)
    coh = coherence_rates(rs, ls)
    init = {"+": 0.0, "-": 0.0, "D": 0.0, "G": 0.0}
    init[args.initial] = 1.0
    if args.initial in ("+", "-"):
        init[(args.initial, "G")] = 0.0
    t = np.linspace(0.0, args.t_max, args.points)
    traj = secular_dynamics(rs, init, t, ls, coh)
    rows = []
    for i, ti in enumerate(traj.t):
        p = traj.populations[i]
        rows.append({"t_inv_eV": ti, "p_plus": p[0], "p_minus": p[1], "p_dark_total": p[2],
                     "p_G": p[3]})
    _write(rows_to_csv(rows, TRAJECTORY_COLUMNS), args.output)
    _check_flags(rs.flags)
    return 0


def _axis(text):
    parts = text.split(":")
    if len(parts) not in (4, 5):
        raise argparse.ArgumentTypeError("axis is NAME:start:stop:points[:log|linear]")
    name = parts[0]
    if name not in SWEEP_AXES:
        raise argparse.ArgumentTypeError(f"unknown axis {name!r}; choose from {sorted(SWEEP_AXES)}")
    scale = parts[4] if len(parts) == 5 else "log"
    return name, (float(parts[1]), float(parts[2]), int(parts[3]), scale)


def cmd_sweep(args) -> int:
    base = _params(args)
    spec = SweepSpec(base, dict(args.axis), ("solve", "rates") if args.rates else ("solve",))
    rows = sweep(spec, args.jobs)
    _write(rows_to_csv(rows), args.output)
    if not all(r.get("converged") for r in rows):
        raise NotConverged("some sweep points did not converge")
    return 0


def cmd_figures(args) -> int:
    fn = FIGURES[args.name]
    accepted = inspect.signature(fn).parameters
    kw = {k: v for k, v in (("points", args.points), ("jobs", args.jobs))
          if v is not None and k in accepted}
    panels = fn(**kw)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ok = True
    for name, rows in panels.items():
        path = outdir / f"{name}.csv"
        path.write_text(rows_to_csv(rows), encoding="utf-8")
        print(path, file=sys.stderr)
        ok &= all(r.get("converged", True) for r in rows)
    if not ok:
        raise NotConverged("some figure points did not converge")
    return 0


# ----------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vpme", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, theory=False):
        p.add_argument("--config", help="key = value parameter file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("-o", "--output", help="output file (default stdout)")
        if theory:
            p.add_argument("--theory", choices=("vpme", "wcme"), default="vpme")
            p.add_argument("--max-phonons", type=int, default=None,
                           help="truncate the multi-phonon series at this order")
            p.add_argument("--nonresonant", action="store_true",
                           help="use the detuned (non-resonant) VPME forms")
            p.add_argument("--delta", type=float, default=None,
                           help="override the detuning Delta (eV); implies --nonresonant")

    p = sub.add_parser("solve", help="solve the variational self-consistency")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("rates", help="transition, dephasing rates and Lamb shifts")
    common(p, theory=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("spectrum", help="cavity absorption spectrum")
    common(p, theory=True)
    p.add_argument("--omega-min", type=float)
    p.add_argument("--omega-max", type=float)
    p.add_argument("--points", type=int, default=4001)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("dynamics", help="secular population dynamics")
    common(p, theory=True)
    p.add_argument("--initial", choices=("+", "-", "D", "G"), default="+")
    p.add_argument("--t-max", type=float, required=True, help="final time (1/eV)")
    p.add_argument("--points", type=int, default=201)
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("sweep", help="parameter sweep over one or two axes")
    common(p)
    p.add_argument("--axis", type=_axis, action="append", required=True,
                   help="NAME:start:stop:points[:log|linear]; NAME in " + ",".join(SWEEP_AXES))
    p.add_argument("--rates", action="store_true", help="include VPME rates per point")
    p.add_argument("--jobs", type=int, default=default_jobs())
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("figures", help="figure and table data as CSV")
    p.add_argument("name", choices=sorted(FIGURES))
    p.add_argument("--outdir", default=".")
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--jobs", type=int, default=default_jobs())
    p.set_defaults(func=cmd_figures)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "axis", None) and len(args.axis) > 2:
        print("error: at most two sweep axes", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, QuadratureError, TruncationError, InfraredDivergenceError) as exc:
        print(f"error: computation failed: {exc}", file=sys.stderr)
        diag = getattr(exc, "diagnostics", None)
        if diag:
            print(json.dumps(diag, indent=2, default=str), file=sys.stderr)
        return 1
    except NotConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
