"""Data recipes behind the figure and table reproductions, and the sweep driver.

Every recipe returns ``{panel_name: list_of_row_dicts}``; rows within a panel
share keys and are emitted in the order of the input grid regardless of how
the worker pool schedules the points.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .correlations import BathFunctions, decoherence_exponent, phi, two_phonon_direct
from .params import PhysicalParams, classify_regime, typical_params
from .rates import vpme_transitions
from .spectral import SpectralDensity
from .variational import (SolverError, frak_b, gbar0_general, params_for_omega_r,
                          solve_self_consistent)

__all__ = ["SweepSpec", "default_jobs", "run_points", "fig3", "fig4_decomp", "fig5", "fig6",
           "tab1", "sweep", "FIGURES"]

SWEEP_AXES = {"Omega_r": "omega_r", "N": "N", "A": "A", "T": "T", "p": "p",
              "Delta_override": "delta"}


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("VPME_JOBS", "1")))
    except ValueError:
        return 1


def run_points(fn, points, jobs: int | None = None) -> list:
    """Map ``fn`` over ``points`` with at most ``jobs`` worker processes, keeping order."""
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    points = list(points)
    if jobs == 1 or len(points) < 2:
        return [fn(x) for x in points]
    with ProcessPoolExecutor(max_workers=min(jobs, len(points))) as ex:
        return list(ex.map(fn, points))


def _solve_row(params: PhysicalParams) -> dict:
    sd = SpectralDensity.from_params(params)
    try:
        sol = solve_self_consistent(sd, params)
    except SolverError as exc:
        return {"converged": False, "error": str(exc)}
    reg = classify_regime(params, sol)
    return {"converged": True, "gbar_eV": sol.gbar, "frak_b": sol.frak_b, "delta_eV": sol.delta,
            "omega_r_eV": sol.omega_r, "regime": reg.tag.value, "resonant": reg.resonant,
            "f_fbp_eV": sol.f_fbp, "iterations": sol.iterations}


# ------------------------------------------------------------------ fig3

def _fig3_point(args):
    params, = args
    row = _solve_row(params)
    row.update({"A": params.A, "N": params.N, "Omega_eV": params.Omega,
                "omega_r_over_omega_beta": row.get("omega_r_eV", math.nan) / params.omega_beta})
    return row


def fig3(points: int = 41, A_values=(0.0083, 0.083, 0.83), p: float = 3.0,
         span=(1e-2, 1e2), jobs: int | None = None) -> dict:
    """Gbar, frak_B and Delta against Omega_r/Omega_beta for several A.

    The molecule number is swept so that the bare Omega/Omega_beta covers
    ``span`` divided by the weak-coupling frak_B; the x-coordinate reported is
    the solved Omega_r/Omega_beta (which jumps where frak_B is discontinuous).
    """
    base = typical_params(p=p)
    tasks = []
    for A in A_values:
        pa = base.with_(A=A)
        b_low = frak_b(SpectralDensity.from_params(pa), 0.0, pa.beta) if A > 0 else 1.0
        ratios = np.geomspace(span[0] / b_low, span[1], points)
        for x in ratios:
            N = max(2.0, (x * pa.omega_beta / pa.g) ** 2)
            tasks.append((pa.with_(N=N),))
    rows = run_points(_fig3_point, tasks, jobs)
    for r in rows:
        r["N"] = float(r["N"])
    cols = ["A", "N", "Omega_eV", "omega_r_eV", "omega_r_over_omega_beta", "gbar_eV", "frak_b",
            "delta_eV", "regime", "converged"]
    return {"fig3": [{k: r.get(k, "") for k in cols} for r in rows]}


# ------------------------------------------------------------- fig4-decomp

def fig4_decomp(points: int = 25, span=(0.2, 10.0), params: PhysicalParams | None = None) -> dict:
    """Three-term split of the two-phonon density rho_2 against Omega_r/w0.

    The variational frame is the solved one at ``params`` (typical by default);
    the FFT value of Re Phi_2/pi is listed alongside as a cross-check.
    """
    from .correlations import phi_power_fourier

    params = params or typical_params()
    sd = SpectralDensity.from_params(params)
    sol = solve_self_consistent(sd, params)
    beta = params.beta
    grid = phi(sd, sol.gbar, beta)
    xs = np.geomspace(span[0], span[1], points)
    nus = xs * params.omega_0
    fft = phi_power_fourier(grid, [2], nus)[2]
    rows = []
    for x, nu, val in zip(xs, nus, np.atleast_1d(fft.value)):
        i1, i2, i3 = two_phonon_direct(sd, sol.gbar, beta, nu, parts=True)
        rows.append({"omega_r_over_omega0": x, "nu_eV": nu, "emit_emit": i1, "emit_absorb": i2,
                     "absorb_emit": i3, "rho2_direct": i1 + i2 + i3,
                     "rho2_fft": float(np.real(val)) / math.pi})
    return {"fig4_decomp": rows}


# ------------------------------------------------------------------ fig5

def _fig5_point(args):
    p, A, target, max_order = args
    base = typical_params(p=p, A=A)
    sd = SpectralDensity.from_params(base)
    try:
        params, sol = params_for_omega_r(sd, base, target)
    except SolverError as exc:
        return {"p": p, "A": A, "omega_r_eV": target, "converged": False, "error": str(exc)}
    bath = BathFunctions.from_solution(sd, params, sol, max_order=max_order)
    rs = vpme_transitions(params, sol, bath)
    N = params.N
    s_pm, m_pm = rs.single[("+", "-")], rs.multi[("+", "-")]
    s_pd, m_pd = (N - 1) * rs.single[("+", "d")], (N - 1) * rs.multi[("+", "d")]
    return {"p": p, "A": A, "N": N, "omega_r_eV": sol.omega_r,
            "omega_r_over_omega0": sol.omega_r / params.omega_0, "frak_b": sol.frak_b,
            "K1_pm_eV": s_pm, "Kmulti_pm_eV": m_pm, "ratio_pm": m_pm / s_pm if s_pm else math.inf,
            "K1_pd_total_eV": s_pd, "Kmulti_pd_total_eV": m_pd,
            "ratio_pd": m_pd / s_pd if s_pd else math.inf, "converged": True}


def _fig5_norm(p, A):
    """Single-phonon K_{+->-} at N = 2, the normalisation of the rate panels."""
    params = typical_params(p=p, A=A, N=2)
    sd = SpectralDensity.from_params(params)
    sol = solve_self_consistent(sd, params)
    bath = BathFunctions.from_solution(sd, params, sol, max_order=1)
    return vpme_transitions(params, sol, bath).single[("+", "-")]


def fig5(points: int = 13, p_values=(2, 3, 4), span=(0.1, 10.0), max_order: int = 3,
         jobs: int | None = None) -> dict:
    """Single versus multi-phonon K_{+->-} and (N-1) K_{+->d} against Omega_r.

    A = 0.0083 for p = 2 and 0.083 otherwise; the series is kept to
    ``max_order`` phonons. Rates are also given normalised by the
    single-phonon K_{+->-} at N = 2 of the same column.
    """
    tasks = []
    for p in p_values:
        A = 0.0083 if p == 2 else 0.083
        for x in np.geomspace(span[0], span[1], points):
            tasks.append((float(p), A, x * 6e-3, max_order))
    rows = run_points(_fig5_point, tasks, jobs)
    norms = {p: _fig5_norm(float(p), 0.0083 if p == 2 else 0.083) for p in p_values}
    out = {}
    for p in p_values:
        panel = []
        for r in rows:
            if r["p"] != p:
                continue
            for key in ("K1_pm_eV", "Kmulti_pm_eV", "K1_pd_total_eV", "Kmulti_pd_total_eV"):
                if key in r:
                    r[key.replace("_eV", "_norm")] = r[key] / norms[p]
            panel.append(r)
        out[f"fig5_p{int(p)}"] = panel
    return out


# ------------------------------------------------------------------ fig6

def _fig6_exponents(args):
    p, ts = args
    params = typical_params(p=p)
    sd = SpectralDensity.from_params(params)
    beta = params.beta
    E = [decoherence_exponent(sd, math.inf, beta, t) for t in ts]
    return E, decoherence_exponent(sd, math.inf, beta, math.inf)


def fig6(points: int = 60, p_values=(1, 2, 3, 4), t_span=(1e-2, 1e3), N_values=None,
         a: float = 8.0, jobs: int | None = None) -> dict:
    """D_{1,1}(t) against t/tau_beta and D_{a,N}(inf) against N with G = 0.

    tau_beta = beta/pi. For p <= 2 the plateau exponent diverges and
    D_{a,N}(inf) = 0 for every N.
    """
    beta = typical_params().beta
    tau_b = beta / math.pi
    xs = np.geomspace(t_span[0], t_span[1], points)
    ts = xs * tau_b
    N_values = np.geomspace(1, 1e4, 41) if N_values is None else np.asarray(N_values, float)
    res = run_points(_fig6_exponents, [(float(p), ts) for p in p_values], jobs)
    a_rows, b_rows = [], []
    for p, (E, Einf) in zip(p_values, res):
        for x, t, e in zip(xs, ts, E):
            a_rows.append({"p": p, "t_over_tau_beta": x, "t_inv_eV": t, "exponent": e,
                           "D_1_1": math.exp(-e)})
        for N in N_values:
            d = 0.0 if math.isinf(Einf) else math.exp(-Einf / (a * N))
            b_rows.append({"p": p, "a": a, "N": N, "plateau_exponent": Einf, "D_inf": d})
    return {"fig6a": a_rows, "fig6b": b_rows}


# ------------------------------------------------------------------ tab1

def _tab1_point(args):
    params, = args
    row = _solve_row(params)
    row.update({"T_K": params.T, "omega0_eV": params.omega_0, "N": params.N,
                "omega_beta_eV": params.omega_beta})
    if row["converged"]:
        R, dl = row["omega_r_eV"], row["delta_eV"]
        g_r = params.g * row["frak_b"]
        if row["regime"] == "HighT_StrongLM":
            law, val = "Omega_r", R if row["resonant"] else math.hypot(dl, 2 * R) / 2
        elif row["regime"] == "HighT_WeakLM":
            law, val = "Gbar0", gbar0_general(dl, g_r, params.beta)
        else:
            law, val = "none", math.nan
        row.update({"gbar_law": law, "gbar_law_eV": val})
    return row


def tab1(T_values=(5.0, 77.0, 300.0), omega0_values=(6e-3, 50e-3), N_values=(1e6, 1e12, 1e18),
         jobs: int | None = None) -> dict:
    """Regime classification and the matching Gbar scaling law over a parameter grid."""
    tasks = [(typical_params(T=T, omega_0=w0, N=N),)
             for T in T_values for w0 in omega0_values for N in N_values]
    rows = run_points(_tab1_point, tasks, jobs)
    cols = ["T_K", "omega0_eV", "N", "omega_beta_eV", "omega_r_eV", "gbar_eV", "frak_b",
            "delta_eV", "regime", "resonant", "gbar_law", "gbar_law_eV", "converged"]
    return {"tab1": [{k: r.get(k, "") for k in cols} for r in rows]}


FIGURES = {"fig3": fig3, "fig4-decomp": fig4_decomp, "fig5": fig5, "fig6": fig6, "tab1": tab1}


# ----------------------------------------------------------------- sweeps

@dataclass
class SweepSpec:
    """One or two sweep axes over a base parameter set.

    ``axes`` maps an axis name from SWEEP_AXES to a (start, stop, points, scale)
    tuple with scale 'log' or 'linear'.
    """

    base: PhysicalParams
    axes: dict = field(default_factory=dict)
    outputs: tuple = ("solve",)

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 2:
            raise ValueError("a sweep needs one or two axes")
        for name, (lo, hi, n, scale) in self.axes.items():
            if name not in SWEEP_AXES:
                raise ValueError(f"unknown sweep axis {name!r}")
            if scale not in ("log", "linear"):
                raise ValueError(f"scale must be log or linear, got {scale!r}")
            if int(n) < 1:
                raise ValueError("a sweep axis needs at least one point")
            if name != "Delta_override" and (lo <= 0 or hi <= 0):
                raise ValueError(f"sweep bounds for {name} must be positive")
            if scale == "log" and (lo <= 0 or hi <= 0):
                raise ValueError("log sweeps need positive bounds")

    def values(self, name) -> np.ndarray:
        lo, hi, n, scale = self.axes[name]
        return np.geomspace(lo, hi, int(n)) if scale == "log" else np.linspace(lo, hi, int(n))

    def points(self) -> list[dict]:
        names = list(self.axes)
        grids = np.meshgrid(*[self.values(n) for n in names], indexing="ij")
        return [dict(zip(names, vals)) for vals in zip(*[g.ravel() for g in grids])]


def _sweep_point(args):
    from .rates import nonres_rates, vpme_rates

    base, point, outputs = args
    changes = {SWEEP_AXES[k]: float(v) for k, v in point.items()
               if k not in ("Omega_r", "Delta_override")}
    params = base.with_(**changes)
    sd = SpectralDensity.from_params(params)
    row = {k: float(v) for k, v in point.items()}
    try:
        if "Omega_r" in point:
            params, sol = params_for_omega_r(sd, params, float(point["Omega_r"]))
        else:
            sol = solve_self_consistent(sd, params)
    except SolverError as exc:
        row.update({"converged": False, "error": str(exc)})
        return row
    reg = classify_regime(params, sol)
    row.update({"N_used": params.N, "gbar_eV": sol.gbar, "frak_b": sol.frak_b,
                "delta_eV": sol.delta, "omega_r_eV": sol.omega_r, "regime": reg.tag.value,
                "converged": True})
    if "rates" in outputs:
        if "Delta_override" in point:
            rs, ls = nonres_rates(params, sol, delta=float(point["Delta_override"]))
        else:
            rs, ls = vpme_rates(params, sol)
        for (a, b), v in sorted(rs.transitions.items()):
            row[f"K_{a}{b}_eV"] = v
        for (a, b), v in sorted(rs.dephasing.items()):
            row[f"Kphi_{a}{b}_eV"] = v
        for a, v in ls.shifts.items():
            row[f"Lamb_{a}_eV"] = v
        row["converged"] = not any(f.startswith("truncation") for f in rs.flags)
    return row


def sweep(spec: SweepSpec, jobs: int | None = None) -> list[dict]:
    """Evaluate every grid point of ``spec`` (solve, and rates when requested)."""
    tasks = [(spec.base, pt, tuple(spec.outputs)) for pt in spec.points()]
    return run_points(_sweep_point, tasks, jobs)
