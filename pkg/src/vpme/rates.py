"""Transition, loss and dephasing rates, Lamb shifts and coherence decay
constants for the weak-coupling (WCME) and variational polaron (VPME)
master equations.

Rates are per state: ``transitions[('+', 'd')]`` is the rate into one dark
state; ``dark_total`` multiplies by the N - 1 dark states. Energies are
absolute (eV), with the ground state at 0.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace

from .correlations import BathFunctions, ZeroStatus
from .spectral import SpectralDensity, moment_bj, reorganization_energy

__all__ = [
    "RateSet", "LambShiftSet", "CoherenceRate", "wcme_rates", "vpme_transitions",
    "vpme_dephasing", "vpme_lamb", "vpme_rates", "nonres_rates", "coherence_rates",
    "closed_form_coefficients", "lamb_asymptote", "RATE_COLUMNS",
]

STATES = ("+", "-", "d", "G")


@dataclass
class RateSet:
    theory: str
    N: float
    delta: float
    transitions: dict
    single: dict
    multi: dict
    loss: dict
    dephasing: dict
    energies: dict
    flags: set = field(default_factory=set)
    meta: dict = field(default_factory=dict)

    def K(self, mu, alpha) -> float:
        return self.transitions.get((mu, alpha), 0.0)

    def dark_total(self, mu) -> float:
        """Rate from mu into the whole dark manifold."""
        return (self.N - 1) * self.K(mu, "d")

    def phi(self, mu, nu) -> float:
        if mu == nu and mu != "d":
            return 0.0
        if (mu, nu) in self.dephasing:
            return self.dephasing[(mu, nu)]
        return self.dephasing.get((nu, mu), 0.0)

    def merged(self, dephasing: "RateSet") -> "RateSet":
        out = replace(self, dephasing=dict(dephasing.dephasing))
        out.flags = set(self.flags) | set(dephasing.flags)
        out.meta = {**self.meta, **dephasing.meta}
        return out


@dataclass
class LambShiftSet:
    shifts: dict
    transition: dict
    virtual: dict
    energies: dict
    parts: dict = field(default_factory=dict)

    def shifted(self, mu) -> float:
        return self.energies[mu] + self.shifts.get(mu, 0.0)

    def delta(self, mu, nu) -> float:
        """Lamb-shifted transition frequency Delta_{mu nu}."""
        return self.shifted(mu) - self.shifted(nu)


@dataclass
class CoherenceRate:
    """R_{mu nu} = (K_mu + K_nu)/2 + K^phi_{mu nu} + i Delta_{mu nu}."""

    values: dict

    def __getitem__(self, key) -> complex:
        return self.values[key]


def _zero(z, coeff, flags, where):
    """Apply the zero-frequency tri-state: drop, include, or flag a divergence."""
    if z.status is ZeroStatus.ZERO:
        return 0.0
    if z.status is ZeroStatus.DIVERGENT:
        flags.add(f"markovian-divergent:{where}")
        return math.inf
    return coeff * z.value


def _sd(params) -> SpectralDensity:
    return SpectralDensity.from_params(params)


def _energies(omega_c, e_plus, e_minus, e_dark):
    return {"+": omega_c + e_plus, "-": omega_c + e_minus, "d": omega_c + e_dark, "G": 0.0}


# ------------------------------------------------------------------- WCME

def wcme_rates(params, basis=None, bath: BathFunctions | None = None):
    """Weak-coupling rates, dephasing and Lamb shifts at bare resonance.

    With ``basis`` (a DarkBasis), the prefactors are taken from explicit
    coefficient sums c_{mu alpha alpha mu}; otherwise from the closed forms.
    Returns (RateSet, LambShiftSet).
    """
    sd = _sd(params)
    bath = bath or BathFunctions.weak_coupling(sd, params)
    N, W = params.N, params.Omega
    flags = set()
    c = closed_form_coefficients(N) if basis is None else _basis_coefficients(basis)
    g = lambda nu: bath.one_phonon(nu).rate
    s = lambda nu: bath.one_phonon(nu).shift
    z = bath.zero()
    tr = {("+", "-"): c["pm"] * g(2 * W), ("-", "+"): c["pm"] * g(-2 * W),
          ("+", "d"): c["pd"] * g(W), ("-", "d"): c["pd"] * g(-W),
          ("d", "-"): c["pd"] * g(W), ("d", "+"): c["pd"] * g(-W),
          ("d", "d"): _zero(z, c["dd"], flags, "K_dd")}
    loss = {"+": tr[("+", "-")] + (N - 1) * tr[("+", "d")],
            "-": tr[("-", "+")] + (N - 1) * tr[("-", "d")],
            "d": tr[("d", "+")] + tr[("d", "-")] + _zero(z, c["dd_total"], flags, "K_d"),
            "G": 0.0}
    deph = {("+", "-"): 0.0,
            ("+", "G"): _zero(z, c["phi_pG"], flags, "K_phi_pm"),
            ("-", "G"): _zero(z, c["phi_pG"], flags, "K_phi_pm"),
            ("+", "d"): _zero(z, c["phi_pG"], flags, "K_phi_pm"),
            ("-", "d"): _zero(z, c["phi_pG"], flags, "K_phi_pm"),
            ("d", "G"): _zero(z, c["phi_dG"], flags, "K_phi_dG"),
            ("d", "d"): 0.0}
    wc = params.omega_m
    en = _energies(wc, W, -W, 0.0)
    rs = RateSet("WCME", N, 0.0, tr, dict(tr), {k: 0.0 for k in tr}, loss, deph,
                 {k: en[k] for k in ("+", "-", "d")}, flags)
    s0 = s(0.0)
    lt = {"+": c["pm"] * s(2 * W) + (N - 1) * c["pd"] * s(W),
          "-": c["pm"] * s(-2 * W) + (N - 1) * c["pd"] * s(-W),
          "d": c["pd"] * (s(W) + s(-W)) + c["dd_total"] * s0}
    lv = {"+": c["self_pm"] * s0, "-": c["self_pm"] * s0, "d": c["self_d"] * s0}
    shifts = {k: lt[k] + lv[k] for k in lt}
    shifts["G"] = 0.0
    return rs, LambShiftSet(shifts, lt, lv, en)


def closed_form_coefficients(N, epsilon: float = 0.0) -> dict:
    """Closed-form secular prefactors (resonant unless epsilon != 0).

    Single-phonon entries multiply gamma_1 / S_1; ``*_even`` / ``*_odd``
    multiply Omega_r^2 sum Phi_m/m! rates; ``phi_*_multi`` multiply the
    multi-phonon dephasing function.
    """
    e = epsilon
    return {
        "pm": (1 - e * e) / (4 * N), "pm_even": 4 * e * e / (4 * N), "pm_odd": 4 / (4 * N),
        "pd": (1 + e) / (2 * N), "pd_even": (1 - e) / (2 * N), "pd_odd": (1 - e) / (2 * N),
        "md": (1 - e) / (2 * N), "md_even": (1 + e) / (2 * N), "md_odd": (1 + e) / (2 * N),
        "dd": 1 / N, "dd_total": (N - 2) / N, "pd_total": (N - 1) / (2 * N),
        "phi_pm": e * e / (2 * N), "phi_pm_multi": 2 * (1 - e * e),
        "phi_pG": (1 + e) ** 2 / (8 * N), "phi_mG": (1 - e) ** 2 / (8 * N),
        "phi_pd": (1 - e) ** 2 / (8 * N), "phi_md": (1 + e) ** 2 / (8 * N),
        "phi_G_multi": 0.5 * (1 - e * e),
        "phi_dG": 1 / (2 * N), "phi_dd": 0.0,
        "self_pm": 1 / (4 * N), "self_p": (1 + e) ** 2 / (4 * N), "self_m": (1 - e) ** 2 / (4 * N),
        "self_multi": 1 - e * e, "self_d": 1 / N,
    }


def _basis_coefficients(basis) -> dict:
    from .eigensystem import coefficient_c

    N = basis.N
    c = lambda *a: coefficient_c(basis, *a).real
    d1, d2 = "d1", ("d2" if N > 2 else None)
    out = dict(closed_form_coefficients(N))
    out["pm"] = c("+", "-", "-", "+")
    out["pd"] = c("+", d1, d1, "+")
    out["dd"] = c(d1, d2, d2, d1) if d2 else 0.0
    out["dd_total"] = sum(c(d1, f"d{k}", f"d{k}", d1) for k in range(2, N))
    out["self_pm"] = c("+", "+", "+", "+")
    out["self_d"] = c(d1, d1, d1, d1)
    out["phi_pG"] = 0.5 * c("+", "+", "+", "+")
    out["phi_dG"] = 0.5 * c(d1, d1, d1, d1)
    return out


# ------------------------------------------------------------------- VPME

def _bath(params, sol, corr):
    return corr or BathFunctions.from_solution(_sd(params), params, sol)


def _omega_c(params):
    return params.cavity_energy(reorganization_energy(_sd(params)))


def _multi_rate(bath, nu, w_even, w_odd, R2):
    mp = bath.multi(nu)
    return 2 * R2 * (w_even * mp["even"].real + w_odd * mp["odd"].real)


def _multi_shift(bath, nu, w_even, w_odd, R2):
    mp = bath.multi(nu)
    return R2 * (w_even * mp["even"].imag + w_odd * mp["odd"].imag)


def vpme_transitions(params, sol, corr: BathFunctions | None = None) -> RateSet:
    """Resonant VPME transitions and losses.

    K_{+/- -> -/+} = gamma(+/-2 Omega_r)/(4N) with odd m >= 3 multi-phonon
    terms and prefactor nu^2; K_{+/- -> d} = K_{d -> -/+} = gamma(+/-Omega_r)/(2N)
    with all m >= 2; K_{d -> d'} = gamma_1(0)/N.
    """
    bath = _bath(params, sol, corr)
    N, R = params.N, sol.omega_r
    flags = set()
    g1 = lambda nu: bath.one_phonon(nu).rate

    def gm(nu, odd_only):
        mp = bath.multi(nu)
        s = mp["odd"] if odd_only else mp["even"] + mp["odd"]
        if not mp["converged"]:
            flags.add(f"truncation:{nu:.4g}")
        return nu * nu * 2 * s.real

    single = {("+", "-"): g1(2 * R) / (4 * N), ("-", "+"): g1(-2 * R) / (4 * N),
              ("+", "d"): g1(R) / (2 * N), ("-", "d"): g1(-R) / (2 * N),
              ("d", "-"): g1(R) / (2 * N), ("d", "+"): g1(-R) / (2 * N),
              ("d", "d"): _zero(bath.zero(), 1 / N, flags, "K_dd")}
    multi = {("+", "-"): gm(2 * R, True) / (4 * N), ("-", "+"): gm(-2 * R, True) / (4 * N),
             ("+", "d"): gm(R, False) / (2 * N), ("-", "d"): gm(-R, False) / (2 * N),
             ("d", "-"): gm(R, False) / (2 * N), ("d", "+"): gm(-R, False) / (2 * N),
             ("d", "d"): 0.0}
    tr = {k: single[k] + multi[k] for k in single}
    loss = {"+": tr[("+", "-")] + (N - 1) * tr[("+", "d")],
            "-": tr[("-", "+")] + (N - 1) * tr[("-", "d")],
            "d": tr[("d", "+")] + tr[("d", "-")] + _zero(bath.zero(), (N - 2) / N, flags, "K_d"),
            "G": 0.0}
    wc = _omega_c(params)
    en = _energies(wc, R, -R, 0.0)
    return RateSet("VPME", N, 0.0, tr, single, multi, loss, {}, {k: en[k] for k in "+-d"}, flags)


def vpme_dephasing(params, sol, corr: BathFunctions | None = None) -> RateSet:
    """Resonant VPME dephasing: K_{+-} = 2 g_phi, K_{+/-G} = K_{+/-d} = gamma_1(0)/(8N) + g_phi/2,
    K_{dG} = gamma_1(0)/(2N), K_{d_i d_j} = 0 with g_phi the multi-phonon dephasing rate."""
    bath = _bath(params, sol, corr)
    N = params.N
    flags = set()
    z = bath.zero()
    gp = bath.dephasing().rate
    one8 = _zero(z, 1 / (8 * N), flags, "K_phi_pm")
    deph = {("+", "-"): 2 * gp, ("+", "G"): one8 + 0.5 * gp, ("-", "G"): one8 + 0.5 * gp,
            ("+", "d"): one8 + 0.5 * gp, ("-", "d"): one8 + 0.5 * gp,
            ("d", "G"): _zero(z, 1 / (2 * N), flags, "K_phi_dG"), ("d", "d"): 0.0}
    return RateSet("VPME", N, 0.0, {}, {}, {}, {}, deph, {}, flags,
                   {"gamma_phi_multi": gp, "gamma1_zero": z})


def vpme_lamb(params, sol, corr: BathFunctions | None = None) -> LambShiftSet:
    """Resonant VPME Lamb shifts.

    Lambda_+/- = S^v(+/-2 Omega_r)/(4N) + (N-1) S^v(+/-Omega_r)/(2N) + S_1^v(0)/(4N) + S^phi(0),
    Lambda_d = [S^v(Omega_r) + S^v(-Omega_r)]/(2N) + (N-2) S_1^v(0)/N + S_1^v(0)/N, Lambda_G = 0.
    ``parts`` splits each shift into single-phonon, multi-phonon and virtual pieces.
    """
    bath = _bath(params, sol, corr)
    N, R = params.N, sol.omega_r
    s1 = lambda nu: bath.one_phonon(nu).shift

    def sm(nu, odd_only):
        mp = bath.multi(nu)
        return nu * nu * (mp["odd"] if odd_only else mp["even"] + mp["odd"]).imag

    s0 = s1(0.0)
    sphi = bath.dephasing().shift
    parts = {}
    for lab, sg in (("+", 1), ("-", -1)):
        one = s1(2 * sg * R) / (4 * N) + (N - 1) * s1(sg * R) / (2 * N)
        mul = sm(2 * sg * R, True) / (4 * N) + (N - 1) * sm(sg * R, False) / (2 * N)
        parts[lab] = {"single": one, "multi": mul, "virtual": s0 / (4 * N) + sphi}
    one_d = (s1(R) + s1(-R)) / (2 * N) + (N - 2) * s0 / N
    mul_d = (sm(R, False) + sm(-R, False)) / (2 * N)
    parts["d"] = {"single": one_d, "multi": mul_d, "virtual": s0 / N}
    trans = {k: v["single"] + v["multi"] for k, v in parts.items()}
    virt = {k: v["virtual"] for k, v in parts.items()}
    shifts = {k: trans[k] + virt[k] for k in parts}
    shifts["G"] = 0.0
    en = _energies(_omega_c(params), R, -R, 0.0)
    return LambShiftSet(shifts, trans, virt, en, parts)


def vpme_rates(params, sol, corr: BathFunctions | None = None):
    """(RateSet with transitions and dephasing, LambShiftSet) for the resonant VPME."""
    bath = _bath(params, sol, corr)
    rs = vpme_transitions(params, sol, bath).merged(vpme_dephasing(params, sol, bath))
    return rs, vpme_lamb(params, sol, bath)


def lamb_asymptote(params, sol, sd: SpectralDensity | None = None) -> dict:
    """Large-N polariton shift asymptotes: +/-(Omega_r/2) B_2 and +/-B_0/(2 Omega_r),
    and the dark-state limit -Delta."""
    sd = sd or _sd(params)
    b2 = moment_bj(sd, 2, params.beta)
    b0 = moment_bj(sd, 0, params.beta, sol.gfun(params.beta))
    R = sol.omega_r
    return {"low": R / 2 * b2, "high": b0 / (2 * R), "dark": -sol.delta, "B2": b2, "B0": b0}


# -------------------------------------------------------------- detuned

def nonres_rates(params, sol, corr: BathFunctions | None = None, eig=None, delta: float | None = None):
    """Detuned VPME rates, dephasing and Lamb shifts in the generalized-function form.

    gamma_D(nu, {a, b, c}) = a gamma_1 + b gamma_even + c gamma_odd with
    Omega_r^2 normalisation of the multi-phonon sums. Polariton-polariton
    weights {1 - e^2, 4 e^2, 4}, polariton-dark {1 +/- e, 1 -/+ e, 1 -/+ e}
    at nu = +/-(theta -/+ Delta)/2, multi-phonon dephasing and self shifts
    scaled by (1 - e^2), single-phonon self terms by (1 +/- e)^2.
    ``meta['simplified']`` holds the (1 +/- e) K_{+/- -> d}(0) shortcut and its
    relative difference. Returns (RateSet, LambShiftSet).
    """
    from .eigensystem import nonres_eigensystem

    bath = _bath(params, sol, corr)
    if delta is not None:
        R = sol.omega_r
        sol = replace(sol, delta=delta, theta=math.sqrt(delta * delta + 4 * R * R))
    eig = eig or nonres_eigensystem(params, sol)
    N, R, R2 = params.N, sol.omega_r, sol.omega_r ** 2
    th, dl, e = eig.theta, eig.delta, eig.epsilon
    c = closed_form_coefficients(N, e)
    flags = set()
    g1 = lambda nu: bath.one_phonon(nu).rate
    s1 = lambda nu: bath.one_phonon(nu).shift
    nu_pd, nu_md = (th - dl) / 2, -(th + dl) / 2
    # (key, nu, single weight, even weight, odd weight)
    table = [(("+", "-"), th, c["pm"], c["pm_even"], c["pm_odd"]),
             (("-", "+"), -th, c["pm"], c["pm_even"], c["pm_odd"]),
             (("+", "d"), nu_pd, c["pd"], c["pd_even"], c["pd_odd"]),
             (("-", "d"), nu_md, c["md"], c["md_even"], c["md_odd"]),
             (("d", "+"), -nu_pd, c["pd"], c["pd_even"], c["pd_odd"]),
             (("d", "-"), -nu_md, c["md"], c["md_even"], c["md_odd"])]
    single, multi, lt = {}, {}, {}
    for key, nu, a, b, cc in table:
        single[key] = a * g1(nu)
        multi[key] = _multi_rate(bath, nu, b, cc, R2)
        lt[key] = a * s1(nu) + _multi_shift(bath, nu, b, cc, R2)
        if not bath.multi(nu)["converged"]:
            flags.add(f"truncation:{nu:.4g}")
    z = bath.zero()
    single[("d", "d")] = _zero(z, 1 / N, flags, "K_dd")
    multi[("d", "d")] = 0.0
    tr = {k: single[k] + multi[k] for k in single}
    loss = {"+": tr[("+", "-")] + (N - 1) * tr[("+", "d")],
            "-": tr[("-", "+")] + (N - 1) * tr[("-", "d")],
            "d": tr[("d", "+")] + tr[("d", "-")] + _zero(z, (N - 2) / N, flags, "K_d"),
            "G": 0.0}
    gp = bath.dephasing().rate
    zz = lambda coeff, where: _zero(z, coeff, flags, where)
    deph = {("+", "-"): zz(c["phi_pm"], "K_phi_pm") + c["phi_pm_multi"] * gp,
            ("+", "G"): zz(c["phi_pG"], "K_phi_pG") + c["phi_G_multi"] * gp,
            ("-", "G"): zz(c["phi_mG"], "K_phi_mG") + c["phi_G_multi"] * gp,
            ("+", "d"): zz(c["phi_pd"], "K_phi_pd") + c["phi_G_multi"] * gp,
            ("-", "d"): zz(c["phi_md"], "K_phi_md") + c["phi_G_multi"] * gp,
            ("d", "G"): zz(c["phi_dG"], "K_phi_dG"), ("d", "d"): 0.0}
    # shortcut forms
    res = lambda nu: g1(nu) + nu * nu * 2 * (bath.multi(nu)["even"] + bath.multi(nu)["odd"]).real
    simp = {("+", "d"): (1 + e) * res(R) / (2 * N), ("-", "d"): (1 - e) * res(-R) / (2 * N)}
    diff = {k: (simp[k] - tr[k]) / tr[k] if tr[k] else 0.0 for k in simp}
    wc = eig.omega_c
    en = _energies(wc, eig.omega_plus, eig.omega_minus, eig.omega_d)
    rs = RateSet("VPME", N, dl, tr, single, multi, loss, deph, {k: en[k] for k in "+-d"}, flags,
                 {"epsilon": e, "theta": th, "simplified": simp, "simplified_difference": diff,
                  "gamma_phi_multi": gp})
    s0 = s1(0.0)
    sphi = bath.dephasing().shift
    trans = {"+": lt[("+", "-")] + (N - 1) * lt[("+", "d")],
             "-": lt[("-", "+")] + (N - 1) * lt[("-", "d")],
             "d": lt[("d", "+")] + lt[("d", "-")] + (N - 2) * s0 / N}
    virt = {"+": c["self_p"] * s0 + c["self_multi"] * sphi,
            "-": c["self_m"] * s0 + c["self_multi"] * sphi,
            "d": c["self_d"] * s0}
    shifts = {k: trans[k] + virt[k] for k in trans}
    shifts["G"] = 0.0
    return rs, LambShiftSet(shifts, trans, virt, en)


# ------------------------------------------------------------ coherences

def coherence_rates(rate_set: RateSet, lamb_set: LambShiftSet) -> CoherenceRate:
    """R_{mu nu} for all pairs of {+, -, d, G} (d paired with a different dark state for dd)."""
    vals = {}
    for mu in STATES:
        for nu in STATES:
            if mu == nu and mu != "d":
                vals[(mu, nu)] = 0j
                continue
            re = 0.5 * (rate_set.loss.get(mu, 0.0) + rate_set.loss.get(nu, 0.0)) + rate_set.phi(mu, nu)
            vals[(mu, nu)] = complex(re, lamb_set.delta(mu, nu))
    return CoherenceRate(vals)


# ---------------------------------------------------------- serialization

RATE_COLUMNS = ["theory", "N", "delta_eV", "kind", "from", "to", "total_eV", "single_eV", "multi_eV"]


def rate_rows(rs: RateSet, ls: LambShiftSet | None = None) -> list[dict]:
    """Flatten a RateSet (and optional LambShiftSet) into rows with RATE_COLUMNS."""
    rows = []
    base = {"theory": rs.theory, "N": rs.N, "delta_eV": rs.delta}
    for (a, b), v in sorted(rs.transitions.items()):
        rows.append({**base, "kind": "transition", "from": a, "to": b, "total_eV": v,
                     "single_eV": rs.single.get((a, b), v), "multi_eV": rs.multi.get((a, b), 0.0)})
    for a, v in rs.loss.items():
        rows.append({**base, "kind": "loss", "from": a, "to": "", "total_eV": v,
                     "single_eV": "", "multi_eV": ""})
    for (a, b), v in sorted(rs.dephasing.items()):
        rows.append({**base, "kind": "dephasing", "from": a, "to": b, "total_eV": v,
                     "single_eV": "", "multi_eV": ""})
    if ls is not None:
        for a, v in ls.shifts.items():
            p = ls.parts.get(a, {})
            rows.append({**base, "kind": "lamb", "from": a, "to": "", "total_eV": v,
                         "single_eV": p.get("single", ""), "multi_eV": p.get("multi", "")})
    return rows


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RATE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def to_json(rows: list[dict]) -> str:
    return json.dumps(rows, indent=2, default=float)
