"""Bath spectral densities, the variational-frame derived densities and
their moments."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma as gamma_fn

from .quadrature import DEFAULT, QuadratureConfig, integrate_semiinfinite


class InfraredDivergenceError(ArithmeticError):
    """A low-frequency moment diverges (cutoff probe moved it by more than 1%)."""


@dataclass(frozen=True)
class SpectralDensity:
    """J(w) = A w^p w0^(1-p) exp(-w^2/w0^2) for w > 0, or a tabulated density.

    Tabulated densities are monotone-cubic (PCHIP) interpolants, zero outside
    the tabulated range.
    """

    A: float
    p: float
    omega_0: float
    table: tuple | None = None

    def __post_init__(self):
        if self.table is not None:
            w, j = (np.asarray(a, dtype=float) for a in self.table)
            if w.ndim != 1 or w.shape != j.shape or len(w) < 2:
                raise ValueError("table needs two equal-length 1-D columns")
            if np.any(np.diff(w) <= 0) or w[0] <= 0:
                raise ValueError("tabulated omega must be positive and strictly increasing")
            if np.any(j < 0):
                raise ValueError("tabulated J must be non-negative")
            object.__setattr__(self, "_interp", PchipInterpolator(w, j, extrapolate=False))

    @classmethod
    def from_params(cls, params) -> "SpectralDensity":
        return cls(params.A, params.p, params.omega_0)

    @classmethod
    def from_table(cls, omega, J, omega_0: float | None = None) -> "SpectralDensity":
        omega = np.asarray(omega, dtype=float)
        J = np.asarray(J, dtype=float)
        w0 = omega_0 if omega_0 is not None else float(omega[np.argmax(J)])
        return cls(A=float("nan"), p=float("nan"), omega_0=w0, table=(tuple(omega), tuple(J)))

    @property
    def is_table(self) -> bool:
        return self.table is not None

    @property
    def upper(self) -> float:
        """Frequency beyond which J is negligible (exactly zero for tables)."""
        if self.is_table:
            return float(self.table[0][-1])
        return 12.0 * self.omega_0 + 0.0

    def breakpoints(self):
        if self.is_table:
            return tuple(self.table[0])
        return (0.01 * self.omega_0, 0.1 * self.omega_0, self.omega_0, 3 * self.omega_0)

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        out = np.zeros_like(w)
        pos = w > 0
        if self.is_table:
            vals = self._interp(w[pos])
            out[pos] = np.nan_to_num(vals, nan=0.0)
        else:
            x = w[pos] / self.omega_0
            out[pos] = self.A * self.omega_0 * x ** self.p * np.exp(-x * x)
        return out if out.ndim else float(out)

    def log(self, omega):
        """log J for w > 0 (-inf where J vanishes); avoids underflow far in the tail."""
        w = np.asarray(omega, dtype=float)
        if self.is_table:
            with np.errstate(divide="ignore"):
                return np.log(self(w))
        if self.A == 0:
            return np.full_like(w, -np.inf)
        x = w / self.omega_0
        with np.errstate(divide="ignore"):
            return math.log(self.A * self.omega_0) + self.p * np.log(x) - x * x

    def slope_at_zero(self) -> float:
        """lim_{w->0+} J(w)/w: 0, finite (p = 1) or inf (p < 1)."""
        if self.is_table or self.A == 0:
            return 0.0
        if self.p > 1:
            return 0.0
        if self.p == 1:
            return self.A
        return math.inf


def j_eval(sd: SpectralDensity, omega):
    return sd(omega)


def load_table(path, omega_0: float | None = None) -> SpectralDensity:
    """Read a two-column CSV (omega_eV, J_eV); a non-numeric header is skipped."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise
    if not rows:
        raise ValueError(f"{path}: no data rows")
    w, j = zip(*rows)
    return SpectralDensity.from_table(w, j, omega_0)


def coth_half(beta, omega):
    """coth(beta*w/2), with beta = inf giving 1."""
    if math.isinf(beta):
        return np.ones_like(np.asarray(omega, dtype=float))
    return 1.0 / np.tanh(0.5 * beta * np.asarray(omega, dtype=float))


def reorganization_energy(sd: SpectralDensity, method: str = "closed",
                          cfg: QuadratureConfig = DEFAULT) -> float:
    """int_0^inf J(w)/w dw, closed form (A w0/2) Gamma(p/2) for the built-in family."""
    if method == "closed" and not sd.is_table:
        return 0.5 * sd.A * sd.omega_0 * gamma_fn(0.5 * sd.p)
    if sd.is_table:
        return integrate_semiinfinite(lambda w: sd(w) / w, cfg, sd.breakpoints(),
                                      lower=sd.table[0][0], upper=sd.upper)
    if sd.A == 0:
        return 0.0
    # substitute w = w0*sqrt(u) style integrand is smooth for all p > 0 after splitting
    f = lambda w: sd.A * (w / sd.omega_0) ** (sd.p - 1) * math.exp(-(w / sd.omega_0) ** 2)
    return integrate_semiinfinite(f, cfg, sd.breakpoints(), upper=sd.upper)


@dataclass(frozen=True)
class DerivedDensities:
    """Displacement, polaron and mixed densities of the variational frame."""

    J_D: Callable
    J_P: Callable
    J_V: Callable


def _as_gfun(gfun):
    if callable(gfun):
        return gfun
    c = float(gfun)
    return lambda w: np.full_like(np.asarray(w, dtype=float), c)


def probe_divergence(weight: Callable, omega_0: float, upper: float,
                     cfg: QuadratureConfig = DEFAULT) -> float:
    """Integrate ``weight`` from a small cutoff; raise if moving the cutoff
    from 1e-6 w0 to 1e-7 w0 changes the result by more than 1%."""
    pts = [omega_0 * 10.0 ** k for k in range(-6, 1)]
    tail = integrate_semiinfinite(weight, cfg, pts, lower=1e-6 * omega_0, upper=upper)
    extra = integrate_semiinfinite(weight, cfg, (), lower=1e-7 * omega_0, upper=1e-6 * omega_0)
    if abs(extra) > 0.01 * abs(tail) and abs(extra) > cfg.abs_tol:
        raise InfraredDivergenceError(
            f"low-frequency moment not converged: cutoff change adds {extra:.3g} to {tail:.3g}")
    return tail + extra


def derived_densities(sd: SpectralDensity, gfun, beta: float | None = None,
                      cfg: QuadratureConfig = DEFAULT) -> DerivedDensities:
    """J_D = J (1-G)^2, J_P = J G^2/w^2, J_V = J (1-G) G / w.

    With ``beta`` given, the polaron moment int J_P coth(beta w/2) is probed
    for an infrared divergence.
    """
    G = _as_gfun(gfun)

    def J_D(w):
        w = np.asarray(w, dtype=float)
        return sd(w) * (1.0 - G(np.abs(w))) ** 2 * (w > 0)

    def J_P(w):
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(w > 0, sd(w) * G(np.abs(w)) ** 2 / w ** 2, 0.0)
        return out

    def J_V(w):
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = G(np.abs(w))
            out = np.where(w > 0, sd(w) * (1.0 - g) * g / w, 0.0)
        return out

    if beta is not None:
        probe_divergence(lambda w: float(J_P(w)) * float(coth_half(beta, w)), sd.omega_0, sd.upper, cfg)
    return DerivedDensities(J_D, J_P, J_V)


def moment_bj(sd: SpectralDensity, j: int, beta: float, gfun=None,
              cfg: QuadratureConfig = DEFAULT) -> float:
    """B_j = int J(w)/w^j coth(beta w/2) dw for j in {0, 2}.

    With ``gfun`` the integrand is weighted by the frame factor that goes with
    each moment in the Lamb-shift asymptotics: G^2 for j = 2, (1-G)^2 for j = 0.
    """
    if j not in (0, 2):
        raise ValueError("only j = 0 and j = 2 are used")
    if not sd.is_table and sd.A == 0:
        return 0.0
    if gfun is None:
        wgt = lambda w: 1.0
    else:
        G = _as_gfun(gfun)
        wgt = (lambda w: float(G(w)) ** 2) if j == 2 else (lambda w: (1.0 - float(G(w))) ** 2)

    def f(w):
        return float(sd(w)) / w ** j * float(coth_half(beta, w)) * wgt(w)

    if j == 2 and not sd.is_table:
        if beta is not math.inf and sd.p <= j:
            # J/w^2 coth ~ w^(p-3): probe for divergence explicitly
            return probe_divergence(f, sd.omega_0, sd.upper, cfg)
        if sd.p <= j - 1:
            return probe_divergence(f, sd.omega_0, sd.upper, cfg)
    lower = sd.table[0][0] if sd.is_table else 0.0
    return integrate_semiinfinite(f, cfg, sd.breakpoints(), lower=lower, upper=sd.upper)
