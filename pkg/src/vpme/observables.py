"""Cavity absorption spectrum and secular population dynamics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, null_space

__all__ = ["SpectrumResult", "PopulationTrajectory", "absorption_spectrum", "secular_dynamics",
           "rate_matrix", "stationary_state", "boltzmann_populations"]


@dataclass
class SpectrumResult:
    omega: np.ndarray
    intensity: np.ndarray
    centers: dict
    half_widths: dict
    area: float
    area_grid: float
    theory: str = "VPME"
    delta_lines: dict = field(default_factory=dict)

    @property
    def fwhm(self) -> dict:
        return {k: 2 * v for k, v in self.half_widths.items()}


def _lorentz_mass(center, hw, lo, hi):
    """Fraction of a unit-area Lorentzian inside [lo, hi]."""
    return (math.atan((hi - center) / hw) - math.atan((lo - center) / hw)) / math.pi


def _peak_grid(centers, widths, lo, hi, points):
    """Nodes c + hw sinh(u), u uniform, around every finite-width peak.

    The substitution makes each Lorentzian smooth in u, so the trapezoid rule
    resolves peaks far narrower than their separation.
    """
    if not widths:
        return np.linspace(lo, hi, points)
    n = max(points // len(widths), 16)
    parts = [np.array([lo, hi])]
    for p, hw in widths.items():
        c = centers[p]
        ua = math.asinh(max(c - lo, 0.0) / hw)
        ub = math.asinh(max(hi - c, 0.0) / hw)
        parts.append(c + hw * np.sinh(np.linspace(-ua, ub, n)))
    w = np.unique(np.concatenate(parts))
    return w[(w >= lo) & (w <= hi)]


def absorption_spectrum(coh, grid=None, A0: float = 1.0, theory: str = "VPME",
                        span: float = 40.0, points: int = 40001) -> SpectrumResult:
    """Two-Lorentzian cavity spectrum

        A(w) = (A0/2) sum_{p=+,-} Re R_pG / (Re R_pG^2 + (Delta_pG - w)^2).

    ``grid`` defaults to sinh-spaced nodes around each peak covering +/-
    ``span`` half-widths beyond both peaks. ``area`` adds the analytic Lorentzian mass outside the
    grid to the trapezoid integral ``area_grid``. Peaks with zero width are
    returned as delta lines of weight pi A0/2.
    """
    centers = {p: coh[(p, "G")].imag for p in ("+", "-")}
    hws = {p: coh[(p, "G")].real for p in ("+", "-")}
    for p, hw in hws.items():
        if hw < 0 or not math.isfinite(hw):
            raise ValueError(f"invalid half-width for peak {p}: {hw}")
    finite = {p: hw for p, hw in hws.items() if hw > 0}
    if grid is None:
        if finite:
            lo = min(centers[p] - span * hw for p, hw in finite.items())
            hi = max(centers[p] + span * hw for p, hw in finite.items())
        else:
            c = sorted(centers.values())
            pad = max(c[1] - c[0], 1e-12)
            lo, hi = c[0] - pad, c[1] + pad
        lo = min([lo] + [centers[p] for p in centers])
        hi = max([hi] + [centers[p] for p in centers])
        grid = _peak_grid(centers, finite, lo, hi, points)
    w = np.asarray(grid, dtype=float)
    inten = np.zeros_like(w)
    deltas = {}
    outside = 0.0
    for p in ("+", "-"):
        hw, c = hws[p], centers[p]
        if hw == 0:
            deltas[p] = (c, 0.5 * math.pi * A0)
            continue
        inten += 0.5 * A0 * hw / (hw * hw + (c - w) ** 2)
        outside += 0.5 * math.pi * A0 * (1 - _lorentz_mass(c, hw, w[0], w[-1]))
    area_grid = float(np.trapezoid(inten, w)) if len(w) > 1 else 0.0
    area = area_grid + outside + sum(v[1] for v in deltas.values())
    return SpectrumResult(w, inten, centers, hws, area, area_grid, theory, deltas)


# --------------------------------------------------------------- dynamics

ORDER = ("+", "-", "D", "G")


@dataclass
class PopulationTrajectory:
    t: np.ndarray
    populations: np.ndarray          # (len(t), 4): +, -, dark total, G
    coherences: dict = field(default_factory=dict)
    N: float = 1.0
    diagnostics: dict = field(default_factory=dict)

    def population(self, label: str) -> np.ndarray:
        return self.populations[:, ORDER.index(label)]

    @property
    def dark_per_state(self) -> np.ndarray:
        return self.population("D") / (self.N - 1)


def rate_matrix(rate_set) -> np.ndarray:
    """Generator M (dp/dt = M p) on [+, -, dark total, G] with dark multiplicity N - 1."""
    N = rate_set.N
    K = rate_set.K
    M = np.zeros((4, 4))
    # columns: source; rows: destination
    M[1, 0] = K("+", "-")
    M[2, 0] = (N - 1) * K("+", "d")
    M[0, 1] = K("-", "+")
    M[2, 1] = (N - 1) * K("-", "d")
    M[0, 2] = K("d", "+")
    M[1, 2] = K("d", "-")
    for j in range(4):
        M[j, j] = -(M[:, j].sum() - M[j, j])
    return M


def stationary_state(rate_set) -> np.ndarray:
    """Stationary populations of the excited manifold (G excluded), normalised to 1."""
    M = rate_matrix(rate_set)[:3, :3]
    ns = null_space(M)
    v = np.abs(ns[:, 0])
    return v / v.sum()


def boltzmann_populations(energies: dict, N: float, beta: float) -> np.ndarray:
    """Boltzmann weights over {+, -, dark x (N - 1)} from the bare energies."""
    e = np.array([energies["+"], energies["-"], energies["d"]])
    e = e - e.min()
    w = np.exp(-beta * e) * np.array([1.0, 1.0, N - 1])
    return w / w.sum()


def secular_dynamics(rate_set, initial, t_grid, lamb_set=None, coherence=None,
                     decoherence=None) -> PopulationTrajectory:
    """Propagate populations with the exact matrix exponential of the 4-level generator.

    ``initial`` maps labels {+, -, D, G} to populations, and pairs like
    ('+', 'G') to initial coherences. Coherences decay as exp(-R t) using the
    CoherenceRate ``coherence`` (required when coherences are given);
    ``decoherence`` may supply {pair: callable t -> D(t)} factors multiplying
    them (the non-Markovian zero-frequency suppression).
    """
    t = np.asarray(t_grid, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be non-negative")
    p0 = np.array([float(initial.get(k, 0.0)) for k in ORDER])
    if abs(p0.sum() - 1) > 1e-12 or np.any(p0 < 0):
        raise ValueError("initial populations must be non-negative and sum to 1")
    M = rate_matrix(rate_set)
    if not np.all(np.isfinite(M)):
        raise ValueError("rate matrix contains non-finite entries")
    pops = np.empty((len(t), 4))
    retries = 0
    for i, ti in enumerate(t):
        p = expm(M * ti) @ p0
        if abs(p.sum() - 1) > 1e-9 or np.any(p < -1e-12):
            # stiff generator: split the step and square back up
            retries += 1
            k = max(1, int(math.ceil(math.log2(max(1.0, np.abs(M).max() * ti)))))
            E = expm(M * ti / 2 ** k)
            for _ in range(k):
                E = E @ E
            p = E @ p0
        pops[i] = np.clip(p, 0.0, None)
    coh = {}
    for key, val in initial.items():
        if isinstance(key, tuple):
            if coherence is None:
                raise ValueError("coherences need a CoherenceRate")
            R = coherence[key]
            c = complex(val) * np.exp(-R * t)
            if decoherence and key in decoherence:
                c = c * np.asarray([decoherence[key](x) for x in t])
            coh[key] = c
    return PopulationTrajectory(t, pops, coh, rate_set.N,
                                {"retries": retries, "trace_error": float(np.max(np.abs(pops.sum(1) - 1)))})
