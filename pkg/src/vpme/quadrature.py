"""Shared integration engine: adaptive semi-infinite quadrature, principal
values by singularity subtraction and half-line oscillatory transforms."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not converge (or the integral diverges)."""


class TailError(RuntimeError):
    """Integrand of a half-line transform does not settle to a constant."""


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and Fourier-grid settings.

    ``tau_max`` of None means "derive from the bath": 80/w0 * coth(beta*w0/2).
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-14
    max_subdivisions: int = 500
    tau_max: float | None = None
    samples: int = 2 ** 16

    def __post_init__(self):
        s = self.samples
        if s < 16 or s & (s - 1):
            raise ValueError(f"samples must be a power of two >= 16, got {s}")
        if self.tau_max is not None and not self.tau_max > 0:
            raise ValueError("tau_max must be positive")
        if self.rel_tol <= 0 or self.abs_tol < 0:
            raise ValueError("tolerances must be positive")


DEFAULT = QuadratureConfig()


def default_tau_max(omega_0: float, beta: float) -> float:
    x = 0.5 * beta * omega_0
    return 80.0 / omega_0 / math.tanh(x)


def _quad_raw(f, a, b, cfg, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        res = integrate.quad(f, a, b, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                             limit=cfg.max_subdivisions, full_output=1, **kw)
    msg = res[3] if len(res) > 3 else ""
    return res[0], res[1], msg


def _check(total, err, msgs, cfg, where):
    if not np.isfinite(total):
        raise QuadratureError(f"non-finite integral on {where}")
    # roundoff-limited results are as good as the integrand allows; accept them looser
    roundoff = msgs and all("oundoff" in m for m in msgs)
    rel = 1e-4 if roundoff else max(1e3 * cfg.rel_tol, 1e-6)
    if msgs and err > max(cfg.abs_tol, rel * abs(total)):
        first = msgs[0].splitlines()[0] if msgs[0] else "no convergence"
        raise QuadratureError(f"quad on {where} failed: value={total:.6g} "
                              f"error={err:.3g}: {first}")


def _quad(f, a, b, cfg, **kw):
    val, err, msg = _quad_raw(f, a, b, cfg, **kw)
    _check(val, err, [msg] if msg else [], cfg, f"[{a}, {b}]")
    return val


def _pieces(lower, upper, breakpoints):
    pts = sorted({float(b) for b in breakpoints if lower < b < upper})
    edges = [lower, *pts, upper]
    return list(zip(edges[:-1], edges[1:]))


def integrate_semiinfinite(f, cfg: QuadratureConfig = DEFAULT, breakpoints=(),
                           lower: float = 0.0, upper: float = math.inf) -> float:
    """Integrate ``f`` over [lower, upper) (default (0, inf)), split at breakpoints.

    Raises QuadratureError when the adaptive routine does not converge, which
    is also how non-integrable singularities such as 1/w at the origin show up.
    """
    vals, errs, msgs = [], [], []
    for a, b in _pieces(lower, upper, breakpoints):
        v, e, m = _quad_raw(f, a, b, cfg)
        vals.append(v)
        errs.append(e)
        if m:
            msgs.append(m)
    total = math.fsum(vals)
    _check(total, sum(errs), msgs, cfg, f"[{lower}, {upper}]")
    return total


def principal_value(f, pole: float, cfg: QuadratureConfig = DEFAULT, lower: float = 0.0,
                    upper: float = math.inf, breakpoints=(), halfwidth: float | None = None) -> float:
    """P-integral of f(w)/(pole - w) over [lower, upper].

    A window symmetric about the pole is folded onto u = |w - pole| in (0, h],
    integrating (f(pole - u) - f(pole + u))/u; the rest of the domain is
    regular and integrated directly.
    """
    if not (lower < pole < upper):
        return integrate_semiinfinite(lambda w: f(w) / (pole - w), cfg, breakpoints, lower, upper)
    h = min(pole - lower, upper - pole)
    if halfwidth is not None:
        h = min(h, halfwidth)
    if not math.isfinite(h):
        h = max(abs(pole), 1.0)

    def folded(u):
        return (f(pole - u) - f(pole + u)) / u

    bps = [abs(b - pole) for b in breakpoints]
    total = [integrate_semiinfinite(folded, cfg, bps, 0.0, h)]
    reg = lambda w: f(w) / (pole - w)
    if pole - h > lower:
        total.append(integrate_semiinfinite(reg, cfg, breakpoints, lower, pole - h))
    if pole + h < upper:
        total.append(integrate_semiinfinite(reg, cfg, breakpoints, pole + h, upper))
    return math.fsum(total)


@dataclass(frozen=True)
class HalfFourier:
    """Samples of G(nu) = int_0^inf exp(i nu tau) f(tau) dtau.

    ``rate`` is 2 Re G, ``shift`` is Im G; ``delta_spike`` is the weight of an
    elastic delta(nu) component, reported separately from the finite parts.
    """

    nu: np.ndarray
    value: np.ndarray
    delta_spike: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def rate(self):
        return 2.0 * np.real(self.value)

    @property
    def shift(self):
        return np.imag(self.value)

    def __getitem__(self, i):
        return HalfFourier(np.asarray(self.nu)[i], np.asarray(self.value)[i], self.delta_spike, self.meta)


# left-end Gregory corrections to the trapezoid rule, applied to forward
# differences of order 1..4
_GREGORY = (1 / 12, -1 / 24, 19 / 720, -3 / 160)


def _gregory_left(F, h):
    """Endpoint correction sum for rows of F (last axis is tau)."""
    corr = 0.0
    d = F[..., :6]
    for c in _GREGORY:
        d = np.diff(d, axis=-1)
        corr = corr + c * d[..., 0]
    return h * corr


def half_line_samples(tau, values, nu, tail: str = "auto", tail_tol: float = 1e-3) -> HalfFourier:
    """Half-line transform of uniformly sampled values starting at tau = 0.

    A constant tail c (mean of the last 5% of samples) is removed and handled
    analytically: c*pi*delta(nu) reported in ``delta_spike`` and i*c/nu added to
    the value. ``tail='zero'`` skips the estimate.
    """
    tau = np.asarray(tau, dtype=float)
    vals = np.asarray(values, dtype=complex)
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    h = tau[1] - tau[0]
    if tau[0] != 0 or not np.allclose(np.diff(tau), h, rtol=1e-9, atol=0):
        raise ValueError("tau must be a uniform grid starting at 0")
    c = 0.0
    scale = np.max(np.abs(vals)) or 1.0
    if tail == "auto":
        last = vals[-max(8, len(vals) // 20):]
        spread = np.max(np.abs(last - last.mean()))
        if spread > tail_tol * scale:
            raise TailError(f"tail not asymptotically constant: spread {spread:.3g} "
                            f"vs scale {scale:.3g} over the last {len(last)} samples")
        c = last.mean()
        if abs(c) < 1e-12 * scale:
            c = 0.0
    g = vals - c
    phase = np.exp(1j * np.outer(nu, tau))
    F = phase * g
    out = h * (F.sum(axis=1) - 0.5 * F[:, 0] - 0.5 * F[:, -1]) + _gregory_left(F, h)
    spike = 0.0
    if c != 0.0:
        nz = nu != 0
        out[nz] += 1j * c / nu[nz]
        spike = math.pi * float(np.real(c))
    return HalfFourier(nu, out, spike)


def half_line_fourier(f, nu_grid, cfg: QuadratureConfig = DEFAULT, tau_max: float | None = None,
                      samples: int | None = None, tail: str = "auto") -> HalfFourier:
    """Half-line transform of a callable f(tau) on a windowed uniform grid."""
    tau_max = tau_max or cfg.tau_max
    if tau_max is None:
        raise ValueError("tau_max required (no bath scale available)")
    n = samples or cfg.samples
    tau = np.linspace(0.0, tau_max, n)
    vals = np.asarray(f(tau), dtype=complex)
    return half_line_samples(tau, vals, nu_grid, tail=tail)
