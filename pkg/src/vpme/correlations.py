"""Phonon propagators, one- and multi-phonon correlation transforms,
non-Markovian dephasing kernels and decoherence factors.

Conventions
-----------
For a density F on (0, inf) the two-sided emission/absorption spectrum is

    s_F(w) = F(|w|) / |1 - exp(-beta w)|,

i.e. F n~ for w > 0 and F n for w < 0. The propagator is
phi(t) = int s_P(w) exp(-i w t) dw with F = J G^2/w^2, and the half-line
transform int_0^inf exp(i nu t) phi(t)^m dt has real part pi rho_m(nu), with
rho_m the m-fold self-convolution of s_P, and imaginary part given by the
principal value P int rho_m(w)/(nu - w) dw.

Powers of phi are transformed on a uniform grid by FFT. The grid is a set of
discrete modes w_j = j dw, so each mode pair obeys detailed balance exactly;
for rates far in the tail the modes are exponentially tilted (the propagator is
evaluated on a line shifted into the complex time plane) so that the
transform never has to cancel large numbers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .quadrature import (DEFAULT, HalfFourier, QuadratureConfig, default_tau_max,
                         half_line_samples, integrate_semiinfinite, principal_value)
from .spectral import InfraredDivergenceError, SpectralDensity, coth_half
from .variational import crossover_frequency, g_of_omega, one_minus_g

__all__ = [
    "HalfFourier", "PropagatorGrid", "ZeroStatus", "ZeroFrequencyRate", "TruncationError",
    "occupation", "spectrum_two_sided", "gamma1_s1", "m_functional", "s1v", "gamma1v",
    "zero_frequency_rate", "phi", "phi_displacement", "phi_power_fourier", "two_phonon_direct",
    "gamma_multi", "gamma_phi_multi", "gamma_phi_leading", "gamma1_nonmarkov",
    "decoherence_exponent", "decoherence_factor", "multi_phonon_parts", "BathFunctions",
]


class TruncationError(RuntimeError):
    """Multi-phonon series not converged at the requested order."""


class ZeroStatus(str, enum.Enum):
    ZERO = "zero"
    FINITE = "finite"
    DIVERGENT = "divergent"


@dataclass(frozen=True)
class ZeroFrequencyRate:
    """gamma(0) = (2 pi / beta) lim F(w)/w, tagged by how the limit behaves."""

    status: ZeroStatus
    value: float

    def __float__(self):
        return self.value


def _gbar_of(gfun) -> float:
    """Accept a G callable from make_gfun, a Gbar number, or the constants 0/1 meaning G = 0/1."""
    if callable(gfun):
        return gfun.gbar
    return float(gfun)


def G_const(value: float):
    """Stand-in for the limiting frames: 1 -> full polaron, 0 -> untransformed."""
    return 0.0 if value == 1 else math.inf


def occupation(omega, beta):
    """1/|1 - exp(-beta w)|: n~ for w > 0 and n(|w|) for w < 0."""
    w = np.asarray(omega, dtype=float)
    if math.isinf(beta):
        return (w > 0).astype(float)
    with np.errstate(divide="ignore"):
        return 1.0 / np.abs(np.expm1(-beta * w))


def spectrum_two_sided(F, beta):
    """s_F(w) = F(|w|) occupation(w) as a vectorised callable."""
    def s(w):
        w = np.asarray(w, dtype=float)
        return F(np.abs(w)) * occupation(w, beta)
    return s


def _scalar(f):
    return lambda w: float(f(w))


def _pv_line(s, nu, scale, upper, cfg, halfwidth=None):
    """P int_{-upper}^{upper} s(w)/(nu - w) dw with breakpoints at 0 and the bath scale."""
    bps = (0.0, -scale, scale, -3 * scale, 3 * scale, -0.01 * scale, 0.01 * scale)
    sf = _scalar(s)
    if nu == 0:
        # odd kernel: fold onto (0, upper)
        g = lambda w: (sf(-w) - sf(w)) / w
        return integrate_semiinfinite(g, cfg, (0.01 * scale, scale, 3 * scale), 0.0, upper)
    hw = halfwidth if halfwidth is not None else abs(nu)
    return principal_value(sf, nu, cfg, -upper, upper, bps, halfwidth=hw)


# ---------------------------------------------------------------- single phonon

def zero_frequency_rate(F, beta, slope: float | None = None, scale: float = 1.0) -> ZeroFrequencyRate:
    """(2 pi/beta) lim_{w->0} F(w)/w with a tri-state tag.

    ``slope`` is the exact limit when known; otherwise F(w)/w is probed at
    w = 1e-7 and 1e-9 times ``scale``.
    """
    if math.isinf(beta):
        return ZeroFrequencyRate(ZeroStatus.ZERO, 0.0)
    if slope is None and hasattr(F, "slope_at_zero"):
        slope = F.slope_at_zero()
    if slope is None:
        a, b = 1e-7 * scale, 1e-9 * scale
        ra, rb = float(F(a)) / a, float(F(b)) / b
        if rb > 10 * max(ra, 1e-300) and rb > 0:
            slope = math.inf
        elif rb < 1e-6 * max(ra, 1e-300) or (ra == 0 and rb == 0) or rb < 0.5 * ra:
            slope = 0.0 if rb < 1e-3 * max(ra, 1e-300) or rb == 0 else rb
        else:
            slope = rb
    if slope == 0:
        return ZeroFrequencyRate(ZeroStatus.ZERO, 0.0)
    if math.isinf(slope):
        return ZeroFrequencyRate(ZeroStatus.DIVERGENT, math.inf)
    return ZeroFrequencyRate(ZeroStatus.FINITE, 2.0 * math.pi * slope / beta)


def gamma1_s1(F, beta, nu, cfg: QuadratureConfig = DEFAULT, scale: float = 6e-3,
              upper: float | None = None, slope: float | None = None) -> HalfFourier:
    """One-phonon transform of density F: value = gamma_1/2 + i S_1.

    gamma_1(nu) = 2 pi F(nu) n~ (nu > 0), 2 pi F(|nu|) n (nu < 0);
    S_1(nu) = P int F [n~/(nu - w) + n/(nu + w)] dw.
    At nu = 0 the rate uses the tagged limit stored in ``meta['zero']``.
    """
    upper = upper or 12 * scale
    s = spectrum_two_sided(F, beta)
    nu = float(nu)
    meta = {}
    if nu == 0:
        z = zero_frequency_rate(F, beta, slope, scale)
        meta["zero"] = z
        rate = z.value
    else:
        rate = 2 * math.pi * float(s(nu))
    shift = _pv_line(s, nu, scale, upper, cfg)
    return HalfFourier(np.asarray(nu), np.asarray(0.5 * rate + 1j * shift), 0.0, meta)


def m_functional(F, beta, nu, sign: int = +1, cfg: QuadratureConfig = DEFAULT,
                 scale: float = 6e-3, upper: float | None = None) -> complex:
    """M+/- functional: Re = pi(+/- F n~) for nu >= 0, pi F(-nu) n(-nu) for nu < 0;
    Im = P int F [+/- n~/(nu - w) + n/(nu + w)] dw."""
    upper = upper or 12 * scale
    sgn = 1.0 if sign > 0 else -1.0

    def s(w):
        w = np.asarray(w, dtype=float)
        base = F(np.abs(w)) * occupation(w, beta)
        return np.where(w > 0, sgn * base, base)

    nu = float(nu)
    if nu > 0:
        re = math.pi * sgn * float(F(nu)) * float(occupation(nu, beta))
    elif nu < 0:
        re = math.pi * float(F(-nu)) * float(occupation(nu, beta))
    else:
        z = zero_frequency_rate(F, beta, None, scale)
        re = sgn * 0.5 * z.value
    im = _pv_line(s, nu, scale, upper, cfg)
    return complex(re, im)


def _frame_factor(gbar, beta, nu):
    """(1 - G + nu G/w)^2 on the real line, with G evaluated at |w|."""
    def f(w):
        w = np.asarray(w, dtype=float)
        aw = np.abs(w)
        H = one_minus_g(gbar, beta, aw)
        if gbar == 0:
            g_over_w = 1.0 / aw
        elif math.isinf(gbar):
            g_over_w = np.zeros_like(aw)
        else:
            t = np.tanh(0.5 * beta * aw) if math.isfinite(beta) else 1.0
            g_over_w = t / (aw * t + gbar)
        return (H + nu * np.sign(w) * g_over_w) ** 2
    return f


def s1v(sd: SpectralDensity, gfun, beta, nu, cfg: QuadratureConfig = DEFAULT) -> float:
    """Variational one-phonon Lamb-shift function.

    S_1^v(nu) = P int J [n~ Gf(nu, w)/(nu - w) + n Gf(-nu, w)/(nu + w)] dw,
    Gf(nu, w) = (1 + (nu/w - 1) G(w))^2. Reduces to S_1 for G = 0.
    """
    gbar = _gbar_of(gfun)
    frame = _frame_factor(gbar, beta, float(nu))
    base = spectrum_two_sided(sd, beta)
    s = lambda w: base(w) * frame(w)
    return _pv_line(s, float(nu), sd.omega_0, sd.upper, cfg)


def gamma1v(sd: SpectralDensity, gfun, beta, nu, cfg: QuadratureConfig = DEFAULT) -> HalfFourier:
    """Combined one-phonon channel of the variational frame at frequency nu.

    The displacement, mixed and polaron parts add up to the bare J at the
    transition frequency, so the rate is gamma_1(nu) for nu != 0 and the
    displacement-only limit at nu = 0. The shift is S_1^v(nu).
    """
    gbar = _gbar_of(gfun)
    nu = float(nu)
    meta = {}
    if nu == 0:
        z = zero_frequency_rate(None, beta, _displacement_slope(sd, gbar), sd.omega_0)
        meta["zero"] = z
        rate = z.value
    else:
        rate = 2 * math.pi * float(sd(abs(nu))) * float(occupation(nu, beta))
    shift = s1v(sd, gbar, beta, nu, cfg)
    return HalfFourier(np.asarray(nu), np.asarray(0.5 * rate + 1j * shift), 0.0, meta)


def _displacement_slope(sd: SpectralDensity, gbar: float) -> float:
    """lim J (1-G)^2 / w: the bare slope times (1 - G(0))^2, with G(0) = 0 unless Gbar = 0."""
    if gbar == 0:
        return 0.0
    return sd.slope_at_zero()


# ------------------------------------------------------------- propagator grid

@dataclass(frozen=True, eq=False)
class PropagatorGrid:
    """Propagators on a uniform time grid together with their mode spectra.

    ``tau`` runs over [0, tau_max]; the grid is the positive half of a periodic
    FFT grid, phi(-t) = conj(phi(t)). ``phi_infinity`` is the part of the
    polaron weight concentrated at vanishing frequency, treated as a constant
    tail (an elastic delta(nu) component after transformation).
    """

    tau: np.ndarray
    phi: np.ndarray
    phi_d: np.ndarray | None
    phi_infinity: complex
    beta: float
    d_omega: float
    log_weights: np.ndarray = field(repr=False)  # log of polaron mode weights, FFT order
    omega: np.ndarray = field(repr=False)         # mode frequencies, FFT order
    gbar: float = 0.0
    omega_0: float = 1.0

    @property
    def samples(self) -> int:
        return len(self.omega)

    @property
    def h(self) -> float:
        return self.tau[1] - self.tau[0]


def _cell_weight(F, beta, half, gbar, scale):
    """int_{-half}^{half} s_F = int_0^half F coth(beta w/2) dw, resolving the G crossover."""
    wg = crossover_frequency(gbar, beta)
    pts = [wg * 10.0 ** k for k in range(-3, 4)] if wg > 0 else []
    pts += [half * 10.0 ** k for k in range(-8, 0)]
    cfg = QuadratureConfig(rel_tol=1e-12, abs_tol=0.0, max_subdivisions=800)
    f = lambda w: float(F(w)) * float(coth_half(beta, w))
    return integrate_semiinfinite(f, cfg, pts, 0.0, half)


def _mode_weights(sd, gbar, beta, omega, d_omega, kind):
    """Log mode weights (FFT order) and the excess zero-frequency weight."""
    aw = np.abs(omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        logJ = sd.log(aw)
        if kind == "P":
            if gbar == 0:
                logf = np.zeros_like(aw)
            elif math.isinf(gbar):
                logf = np.full_like(aw, -np.inf)
            else:
                logf = 2 * np.log(g_of_omega(gbar, beta, aw))
        else:
            logf = 2 * np.log(one_minus_g(gbar, beta, aw))
        logocc = -np.log(np.abs(np.expm1(-beta * omega)))
        logw = logJ + logf - 2 * np.log(aw) + logocc + math.log(d_omega)
    logw[0] = -np.inf
    if kind == "P":
        F = lambda w: sd(w) * g_of_omega(gbar, beta, w) ** 2 / np.asarray(w) ** 2
    else:
        F = lambda w: sd(w) * one_minus_g(gbar, beta, w) ** 2 / np.asarray(w) ** 2
    if (not sd.is_table and sd.A == 0) or (kind == "P" and math.isinf(gbar)) or (kind == "D" and gbar == 0):
        return logw, 0.0
    if kind == "P" and 0 < gbar < math.inf and crossover_frequency(gbar, beta) < 10 * d_omega:
        _notch_correction(sd, gbar, beta, omega, d_omega, logw)
    w0 = _cell_weight(F, beta, 0.5 * d_omega, gbar, sd.omega_0)
    smooth = 0.5 * (math.exp(logw[1]) + math.exp(logw[-1]))
    excess = w0 - smooth
    tail = 0.0
    if excess > 0.01 * w0:
        tail = excess
        logw[0] = math.log(smooth) if smooth > 0 else -np.inf
    else:
        logw[0] = math.log(w0) if w0 > 0 else -np.inf
    return logw, tail


def _notch_correction(sd, gbar, beta, omega, d_omega, logw, cells=64):
    """Replace point samples by cell integrals for the part of the weight removed by G.

    For small Gbar the factor G^2 carves a notch of width ~ sqrt(Gbar/beta)
    around w = 0 whose 1/w^2 flanks reach the first grid cells; the smooth
    remainder keeps its (spectrally accurate) point samples.
    """
    import warnings

    def notch(x):
        ax = abs(x)
        smooth = float(sd(ax)) / (x * x) / abs(math.expm1(-beta * x))
        G = float(g_of_omega(gbar, beta, ax))
        return smooth * float(one_minus_g(gbar, beta, ax)) * (1 + G)

    L = len(omega)
    for j in list(range(1, cells + 1)) + list(range(-cells, 0)):
        lo, hi = (j - 0.5) * d_omega, (j + 0.5) * d_omega
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            cell = integrate.quad(notch, lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)[0]
        k = j % L
        val = math.exp(logw[k]) + d_omega * notch(j * d_omega) - cell
        logw[k] = math.log(val) if val > 0 else -np.inf


def _fft_phi(logw):
    m = np.max(logw)
    if not np.isfinite(m):
        return np.zeros(len(logw), dtype=complex), 0.0
    return np.fft.fft(np.exp(logw - m)), m


def phi(sd: SpectralDensity, gfun, beta, tau_grid=None, cfg: QuadratureConfig = DEFAULT,
        with_displacement: bool = True) -> PropagatorGrid:
    """Polaron propagator phi(t) (and displacement propagator phi_D) on the FFT grid.

    ``tau_grid`` may be a (tau_max, samples) pair; by default the quadrature
    config (or the bath-derived tau_max) is used.
    """
    gbar = _gbar_of(gfun)
    if tau_grid is not None:
        tau_max, samples = tau_grid
    else:
        tau_max = cfg.tau_max or default_tau_max(sd.omega_0, beta)
        samples = cfg.samples
    L = int(samples)
    d_omega = math.pi / tau_max
    omega = np.fft.fftfreq(L, d=1.0 / (L * d_omega))
    h = 2.0 * math.pi / (L * d_omega)
    half = L // 2
    tau = h * np.arange(half + 1)
    if gbar == 0 and not sd.is_table and sd.p <= 2 and sd.A > 0:
        raise InfraredDivergenceError("polaron propagator diverges for G = 1 with p <= 2")
    logw, tail = _mode_weights(sd, gbar, beta, omega, d_omega, "P")
    ph, m = _fft_phi(logw)
    ph = ph * math.exp(m) + tail if np.isfinite(m) else ph + tail
    phid = None
    if with_displacement:
        try:
            logd, taild = _mode_weights(sd, gbar, beta, omega, d_omega, "D")
            pd, md = _fft_phi(logd)
            phid = (pd * math.exp(md) if np.isfinite(md) else pd) + taild
            phid = phid[: half + 1]
        except (ArithmeticError, RuntimeError):
            phid = None
    return PropagatorGrid(tau=tau, phi=ph[: half + 1], phi_d=phid, phi_infinity=complex(tail),
                          beta=beta, d_omega=d_omega, log_weights=logw, omega=omega,
                          gbar=gbar, omega_0=sd.omega_0)


def phi_displacement(sd: SpectralDensity, gfun, beta, tau_grid=None,
                     cfg: QuadratureConfig = DEFAULT) -> PropagatorGrid:
    """Displacement propagator phi_D (weight J (1-G)^2/w^2), stored in ``phi_d``."""
    return phi(sd, gfun, beta, tau_grid, cfg, with_displacement=True)


# ------------------------------------------------------------ multi-phonon

def _tilt_for(nu, m, omega_0):
    # saddle point of a Gaussian-cutoff m-phonon convolution at total energy nu
    return 2.0 * nu / (m * omega_0 ** 2)


def _rho_m(grid: PropagatorGrid, m: int, nu: float, tilt: float | None = None) -> float:
    """m-fold convolution density rho_m(nu) of the polaron mode spectrum.

    Evaluated with an exponentially tilted FFT and 6-point interpolation of
    log rho between grid frequencies.
    """
    if tilt is None:
        tilt = _tilt_for(nu, m, grid.omega_0)
    dw = grid.d_omega
    logw = grid.log_weights + tilt * grid.omega
    mx = np.max(logw)
    if not np.isfinite(mx):
        return 0.0
    ph = np.fft.fft(np.exp(logw - mx))
    c = grid.phi_infinity.real * math.exp(-mx)
    if c != 0:
        f = (ph + c) ** m - c ** m
    else:
        f = ph ** m
    spec = np.fft.ifft(f).real / dw  # tilted density scaled by exp(-m mx)
    L = len(spec)
    k0 = int(math.floor(nu / dw))
    ks = np.arange(k0 - 2, k0 + 4)
    om = ks * dw
    vals = spec[ks % L]
    scale = m * mx
    if np.all(vals > 0):
        lv = np.log(vals) - tilt * om
        coef = np.polyfit(om - nu, lv, len(ks) - 1)
        return math.exp(np.polyval(coef, 0.0) + scale)
    # far beyond the support or roundoff-level values: linear interpolation of the raw values
    vals = vals * np.exp(-tilt * om)
    return max(0.0, float(np.interp(nu, om, vals)) * math.exp(scale))


def _shift_m(grid: PropagatorGrid, m: int, nus) -> np.ndarray:
    """Im of the half-line transform of phi^m (elastic constant removed)."""
    c = grid.phi_infinity
    vals = grid.phi ** m
    if c != 0:
        vals = vals - c ** m
    hf = half_line_samples(grid.tau, vals, nus, tail="zero")
    return np.imag(hf.value)


def phi_power_fourier(grid: PropagatorGrid, m_list, nu_grid) -> dict:
    """Half-line transforms of phi^m: {m: HalfFourier over nu_grid}.

    Real part pi rho_m(nu); imaginary part from the time-domain half-line sum;
    a constant tail phi_inf gives the elastic weight pi phi_inf^m.
    """
    nus = np.atleast_1d(np.asarray(nu_grid, dtype=float))
    out = {}
    for m in m_list:
        if m < 1:
            raise ValueError("powers start at m = 1")
        re = np.array([math.pi * _rho_m(grid, m, nu) for nu in nus])
        im = _shift_m(grid, m, nus)
        spike = math.pi * float((grid.phi_infinity ** m).real)
        out[m] = HalfFourier(nus, re + 1j * im, spike)
    return out


def two_phonon_direct(sd: SpectralDensity, gfun, beta, nu, cfg: QuadratureConfig | None = None,
                      parts: bool = False):
    """Two-phonon density rho_2(nu) = Re Phi_2(nu)/pi as three convolution integrals.

    I1: two emissions sharing nu; I2: emission of w > nu with absorption of
    w - nu; I3: absorption of w with emission of nu + w. ``parts=True``
    returns the tuple (I1, I2, I3) instead of the sum.
    """
    if nu <= 0:
        raise ValueError("two_phonon_direct needs nu > 0")
    gbar = _gbar_of(gfun)
    cfg = cfg or QuadratureConfig(rel_tol=1e-10, abs_tol=0.0, max_subdivisions=1000)
    JP = lambda w: float(sd(w)) * float(g_of_omega(gbar, beta, w)) ** 2 / (w * w) if w > 0 else 0.0
    nt = lambda w: float(occupation(w, beta))            # n~ for w > 0
    n = lambda w: float(occupation(-w, beta))            # n for w > 0
    upper = sd.upper + nu
    w0 = sd.omega_0
    pts = [0.01 * w0, 0.5 * nu, w0, nu, nu + w0]
    i1 = integrate_semiinfinite(lambda w: JP(w) * nt(w) * JP(nu - w) * nt(nu - w), cfg,
                                pts, 0.0, nu)
    i2 = integrate_semiinfinite(lambda w: JP(w) * nt(w) * JP(w - nu) * n(w - nu), cfg,
                                pts, nu, upper)
    i3 = integrate_semiinfinite(lambda w: JP(w) * n(w) * JP(nu + w) * nt(nu + w), cfg,
                                pts, 0.0, upper)
    if parts:
        return i1, i2, i3
    return i1 + i2 + i3


_SETS = {
    "polariton_dark": (2, 1),        # all m >= 2
    "polariton_polariton": (3, 2),   # odd m >= 3
    "even": (2, 2),
    "odd": (3, 2),
    "all": (2, 1),
}


def gamma_multi(grid: PropagatorGrid, nu, transition_class: str = "polariton_dark",
                max_order: int | None = 6, prefactor: float | None = None,
                adaptive: bool = True, guard: float = 0.01, cap: int = 40) -> HalfFourier:
    """Multi-phonon transform pref * sum_{m in set} Phi_m(nu)/m!.

    ``prefactor`` defaults to nu^2 (the main-text normalisation); pass
    Omega_r^2 for the normalisation used in the general (non-resonant) forms.
    The series starts truncated at ``max_order``; when the last included term
    exceeds ``guard`` of the partial sum the order is raised (adaptive) up to
    ``cap`` or a TruncationError is raised. ``meta`` carries the even and odd
    partial sums, the order used and the per-order terms.
    """
    nu = float(nu)
    start, step = _SETS[transition_class]
    pref = nu * nu if prefactor is None else prefactor
    M = max_order if max_order is not None else 6
    terms = {}
    if M < start:
        meta = {"order": M, "even": 0j, "odd": 0j, "terms": {}, "converged": True}
        return HalfFourier(np.asarray(nu), np.asarray(0j), 0.0, meta)
    m = start
    while True:
        if m not in terms:
            re = math.pi * _rho_m(grid, m, nu) / math.factorial(m)
            im = float(_shift_m(grid, m, [nu])[0]) / math.factorial(m)
            terms[m] = complex(re, im)
        if m + step > M:
            total_re = sum(v.real for v in terms.values())
            last = terms[max(terms)].real
            ok = total_re == 0 or abs(last) <= guard * abs(total_re)
            if ok:
                break
            if adaptive and M < cap:
                M += 1
                m += step
                continue
            if adaptive:
                raise TruncationError(f"multi-phonon series at nu={nu:.4g} not converged by order {M}")
            break
        m += step
    even = sum((v for k, v in terms.items() if k % 2 == 0), 0j)
    odd = sum((v for k, v in terms.items() if k % 2 == 1), 0j)
    total = even + odd
    last = terms[max(terms)].real
    meta = {"order": max(terms), "even": pref * even, "odd": pref * odd,
            "terms": {k: pref * v for k, v in terms.items()},
            "converged": total.real == 0 or abs(last) <= guard * abs(total.real)}
    return HalfFourier(np.asarray(nu), np.asarray(pref * total), 0.0, meta)


def multi_phonon_parts(grid: PropagatorGrid, nu: float, max_order: int | None = None,
                       guard: float = 0.01, cap: int = 40) -> dict:
    """Even (m >= 2) and odd (m >= 3) sums of Phi_m(nu)/m!, without prefactor.

    Returns {'even': complex, 'odd': complex, 'order': int, 'converged': bool}.
    ``max_order=None`` extends the series until the guard is met.
    """
    hf = gamma_multi(grid, nu, "all", max_order if max_order is not None else 6, prefactor=1.0,
                     adaptive=max_order is None, guard=guard, cap=cap)
    return {"even": hf.meta["even"], "odd": hf.meta["odd"], "order": hf.meta["order"],
            "converged": hf.meta["converged"]}


def gamma_phi_multi(grid: PropagatorGrid, g: float, frak_b: float) -> HalfFourier:
    """g^2 B^2 int_0^inf (cosh phi - 1) dt, all even orders at once.

    The real part comes from the full-line FFT of cosh(phi) - 1 at zero
    frequency; a constant tail cosh(phi_inf) - 1 is reported as ``delta_spike``.
    """
    pref = g * g * frak_b * frak_b
    dw = grid.d_omega
    logw = grid.log_weights
    mx = np.max(logw)
    if not np.isfinite(mx):
        return HalfFourier(np.asarray(0.0), np.asarray(0j), 0.0)
    ph = np.fft.fft(np.exp(logw - mx)) * math.exp(mx) + grid.phi_infinity
    c = grid.phi_infinity
    f = np.cosh(ph) - np.cosh(c)
    rho0 = float(np.fft.ifft(f)[0].real) / dw
    vals = np.cosh(grid.phi) - np.cosh(c)
    im = float(np.imag(half_line_samples(grid.tau, vals, [0.0], tail="zero").value[0]))
    spike = math.pi * pref * float((np.cosh(c) - 1).real)
    return HalfFourier(np.asarray(0.0), np.asarray(pref * complex(math.pi * rho0, im)), spike)


def gamma_phi_leading(sd: SpectralDensity, gfun, beta, g: float, frak_b: float,
                      cfg: QuadratureConfig | None = None) -> float:
    """Leading (two-phonon) dephasing rate 2 pi g^2 B^2 int J_P^2 n (1 + n) dw."""
    gbar = _gbar_of(gfun)
    cfg = cfg or QuadratureConfig(rel_tol=1e-10, abs_tol=0.0)

    def f(w):
        jp = float(sd(w)) * float(g_of_omega(gbar, beta, w)) ** 2 / (w * w)
        n = 1.0 / math.expm1(beta * w)
        return jp * jp * n * (1 + n)

    pts = list(sd.breakpoints())
    wg = crossover_frequency(gbar, beta)
    if wg > 0:
        pts += [wg * 10.0 ** k for k in range(-3, 4)]
    val = integrate_semiinfinite(f, cfg, pts, 0.0, sd.upper)
    return 2 * math.pi * g * g * frak_b * frak_b * val


# ----------------------------------------------------- non-Markovian kernels

def _qawo(f, a, b, omega_t, kind, cfg=None):
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(f, a, b, weight=kind, wvar=omega_t, epsabs=0.0,
                              epsrel=1e-12, limit=2000)[0]


def _displacement_weight(sd, gbar, beta):
    """w -> J (1-G)^2 coth(beta w/2) / w^2."""
    def f(w):
        return float(sd(w)) * float(one_minus_g(gbar, beta, w)) ** 2 * float(coth_half(beta, w)) / (w * w)
    return f


def gamma1_nonmarkov(sd: SpectralDensity, gfun, beta, tau) -> float:
    """Time-dependent zero-frequency rate 2 int J (1-G)^2 coth(beta w/2) sin(w tau)/w dw."""
    gbar = _gbar_of(gfun)
    tau = float(tau)
    if tau == 0:
        return 0.0
    w = _displacement_weight(sd, gbar, beta)
    f = lambda x: w(x) * x if x > 0 else 2.0 * _zero_limit(sd, gbar, beta)
    lower = sd.table[0][0] if sd.is_table else 0.0
    return 2.0 * _qawo(f, lower, sd.upper, tau, "sin")


def _zero_limit(sd, gbar, beta):
    """lim_{w->0} J(1-G)^2 coth/w^... times w, i.e. (2/beta) lim J (1-G)^2/w / 2."""
    return _displacement_slope(sd, gbar) / beta


def decoherence_exponent(sd: SpectralDensity, gfun, beta, t) -> float:
    """E(t) = int J (1-G)^2/w^2 coth(beta w/2) (1 - cos w t) dw = -Re[phi_D(t) - phi_D(0)].

    ``t = inf`` returns the plateau int J (1-G)^2/w^2 coth, or inf when it diverges.
    """
    gbar = _gbar_of(gfun)
    w = _displacement_weight(sd, gbar, beta)
    lower = sd.table[0][0] if sd.is_table else 0.0
    upper = sd.upper
    cfg = QuadratureConfig(rel_tol=1e-12, abs_tol=0.0, max_subdivisions=2000)
    t = float(t)
    if t == 0:
        return 0.0
    if math.isinf(t):
        try:
            return integrate_semiinfinite(w, cfg, sd.breakpoints(), lower, upper) if lower > 0 else \
                _plateau(w, sd, cfg)
        except (ArithmeticError, RuntimeError):
            return math.inf
    split = min(max(1.0 / t, lower), upper)
    low = 0.0
    if split > lower:
        low = integrate_semiinfinite(lambda x: w(x) * 2.0 * math.sin(0.5 * x * t) ** 2, cfg,
                                     [split * 10.0 ** k for k in range(-6, 0)], lower, split)
    if split >= upper:
        return low
    pts = [p for p in sd.breakpoints() if split < p < upper]
    flat = integrate_semiinfinite(w, cfg, pts, split, upper)
    osc = _qawo(w, split, upper, t, "cos")
    return low + flat - osc


def _plateau(w, sd, cfg):
    from .spectral import probe_divergence
    return probe_divergence(w, sd.omega_0, sd.upper, cfg)


def decoherence_factor(a: float, N: float, t, phi_d_grid=None, exponent=None) -> np.ndarray:
    """D_{a,N}(t) = exp(-E(t)/(a N)), E = -Re[phi_D(t) - phi_D(0)] >= 0.

    Pass either a PropagatorGrid (E read off its phi_d samples, linear
    interpolation in t) or ``exponent``, a callable t -> E(t).
    """
    t = np.asarray(t, dtype=float)
    if exponent is not None:
        E = np.vectorize(lambda x: exponent(x))(t)
    else:
        g = phi_d_grid
        if g is None or g.phi_d is None:
            raise ValueError("need a displacement propagator grid or an exponent callable")
        re = np.real(g.phi_d)
        E = np.interp(t, g.tau, re[0] - re)
    return np.exp(-np.asarray(E) / (a * N))


# ------------------------------------------------------------ cached bundle

def _key(nu):
    return float(f"{float(nu):.14e}")


class BathFunctions:
    """Correlation transforms for one variational frame, cached per frequency.

    Bundles what the rate formulas need: the single-phonon rate and shift
    (bare gamma_1 with S_1^v), the multi-phonon even/odd sums of Phi_m/m!
    and the multi-phonon dephasing transform. ``gbar = inf`` gives the
    untransformed (weak-coupling) frame, where S_1^v = S_1 and every
    multi-phonon term vanishes.

    ``max_order=None`` extends the multi-phonon series until converged;
    an integer truncates it there.
    """

    def __init__(self, sd: SpectralDensity, beta: float, gbar: float, g: float, frak_b: float,
                 cfg: QuadratureConfig = DEFAULT, max_order: int | None = None, tau_grid=None):
        self.sd, self.beta, self.gbar = sd, beta, float(gbar)
        self.g, self.frak_b = g, frak_b
        self.cfg, self.max_order, self.tau_grid = cfg, max_order, tau_grid
        self._grid = None
        self._one, self._multi, self._m = {}, {}, {}
        self._phi = None
        self._dens = None

    @classmethod
    def from_solution(cls, sd, params, sol, **kw) -> "BathFunctions":
        return cls(sd, params.beta, sol.gbar, params.g, sol.frak_b, **kw)

    @classmethod
    def weak_coupling(cls, sd, params, **kw) -> "BathFunctions":
        return cls(sd, params.beta, math.inf, params.g, 1.0, **kw)

    @property
    def polaron(self) -> bool:
        return math.isfinite(self.gbar)

    @property
    def grid(self) -> PropagatorGrid:
        if self._grid is None:
            self._grid = phi(self.sd, self.gbar, self.beta, self.tau_grid, self.cfg,
                             with_displacement=False)
        return self._grid

    def one_phonon(self, nu) -> HalfFourier:
        """Rate gamma_1(nu) and shift S_1^v(nu) (S_1 in the weak-coupling frame)."""
        k = _key(nu)
        if k not in self._one:
            self._one[k] = gamma1v(self.sd, self.gbar, self.beta, k, self.cfg)
        return self._one[k]

    def zero(self) -> ZeroFrequencyRate:
        return self.one_phonon(0.0).meta["zero"]

    def multi(self, nu) -> dict:
        """Even (m >= 2) and odd (m >= 3) sums of Phi_m(nu)/m! without prefactor."""
        k = _key(nu)
        if k not in self._multi:
            if not self.polaron:
                self._multi[k] = {"even": 0j, "odd": 0j, "order": 0, "converged": True}
            else:
                self._multi[k] = multi_phonon_parts(self.grid, k, self.max_order)
        return self._multi[k]

    def dephasing(self) -> HalfFourier:
        """g^2 B^2 int (cosh phi - 1): multi-phonon dephasing rate and virtual shift."""
        if self._phi is None:
            if not self.polaron:
                self._phi = HalfFourier(np.asarray(0.0), np.asarray(0j), 0.0)
            elif self.max_order is not None:
                # truncated even series, consistent with the transition sums
                parts = multi_phonon_parts(self.grid, 0.0, self.max_order)
                val = self.g ** 2 * self.frak_b ** 2 * parts["even"]
                self._phi = HalfFourier(np.asarray(0.0), np.asarray(val), 0.0)
            else:
                self._phi = gamma_phi_multi(self.grid, self.g, self.frak_b)
        return self._phi

    # route through the displacement / mixed / polaron functionals (oracle use)
    def densities(self):
        if self._dens is None:
            from .spectral import derived_densities
            from .variational import make_gfun
            G = make_gfun(self.gbar, self.beta) if self.polaron else (lambda w: 0.0 * np.asarray(w))
            self._dens = derived_densities(self.sd, G, self.beta)
        return self._dens

    def m_channels(self, nu) -> tuple[complex, complex, complex]:
        """(M+[J_D], M-[J_V], M+[J_P]) at nu."""
        k = _key(nu)
        if k not in self._m:
            d = self.densities()
            kw = dict(scale=self.sd.omega_0, upper=self.sd.upper, cfg=self.cfg)
            self._m[k] = (m_functional(d.J_D, self.beta, k, +1, **kw),
                          m_functional(d.J_V, self.beta, k, -1, **kw) if self.polaron else 0j,
                          m_functional(d.J_P, self.beta, k, +1, **kw) if self.polaron else 0j)
        return self._m[k]
