"""Self-consistent variational polaron transformation.

The mode-resolved displacement weights are G(w) = w / (w + Gbar coth(beta w/2)),
parametrised by a single energy Gbar that is a fixed point of the closed-form
optimality condition. Among several fixed points the one with the lowest
free-energy bound is selected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .params import PhysicalParams, ResonanceConvention
from .quadrature import QuadratureConfig, integrate_semiinfinite
from .spectral import InfraredDivergenceError, SpectralDensity, coth_half, reorganization_energy

# relative-accuracy integration for quantities that can be tiny (Delta ~ 1e-20 eV)
_REL = QuadratureConfig(rel_tol=1e-11, abs_tol=0.0, max_subdivisions=800)


class SolverError(RuntimeError):
    """The fixed-point search failed; ``diagnostics`` carries the scan."""

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


def g_of_omega(gbar: float, beta: float, omega):
    """G(w) = w/(w + Gbar coth(beta w/2)), written as x/(x + Gbar) with x = w tanh(beta w/2)."""
    w = np.abs(np.asarray(omega, dtype=float))
    if gbar == 0:
        return np.ones_like(w)
    if math.isinf(gbar):
        return np.zeros_like(w)
    x = w * (np.tanh(0.5 * beta * w) if math.isfinite(beta) else 1.0)
    return x / (x + gbar)


def one_minus_g(gbar: float, beta: float, omega):
    """1 - G(w) = Gbar/(x + Gbar), free of cancellation when G is close to 1."""
    w = np.abs(np.asarray(omega, dtype=float))
    if gbar == 0:
        return np.zeros_like(w)
    if math.isinf(gbar):
        return np.ones_like(w)
    x = w * (np.tanh(0.5 * beta * w) if math.isfinite(beta) else 1.0)
    return gbar / (x + gbar)


def make_gfun(gbar: float, beta: float):
    def G(omega):
        return g_of_omega(gbar, beta, omega)
    G.gbar = gbar
    G.beta = beta
    return G


def crossover_frequency(gbar: float, beta: float) -> float:
    """Frequency where w tanh(beta w/2) = Gbar, i.e. where G = 1/2."""
    if gbar <= 0 or math.isinf(gbar):
        return 0.0
    small = math.sqrt(2.0 * gbar / beta)
    return small if small < 1.0 / beta else gbar + 0.0


def _breakpoints(sd: SpectralDensity, gbar: float, beta: float):
    pts = list(sd.breakpoints())
    wg = crossover_frequency(gbar, beta)
    if wg > 0:
        pts += [wg * 10.0 ** k for k in range(-3, 4)]
    return tuple(p for p in pts if 0 < p < sd.upper)


def _integral(sd, gbar, beta, weight, cfg):
    lower = sd.table[0][0] if sd.is_table else 0.0

    def f(w):
        return float(sd(w)) * weight(w, float(g_of_omega(gbar, beta, w)),
                                     float(one_minus_g(gbar, beta, w)))

    return integrate_semiinfinite(f, cfg, _breakpoints(sd, gbar, beta), lower=lower, upper=sd.upper)


def frak_b(sd: SpectralDensity, gbar: float, beta: float, cfg: QuadratureConfig = _REL) -> float:
    """Coupling suppression exp[-1/2 int J G^2/w^2 coth(beta w/2) dw]."""
    if not sd.is_table and sd.A == 0:
        return 1.0
    if math.isinf(gbar):
        return 1.0
    if gbar == 0 and not sd.is_table and sd.p <= 2 and math.isfinite(beta):
        raise InfraredDivergenceError("polaron exponent diverges for G = 1 with p <= 2")
    cb = (lambda w: 1.0) if math.isinf(beta) else (lambda w: 1.0 / math.tanh(0.5 * beta * w))
    expo = _integral(sd, gbar, beta, lambda w, G, H: G * G / (w * w) * cb(w), cfg)
    return math.exp(-0.5 * expo)


def lambda_v(sd: SpectralDensity, gbar: float, beta: float, cfg: QuadratureConfig = _REL) -> float:
    """Renormalisation energy int J/w G(2-G) dw."""
    if not sd.is_table and sd.A == 0:
        return 0.0
    if math.isinf(gbar):
        return 0.0
    return _integral(sd, gbar, beta, lambda w, G, H: G * (1.0 + H) / w, cfg)


def detuning_integral(sd: SpectralDensity, gbar: float, beta: float,
                      cfg: QuadratureConfig = _REL) -> float:
    """int J/w (1-G)^2 dw, the detuning under the measured resonance convention."""
    if not sd.is_table and sd.A == 0:
        return 0.0
    if gbar == 0:
        return 0.0
    if math.isinf(gbar):
        # G = 0: the full reorganization integral, by quadrature
        return reorganization_energy(sd, "quad", cfg)
    return _integral(sd, gbar, beta, lambda w, G, H: H * H / w, cfg)


def detuning(sd: SpectralDensity, gbar: float, beta: float, params: PhysicalParams | None = None,
             cfg: QuadratureConfig = _REL) -> float:
    """Polaron-frame detuning omega_m - lambda_v - omega_c.

    Under the measured convention (omega_c = omega_m - reorganization energy)
    this equals int J/w (1-G)^2, which is evaluated directly to keep relative
    accuracy when it is tiny.
    """
    if params is None or params.resonance is ResonanceConvention.MEASURED:
        return detuning_integral(sd, gbar, beta, cfg)
    reorg = reorganization_energy(sd) if not sd.is_table else reorganization_energy(sd, "quad")
    return params.omega_m - lambda_v(sd, gbar, beta, cfg) - params.cavity_energy(reorg)


@dataclass(frozen=True)
class FrameState:
    """Everything that follows from one value of Gbar."""

    gbar: float
    frak_b: float
    lambda_v: float
    delta: float
    omega_r: float
    theta: float


def frame_state(sd: SpectralDensity, params: PhysicalParams, gbar: float) -> FrameState:
    beta = params.beta
    b = frak_b(sd, gbar, beta)
    lv = lambda_v(sd, gbar, beta)
    d = detuning(sd, gbar, beta, params)
    om_r = params.Omega * b
    return FrameState(gbar, b, lv, d, om_r, math.hypot(d, 2.0 * om_r))


def _update_from_state(st: FrameState, N: float, beta: float) -> float:
    """Closed-form optimal Gbar given the frame quantities (log-domain safe).

    Numerator and denominator of
        (2 W^2/theta) sinh(x) / [(N-1) e^{-beta D/2} + cosh x - (D/theta) sinh x],
    x = beta theta/2, are both divided by e^x/2.
    """
    th, d, om = st.theta, st.delta, st.omega_r
    if th == 0:
        return 0.0
    x = 0.5 * beta * th
    em = math.exp(-2.0 * x)
    one_minus = -math.expm1(-2.0 * x)
    num = 2.0 * om * om / th * one_minus
    den = 2.0 * (N - 1) * math.exp(-0.5 * beta * d - x) + (1.0 + em) - d / th * one_minus
    return num / den


def gbar_update(sd: SpectralDensity, params: PhysicalParams, gbar_in: float) -> float:
    """One application of the optimality map Gbar -> Gbar'."""
    return _update_from_state(frame_state(sd, params, gbar_in), params.N, params.beta)


def log_partition_single(theta: float, delta: float, N: float, beta: float) -> float:
    """log[2 cosh(beta theta/2) e^{-beta D/2} + (N-1) e^{-beta D}]."""
    x = 0.5 * beta * theta
    log2cosh = x + math.log1p(math.exp(-2.0 * x))
    terms = [log2cosh - 0.5 * beta * delta]
    if N > 1:
        terms.append(math.log(N - 1) - beta * delta)
    return float(np.logaddexp.reduce(terms))


def free_energy_fbp(sd: SpectralDensity, params: PhysicalParams, gbar: float,
                    nu_bar: float | None = None) -> float:
    """Free-energy upper bound in the one-photon truncation.

    Without ``nu_bar`` the value is -log(Z1)/beta, the part that depends on Gbar
    (the bath trace and the photon-energy offset are dropped; any offset gives
    a monotone function of Z1, so minimisers coincide). With ``nu_bar`` the
    full -log(1 + Z1 e^{-beta nu_bar})/beta is returned.
    """
    st = frame_state(sd, params, gbar)
    return _free_energy(st, params, nu_bar)


def _free_energy(st: FrameState, params: PhysicalParams, nu_bar=None) -> float:
    beta = params.beta
    lz = log_partition_single(st.theta, st.delta, params.N, beta)
    if nu_bar is None:
        return -lz / beta
    return -float(np.logaddexp(0.0, lz - beta * nu_bar)) / beta


def gbar0_resonant(g_r: float, beta: float) -> float:
    """Weak-coupling resonant Gbar with g_r = g * frak_b."""
    a = g_r * g_r * beta
    return 2.0 * a / (2.0 + a * beta)


def gbar0_general(delta: float, g_r: float, beta: float) -> float:
    """Weak-coupling Gbar at detuning delta; tends to the resonant form as delta -> 0."""
    if delta == 0:
        return gbar0_resonant(g_r, beta)
    nb = 1.0 / math.expm1(beta * delta)
    return delta / (1.0 + (delta * delta / (g_r * g_r) - beta * delta) * nb)


@dataclass(frozen=True)
class SolverConfig:
    damping: float = 0.5
    max_iter: int = 200
    tol: float = 1e-8
    scan_points: int = 64
    gbar_min: float = 1e-30
    upper_factor: float = 1e3


@dataclass(frozen=True)
class VariationalSolution:
    gbar: float
    frak_b: float
    delta: float
    lambda_v: float
    omega_r: float
    theta: float
    iterations: int
    residual: float
    f_fbp: float
    candidates: tuple = field(default=(), compare=False)

    def gfun(self, beta: float):
        return make_gfun(self.gbar, beta)


def _residual(st: FrameState, params) -> float:
    new = _update_from_state(st, params.N, params.beta)
    return (st.gbar - new) / max(st.gbar, 1e-30)


def _iterate(sd, params, x0, cfg: SolverConfig):
    """Damped fixed-point iteration in log Gbar with Aitken extrapolation."""
    def step(x):
        st = frame_state(sd, params, x)
        y = _update_from_state(st, params.N, params.beta)
        return x * (y / x) ** (1.0 - cfg.damping) if y > 0 else 0.0

    x = x0
    for it in range(1, cfg.max_iter + 1):
        x1 = step(x)
        if x1 <= 0:
            return None, it
        x2 = step(x1)
        if x2 <= 0:
            return None, it
        l0, l1, l2 = math.log(x), math.log(x1), math.log(x2)
        den = l2 - 2 * l1 + l0
        lx = l2 - (l2 - l1) ** 2 / den if den != 0 else l2
        x_new = math.exp(lx) if math.isfinite(lx) else x2
        if abs(math.log(x_new / x)) < 1e-12:
            return x_new, it
        x = x_new
    return None, cfg.max_iter


def solve_self_consistent(sd: SpectralDensity, params: PhysicalParams,
                          cfg: SolverConfig = SolverConfig()) -> VariationalSolution:
    """Find all fixed points of the Gbar map and return the lowest-F one.

    Roots are bracketed by scanning the sign of log(update(Gbar)/Gbar) on a
    log grid over [gbar_min, upper_factor * Omega], refined by Brent's method;
    the damped Aitken iteration from the weak-coupling estimate contributes a
    candidate as well.
    """
    beta, N = params.beta, params.N
    hi = cfg.upper_factor * params.Omega
    xs = np.geomspace(cfg.gbar_min, hi, cfg.scan_points)
    cache = {}

    def state(g):
        if g not in cache:
            cache[g] = frame_state(sd, params, g)
        return cache[g]

    def logres(lg):
        g = math.exp(lg)
        new = _update_from_state(state(g), N, beta)
        return math.log(new) - lg if new > 0 else -math.inf

    vals = [logres(math.log(x)) for x in xs]
    roots = []
    for i in range(len(xs) - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0:
            roots.append(xs[i])
        elif np.sign(a) != np.sign(b) and np.isfinite(a) and np.isfinite(b):
            lr = optimize.brentq(logres, math.log(xs[i]), math.log(xs[i + 1]),
                                 xtol=1e-14, rtol=1e-14, maxiter=200)
            roots.append(math.exp(lr))
    iters = 0
    try:
        st0 = state(cfg.gbar_min)
        guess = max(gbar0_resonant(params.g * st0.frak_b, beta), cfg.gbar_min)
        x_it, iters = _iterate(sd, params, guess, cfg)
        if x_it is not None and x_it >= cfg.gbar_min:
            roots.append(x_it)
    except (ArithmeticError, ValueError, OverflowError):
        pass
    if not roots:
        raise SolverError("no fixed point bracketed",
                          {"scan_gbar": xs.tolist(), "log_residual": vals})
    uniq = []
    for r in sorted(roots):
        if not uniq or abs(math.log(r / uniq[-1])) > 1e-6:
            uniq.append(r)
    cands = []
    for r in uniq:
        st = frame_state(sd, params, r)
        res = abs(_residual(st, params))
        cands.append((_free_energy(st, params), r, st, res))
    good = [c for c in cands if c[3] < cfg.tol]
    if not good:
        raise SolverError("fixed-point residual above tolerance",
                          {"candidates": [(c[1], c[3]) for c in cands]})
    f, r, st, res = min(good, key=lambda c: (c[0], c[1]))
    return VariationalSolution(
        gbar=r, frak_b=st.frak_b, delta=st.delta, lambda_v=st.lambda_v,
        omega_r=st.omega_r, theta=st.theta, iterations=iters, residual=res, f_fbp=f,
        candidates=tuple((c[1], c[0]) for c in good),
    )


def params_for_omega_r(sd: SpectralDensity, params: PhysicalParams, omega_r: float,
                       rounds: int = 6, cfg: SolverConfig = SolverConfig()):
    """Rescale N so the solved renormalised coupling equals ``omega_r``.

    Returns (params, solution). The map N -> Omega_r is monotone, so a few
    secant-like rounds on sqrt(N) suffice.
    """
    p = params.with_(N=max(2.0, (omega_r / params.g) ** 2))
    sol = solve_self_consistent(sd, p, cfg)
    for _ in range(rounds):
        if abs(sol.omega_r / omega_r - 1) < 1e-10:
            break
        n_new = max(2.0, p.N * (omega_r / sol.omega_r) ** 2)
        p = p.with_(N=n_new)
        sol = solve_self_consistent(sd, p, cfg)
    return p, sol
