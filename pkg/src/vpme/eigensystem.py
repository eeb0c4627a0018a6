"""Polariton, dark and ground eigenstates of the single-excitation
Tavis-Cummings model, their coefficient sums, and a small-N brute-force
oracle for the secular rates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DarkBasis", "NonResonantEigensystem", "dark_basis", "rebased", "coefficient_c",
    "coefficient_p", "coefficient_v", "polariton_amplitudes", "nonres_eigensystem",
    "tc_eigenstates", "channel_weights", "secular_coefficients", "bruteforce_secular",
]


@dataclass(frozen=True, eq=False)
class DarkBasis:
    """Site amplitudes u_{i alpha} = <e_i|alpha> of the single-excitation states.

    ``u`` holds the N-1 dark columns, ``u_pm`` the + and - columns.
    ``photon`` holds the photon amplitudes <G1|+>, <G1|->.
    """

    N: int
    u: np.ndarray
    u_pm: np.ndarray
    photon: tuple = (1 / math.sqrt(2), 1 / math.sqrt(2))

    @property
    def labels(self):
        return ["+", "-"] + [f"d{k}" for k in range(1, self.N)]

    def column(self, label: str) -> np.ndarray:
        if label == "+":
            return self.u_pm[:, 0]
        if label == "-":
            return self.u_pm[:, 1]
        if isinstance(label, str) and label.startswith("d"):
            try:
                k = int(label[1:])
            except ValueError:
                k = 0
            if 1 <= k < self.N:
                return self.u[:, k - 1]
        raise KeyError(f"invalid state label {label!r}")


def dark_basis(N: int, epsilon: float = 0.0) -> DarkBasis:
    """Discrete-Fourier dark states u_{id} = exp(2 pi i i d/N)/sqrt(N), d = 1..N-1.

    The polariton columns are uniform: +/- 1/sqrt(2N) at resonance, the
    detuned amplitudes U_+/- otherwise.
    """
    if int(N) != N or N < 2:
        raise ValueError("dark_basis needs an integer N >= 2")
    N = int(N)
    i = np.arange(N)[:, None]
    d = np.arange(1, N)[None, :]
    u = np.exp(2j * math.pi * i * d / N) / math.sqrt(N)
    Up, Um, cp, cm = polariton_amplitudes(N, epsilon)
    u_pm = np.column_stack([np.full(N, Up), np.full(N, Um)]).astype(complex)
    return DarkBasis(N, u, u_pm, (cp, cm))


def rebased(basis: DarkBasis, rng=None) -> DarkBasis:
    """Same manifold, dark columns mixed by a random unitary."""
    rng = np.random.default_rng(rng)
    n = basis.N - 1
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return DarkBasis(basis.N, basis.u @ q, basis.u_pm, basis.photon)


def coefficient_c(basis: DarkBasis, a, b, c, d) -> complex:
    """c_{abcd} = sum_i u_ia u*_ib u_ic u*_id."""
    ua, ub, uc, ud = (basis.column(x) for x in (a, b, c, d))
    return complex(np.sum(ua * ub.conj() * uc * ud.conj()))


def coefficient_p(basis: DarkBasis, a, b, sign: int) -> complex:
    """sum_i u_ia u*_ib for sign = +1, sum_i u_ia u_ib for sign = -1."""
    ua, ub = basis.column(a), basis.column(b)
    if sign > 0:
        return complex(np.sum(ua * ub.conj()))
    if sign < 0:
        return complex(np.sum(ua * ub))
    raise ValueError("sign must be +1 or -1")


def coefficient_v(basis: DarkBasis, a, b, c, kind: int) -> complex:
    """kind 1: sum_i u_ia u*_ib u_ic; kind 2: sum_i u_ia u*_ib u*_ic."""
    ua, ub, uc = (basis.column(x) for x in (a, b, c))
    if kind == 1:
        return complex(np.sum(ua * ub.conj() * uc))
    if kind == 2:
        return complex(np.sum(ua * ub.conj() * uc.conj()))
    raise ValueError("kind must be 1 or 2")


def polariton_amplitudes(N, epsilon: float = 0.0):
    """(U_+, U_-, <G1|+>, <G1|->) for detuning ratio epsilon = Delta/theta.

    The upper polariton carries matter weight (1 + eps)/2 and the lower
    (1 - eps)/2; U_+/- = +/-sqrt((1 +/- eps)/(2N)).
    """
    if not -1 < epsilon < 1:
        raise ValueError("epsilon must lie in (-1, 1)")
    Up = math.sqrt((1 + epsilon) / (2 * N))
    Um = -math.sqrt((1 - epsilon) / (2 * N))
    return Up, Um, math.sqrt((1 - epsilon) / 2), math.sqrt((1 + epsilon) / 2)


@dataclass(frozen=True)
class NonResonantEigensystem:
    """Detuned polaritons; energies are measured from the cavity energy omega_c."""

    N: float
    U_plus: float
    U_minus: float
    epsilon: float
    theta: float
    delta: float
    omega_plus: float
    omega_minus: float
    omega_d: float
    omega_c: float = 0.0

    @property
    def gap_plus_dark(self) -> float:
        return self.omega_plus - self.omega_d

    @property
    def gap_dark_minus(self) -> float:
        return self.omega_d - self.omega_minus


def nonres_eigensystem(params, sol) -> NonResonantEigensystem:
    """Eigensystem at the solved detuning: eps = Delta/theta, omega_pm = (Delta +/- theta)/2
    relative to the cavity, dark states at Delta."""
    from .spectral import SpectralDensity, reorganization_energy

    delta, theta = sol.delta, sol.theta
    eps = delta / theta
    Up, Um, _, _ = polariton_amplitudes(params.N, eps)
    try:
        wc = params.cavity_energy(reorganization_energy(SpectralDensity.from_params(params)))
    except Exception:
        wc = 0.0
    return NonResonantEigensystem(params.N, Up, Um, eps, theta, delta, 0.5 * (delta + theta),
                                  0.5 * (delta - theta), delta, wc)


# ---------------------------------------------------------------- oracle

@dataclass(frozen=True, eq=False)
class TCStates:
    """Explicit eigenvectors in the basis [|G,1>, |e_1,0>, ..., |e_N,0>]."""

    labels: list
    energies: dict
    vectors: dict

    @property
    def N(self) -> int:
        return len(next(iter(self.vectors.values()))) - 1


def tc_eigenstates(N: int, omega_r: float, delta: float = 0.0) -> TCStates:
    """Diagonalise the single-excitation Hamiltonian with collective coupling omega_r.

    The two states with photon weight are the polaritons; the degenerate
    dark manifold is expressed in the discrete-Fourier basis.
    """
    if N < 2:
        raise ValueError("need N >= 2")
    gr = omega_r / math.sqrt(N)
    H = np.zeros((N + 1, N + 1))
    H[1:, 1:] = np.eye(N) * delta
    H[0, 1:] = H[1:, 0] = gr
    w, v = np.linalg.eigh(H)
    bright = [k for k in range(N + 1) if abs(v[0, k]) > 1e-8]
    if len(bright) != 2:
        raise RuntimeError("could not identify the polariton pair")
    lo, hi = sorted(bright, key=lambda k: w[k])
    vecs, ens = {}, {}
    for lab, k in (("+", hi), ("-", lo)):
        vec = v[:, k].astype(complex)
        # phase: photon amplitude positive
        vec = vec * np.sign(vec[0].real)
        vecs[lab], ens[lab] = vec, float(w[k])
    db = dark_basis(N)
    for k in range(1, N):
        vecs[f"d{k}"] = np.concatenate([[0.0], db.u[:, k - 1]])
        ens[f"d{k}"] = float(delta)
    return TCStates(["+", "-"] + [f"d{k}" for k in range(1, N)], ens, vecs)


def channel_weights(states: TCStates, mu: str, alpha: str, omega_r: float) -> dict:
    """Secular weights for mu -> alpha summed over molecules.

    D: sum |<alpha|e_i><e_i|mu>|^2 (displacement coupling)
    V: 2 Re sum A_i* P_i (mixed displacement/polaron, one phonon)
    P1: sum |P_i|^2 (polaron one-phonon, odd quadrature)
    even / odd: g_r^2 sum |a_i +/- b_i|^2 with a_i = <alpha|e_i><G1|mu>, b_i = <alpha|G1><e_i|mu>
    where P_i = g_r (a_i - b_i) = (E_mu - E_alpha) A_i, so V = 2 nu D and P1 = nu^2 D.
    """
    N = states.N
    gr = omega_r / math.sqrt(N)
    va, vm = states.vectors[alpha], states.vectors[mu]
    A = va[1:].conj() * vm[1:]
    a = va[1:].conj() * vm[0]
    b = va[0].conj() * vm[1:]
    P = gr * (a - b)
    return {
        "D": float(np.sum(np.abs(A) ** 2)),
        "V": float(2 * np.sum((A.conj() * P).real)),
        "P1": float(np.sum(np.abs(P) ** 2)),
        "even": float(gr ** 2 * np.sum(np.abs(a + b) ** 2)),
        "odd": float(gr ** 2 * np.sum(np.abs(a - b) ** 2)),
    }


def _diagonals(states: TCStates, mu: str):
    v = states.vectors[mu]
    P = np.abs(v[1:]) ** 2
    X = 2 * (v[1:].conj() * v[0]).real
    Y = 2 * (v[1:].conj() * v[0]).imag
    return P, X, Y


def secular_coefficients(N: int, epsilon: float = 0.0) -> dict:
    """Brute-force secular prefactors, normalised like the closed forms.

    Keys mirror the closed-form tables: single-phonon weights are c_D,
    multi-phonon weights are given in units of Omega_r^2 (g_r^2 N), and
    dephasing/self-shift entries are the pure-dephasing sums.
    """
    omega_r = 1.0
    theta = 2.0 / math.sqrt(1 - epsilon ** 2)
    delta = epsilon * theta
    st = tc_eigenstates(N, omega_r, delta)
    R2 = omega_r ** 2
    out = {}
    for mu, al, key in (("+", "-", "+-"), ("-", "+", "-+"), ("+", "d1", "+d"), ("-", "d1", "-d"),
                        ("d1", "+", "d+"), ("d1", "-", "d-")):
        w = channel_weights(st, mu, al, omega_r)
        out[f"K{key}"] = {"single": w["D"], "even": w["even"] / R2, "odd": w["odd"] / R2,
                          "V": w["V"], "P1": w["P1"], "nu": st.energies[mu] - st.energies[al]}
    if N > 2:
        out["Kdd"] = {"single": channel_weights(st, "d1", "d2", omega_r)["D"]}
    # aggregated single-phonon dark-dark weight seen from one dark state
    out["dd_total"] = sum(channel_weights(st, "d1", f"d{k}", omega_r)["D"] for k in range(2, N))
    out["pm_to_dark_total"] = sum(channel_weights(st, "+", f"d{k}", omega_r)["D"] for k in range(1, N))
    diag = {m: _diagonals(st, m) for m in st.labels}
    zero = (np.zeros(N), np.zeros(N), np.zeros(N))
    diag["G"] = zero

    def deph(m, n):
        Pm, Xm, _ = diag[m]
        Pn, Xn, _ = diag[n]
        return {"single": 0.5 * float(np.sum((Pm - Pn) ** 2)),
                "multi": 0.5 * float(np.sum((Xm - Xn) ** 2))}

    for m, n in (("+", "-"), ("+", "G"), ("-", "G"), ("+", "d1"), ("-", "d1"), ("d1", "G"), ("d1", "d2")):
        if "d2" in (m, n) and N < 3:
            continue
        out[f"phi{m[0]}{n[0]}"] = deph(m, n)
    for m in ("+", "-", "d1"):
        P, X, _ = diag[m]
        out[f"self{m[0]}"] = {"single": float(np.sum(P ** 2)), "multi": float(np.sum(X ** 2))}
    return out


def bruteforce_secular(params, sol, N_small: int, bath=None, delta: float | None = None,
                       max_order: int | None = None):
    """Secular rates, dephasing rates and Lamb shifts by explicit summation.

    Uses the solved frame (Gbar, B) of ``sol`` with N_small molecules
    (Omega_r = g B sqrt(N_small)), the explicit eigenvectors, and the
    displacement / mixed / polaron functionals M+-[.] for the one-phonon
    channels, so it shares no closed-form prefactor with the rate formulas.
    Returns (RateSet, LambShiftSet).
    """
    from .correlations import BathFunctions
    from .rates import LambShiftSet, RateSet
    from .spectral import SpectralDensity

    if N_small > 8:
        raise ValueError("brute-force oracle limited to N <= 8")
    N = int(N_small)
    sd = SpectralDensity.from_params(params)
    beta = params.beta
    bath = bath or BathFunctions.from_solution(sd, params, sol, max_order=max_order)
    omega_r = params.g * sol.frak_b * math.sqrt(N)
    dl = sol.delta if delta is None else delta
    st = tc_eigenstates(N, omega_r, dl)

    def one_rate_shift(w, nu):
        mD, mV, mP = bath.m_channels(nu)
        if nu == 0:
            z = bath.zero()
            rate = w["D"] * z.value if w["D"] > 0 else 0.0
        else:
            rate = 2 * (w["D"] * mD.real - w["V"] * mV.real + w["P1"] * mP.real)
        shift = w["D"] * mD.imag - w["V"] * mV.imag + w["P1"] * mP.imag
        return rate, shift

    K1, Km, lam = {}, {}, {}
    for mu in st.labels:
        lam_t = 0.0
        for al in st.labels:
            if al == mu:
                continue
            nu = st.energies[mu] - st.energies[al]
            if abs(nu) < 1e-12 * max(omega_r, 1e-300):
                nu = 0.0
            w = channel_weights(st, mu, al, omega_r)
            r1, s1 = one_rate_shift(w, nu)
            if bath.polaron and (w["even"] > 0 or w["odd"] > 0) and nu != 0:
                mp = bath.multi(nu)
                rm = 2 * (w["even"] * mp["even"].real + w["odd"] * mp["odd"].real)
                sm = w["even"] * mp["even"].imag + w["odd"] * mp["odd"].imag
            else:
                rm = sm = 0.0
            K1[(mu, al)], Km[(mu, al)] = r1, rm
            lam_t += s1 + sm
        P, X, _ = _diagonals(st, mu)
        s1v0 = bath.one_phonon(0.0).shift
        sphi = bath.dephasing().shift if bath.polaron else 0.0
        lam[mu] = (lam_t, float(np.sum(P ** 2)) * s1v0 + float(np.sum(X ** 2)) * sphi)

    gz = bath.zero().value
    gphi = bath.dephasing().rate if bath.polaron else 0.0
    diag = {m: _diagonals(st, m) for m in st.labels}
    diag["G"] = (np.zeros(N), np.zeros(N), np.zeros(N))

    def deph(m, n):
        Pm, Xm, _ = diag[m]
        Pn, Xn, _ = diag[n]
        s = 0.5 * float(np.sum((Pm - Pn) ** 2))
        mlt = 0.5 * float(np.sum((Xm - Xn) ** 2))
        return (s * gz if s > 0 else 0.0) + mlt * gphi

    red = {"+": "+", "-": "-", "d1": "d", "G": "G"}
    trans, trans1, transm = {}, {}, {}
    for mu, al in (("+", "-"), ("-", "+"), ("+", "d1"), ("-", "d1"), ("d1", "+"), ("d1", "-")):
        k = (red[mu], red[al])
        trans1[k], transm[k] = K1[(mu, al)], Km[(mu, al)]
        trans[k] = trans1[k] + transm[k]
    if N > 2:
        trans1[("d", "d")] = K1[("d1", "d2")]
        transm[("d", "d")] = 0.0
        trans[("d", "d")] = trans1[("d", "d")]
    loss = {red[m]: sum(K1[(m, a)] + Km[(m, a)] for a in st.labels if a != m) for m in ("+", "-", "d1")}
    loss["G"] = 0.0
    pairs = [("+", "-"), ("+", "G"), ("-", "G"), ("+", "d1"), ("-", "d1"), ("d1", "G")]
    if N > 2:
        pairs.append(("d1", "d2"))
    dephasing = {(red.get(m, "d"), red.get(n, "d")): deph(m, n) for m, n in pairs}
    energies = {"+": st.energies["+"], "-": st.energies["-"], "d": dl, "G": -math.inf}
    rs = RateSet(theory="VPME" if bath.polaron else "WCME", N=N, delta=dl, transitions=trans,
                 single=trans1, multi=transm, loss=loss, dephasing=dephasing,
                 energies={"+": energies["+"], "-": energies["-"], "d": dl})
    shifts = {red[m]: sum(lam[m]) for m in ("+", "-", "d1")}
    shifts["G"] = 0.0
    ls = LambShiftSet(shifts=shifts, transition={red[m]: lam[m][0] for m in ("+", "-", "d1")},
                      virtual={red[m]: lam[m][1] for m in ("+", "-", "d1")},
                      energies={"+": energies["+"], "-": energies["-"], "d": dl, "G": 0.0})
    return rs, ls
