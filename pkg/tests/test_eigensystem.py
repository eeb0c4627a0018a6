import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from test_acceptance import coefficient_mismatch
from vpme.eigensystem import (bruteforce_secular, channel_weights, coefficient_c, coefficient_p,
                              coefficient_v, dark_basis, nonres_eigensystem, polariton_amplitudes,
                              rebased, tc_eigenstates)
from vpme.rates import closed_form_coefficients, nonres_rates, vpme_rates


@pytest.mark.parametrize("N", [2, 3, 7])
def test_dark_basis_orthonormal_and_dark(N):
    b = dark_basis(N)
    np.testing.assert_allclose(b.u.conj().T @ b.u, np.eye(N - 1), atol=1e-14)
    np.testing.assert_allclose(b.u.sum(axis=0), 0, atol=1e-14)
    for k in range(1, N):
        for j in range(1, N):
            assert coefficient_p(b, f"d{k}", f"d{j}", +1) == pytest.approx(float(k == j), abs=1e-14)


def test_basis_labels_and_errors():
    b = dark_basis(4)
    assert b.labels == ["+", "-", "d1", "d2", "d3"]
    for bad in ("d0", "d4", "x", "dd"):
        with pytest.raises(KeyError):
            b.column(bad)
    with pytest.raises(ValueError):
        dark_basis(1)
    with pytest.raises(ValueError):
        coefficient_p(b, "+", "-", 0)
    with pytest.raises(ValueError):
        coefficient_v(b, "+", "-", "d1", 3)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 9), st.floats(-0.95, 0.95))
def test_polariton_normalisation(N, eps):
    Up, Um, cp, cm = polariton_amplitudes(N, eps)
    assert N * Up ** 2 + cp ** 2 == pytest.approx(1.0, rel=1e-14)
    assert N * Um ** 2 + cm ** 2 == pytest.approx(1.0, rel=1e-14)
    # + and - orthogonal through the photon component
    assert N * Up * Um + cp * cm == pytest.approx(0.0, abs=1e-14)


def test_epsilon_domain():
    with pytest.raises(ValueError):
        polariton_amplitudes(4, 1.0)


@pytest.mark.parametrize("N", [3, 6])
def test_coefficient_sums_are_basis_independent(N):
    b = dark_basis(N)
    r = rebased(b, rng=7)
    darks = [f"d{k}" for k in range(1, N)]
    tot = lambda basis: sum(coefficient_c(basis, "+", d, d, "+").real for d in darks)
    assert tot(b) == pytest.approx(tot(r), rel=1e-13)
    assert tot(b) == pytest.approx((N - 1) * closed_form_coefficients(N)["pd"], rel=1e-13)
    # the dark-dark weights depend on the basis; only the sum including d = e is invariant
    full = lambda basis: sum(coefficient_c(basis, d, e, e, d).real for d in darks for e in darks)
    assert full(b) == pytest.approx(full(r), rel=1e-12)
    assert full(b) == pytest.approx(N * (1 - 1 / N) ** 2, rel=1e-13)
    off = lambda basis: sum(coefficient_c(basis, d, e, e, d).real for d in darks for e in darks if d != e)
    assert off(b) != pytest.approx(off(r), rel=1e-3)
    # discrete-Fourier basis: every dark pair carries 1/N
    assert coefficient_c(b, "d1", "d2", "d2", "d1").real == pytest.approx(1 / N, rel=1e-13)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 8), st.floats(-3.0, 3.0))
def test_tc_eigenstates(N, d):
    R = 1.0
    st_ = tc_eigenstates(N, R, d)
    th = math.hypot(d, 2 * R)
    assert st_.energies["+"] == pytest.approx((d + th) / 2, abs=1e-12)
    assert st_.energies["-"] == pytest.approx((d - th) / 2, abs=1e-12)
    V = np.column_stack([st_.vectors[k] for k in st_.labels])
    np.testing.assert_allclose(V.conj().T @ V, np.eye(N + 1), atol=1e-12)
    for lab in st_.labels:
        w = channel_weights(st_, "+", lab, R) if lab != "+" else None
        if w:
            nu = st_.energies["+"] - st_.energies[lab]
            assert w["V"] == pytest.approx(2 * nu * w["D"], abs=1e-12)
            assert w["P1"] == pytest.approx(nu * nu * w["D"], abs=1e-12)


@pytest.mark.parametrize("N", [2, 3, 5, 8])
@pytest.mark.parametrize("eps", [0.0, 0.3, -0.6, 0.9])
def test_closed_forms_match_brute_force(N, eps):
    assert coefficient_mismatch(N, eps) < 1e-12


def test_nonres_eigensystem(typical):
    e = nonres_eigensystem(typical.params, typical.sol)
    assert e.omega_plus - e.omega_minus == pytest.approx(e.theta, rel=1e-14)
    assert e.gap_plus_dark + e.gap_dark_minus == pytest.approx(e.theta, rel=1e-14)
    assert e.omega_c == pytest.approx(2.0 - 2.2067e-4, abs=1e-8)


def _small(frame, n, delta=None):
    p, sol = frame.params, frame.sol
    R = p.g * sol.frak_b * math.sqrt(n)
    d = sol.delta if delta is None else delta
    return p.with_(N=n), replace(sol, omega_r=R, delta=d, theta=math.hypot(d, 2 * R))


def _compare(rs_a, ls_a, rs_b, ls_b, tol_rate, tol_shift):
    for k, v in rs_b.transitions.items():
        assert rs_a.transitions[k] == pytest.approx(v, rel=tol_rate), k
    for k, v in rs_b.dephasing.items():
        assert rs_a.phi(*k) == pytest.approx(v, rel=tol_rate, abs=1e-30), k
    for k in "+-d":
        assert ls_a.shifts[k] == pytest.approx(ls_b.shifts[k], rel=tol_shift), k


@pytest.mark.parametrize("n", [3, 5])
def test_bruteforce_matches_resonant_rates(typical, n):
    ps, ss = _small(typical, n)
    rs, ls = vpme_rates(ps, ss, typical.bath)
    bf_rs, bf_ls = bruteforce_secular(typical.params, typical.sol, n, typical.bath)
    _compare(bf_rs, bf_ls, rs, ls, 1e-6, 1e-6)


def test_bruteforce_matches_detuned_rates(typical):
    n = 4
    R = typical.params.g * typical.sol.frak_b * math.sqrt(n)
    ps, ss = _small(typical, n)
    rs, ls = nonres_rates(ps, ss, typical.bath, delta=0.7 * R)
    bf_rs, bf_ls = bruteforce_secular(typical.params, typical.sol, n, typical.bath, delta=0.7 * R)
    _compare(bf_rs, bf_ls, rs, ls, 1e-6, 1e-6)


def test_bruteforce_size_limit(typical):
    with pytest.raises(ValueError):
        bruteforce_secular(typical.params, typical.sol, 9, typical.bath)


@pytest.mark.parametrize("delta_ratio", [0.0, 0.4])
def test_bruteforce_matches_rates_with_multi_phonon_dominance(delta_ratio):
    from conftest import frame_at_omega_r

    fr = frame_at_omega_r(5 * 6e-3)
    n = 5
    R = fr.sol.omega_r
    # same Omega_r and frame with n molecules: rescale the single-molecule coupling
    p = fr.params.with_(g=R / (fr.sol.frak_b * math.sqrt(n)))
    ps = p.with_(N=n)
    if delta_ratio:
        d = delta_ratio * R
        rs, ls = nonres_rates(ps, fr.sol, fr.bath, delta=d)
        bf = bruteforce_secular(p, fr.sol, n, fr.bath, delta=d)
    else:
        ss = replace(fr.sol, delta=0.0, theta=2 * R)
        rs, ls = vpme_rates(ps, ss, fr.bath)
        bf = bruteforce_secular(p, ss, n, fr.bath)
    assert rs.multi[("+", "d")] > 10 * rs.single[("+", "d")]
    _compare(*bf, rs, ls, 1e-6, 1e-6)
