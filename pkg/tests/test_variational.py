import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vpme.params import typical_params
from vpme.spectral import SpectralDensity, moment_bj, reorganization_energy
from vpme.variational import (SolverConfig, SolverError, crossover_frequency, detuning,
                              detuning_integral, frak_b, free_energy_fbp, g_of_omega, gbar0_general,
                              gbar0_resonant, gbar_update, lambda_v, log_partition_single, one_minus_g,
                              params_for_omega_r, solve_self_consistent)

W0 = 6e-3
P = typical_params()
SD = SpectralDensity.from_params(P)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 50.0), st.floats(1e-16, 1.0), st.floats(1.0, 1000.0))
def test_g_of_omega_forms(x, gbar, beta):
    w = x / beta
    direct = w / (w + gbar / math.tanh(0.5 * beta * w))
    g = float(g_of_omega(gbar, beta, w))
    assert g == pytest.approx(direct, rel=1e-12)
    assert 0.0 <= g <= 1.0
    assert g + float(one_minus_g(gbar, beta, w)) == pytest.approx(1.0, rel=1e-14)
    assert float(g_of_omega(gbar, beta, -w)) == g


def test_g_limits():
    w = np.array([1e-3, 1e-2])
    assert np.all(g_of_omega(0.0, 38.7, w) == 1.0)
    assert np.all(g_of_omega(math.inf, 38.7, w) == 0.0)
    assert float(g_of_omega(1e-3, math.inf, 1e-3)) == pytest.approx(0.5)


@pytest.mark.parametrize("gbar,beta", [(1e-10, 38.7), (1e-3, 1e4)])
def test_crossover_frequency_halves_g(gbar, beta):
    w = crossover_frequency(gbar, beta)
    assert float(g_of_omega(gbar, beta, w)) == pytest.approx(0.5, abs=1e-3)


def test_frak_b_at_zero_gbar_is_exp_minus_half_b2():
    assert frak_b(SD, 0.0, P.beta) == pytest.approx(math.exp(-0.5 * moment_bj(SD, 2, P.beta)), rel=1e-9)
    # zero temperature, p = 3: exponent int J/w^2 = A/2
    assert frak_b(SD, 0.0, math.inf) == pytest.approx(math.exp(-P.A / 4), rel=1e-9)


def test_frak_b_limits_and_monotonicity():
    assert frak_b(SpectralDensity(0.0, 3, W0), 1e-10, P.beta) == 1.0
    assert frak_b(SD, math.inf, P.beta) == 1.0
    vals = [frak_b(SD, g, P.beta) for g in (1e-12, 1e-6, 1e-4, 1e-3, 1e-2, 1.0)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


@settings(max_examples=10, deadline=None)
@given(st.floats(-14.0, 0.0))
def test_renormalisation_plus_detuning_is_reorganization(lg):
    # G(2-G) + (1-G)^2 = 1
    gbar = 10.0 ** lg
    total = lambda_v(SD, gbar, P.beta) + detuning_integral(SD, gbar, P.beta)
    assert total == pytest.approx(reorganization_energy(SD), rel=1e-9)


def test_detuning_limits_and_conventions():
    assert detuning_integral(SD, 0.0, P.beta) == 0.0
    assert detuning_integral(SD, math.inf, P.beta) == pytest.approx(reorganization_energy(SD), rel=1e-12)
    bare = P.with_(resonance="bare")
    g = 1e-3
    assert detuning(SD, g, P.beta, bare) == pytest.approx(-lambda_v(SD, g, P.beta), rel=1e-12)
    measured = detuning(SD, g, P.beta, P)
    assert measured == pytest.approx(detuning_integral(SD, g, P.beta), rel=1e-15)


def test_weak_coupling_laws():
    g_r, beta = 7.3e-8, P.beta
    assert gbar0_resonant(g_r, beta) == pytest.approx(g_r ** 2 * beta, rel=1e-10)
    assert gbar0_general(1e-16, g_r, beta) == pytest.approx(gbar0_resonant(g_r, beta), rel=1e-6)
    assert gbar0_general(0.0, g_r, beta) == gbar0_resonant(g_r, beta)


def test_log_partition_single_direct():
    th, d, N, beta = 1e-3, 2e-4, 50.0, 40.0
    direct = math.log(2 * math.cosh(beta * th / 2) * math.exp(-beta * d / 2) + (N - 1) * math.exp(-beta * d))
    assert log_partition_single(th, d, N, beta) == pytest.approx(direct, rel=1e-14)
    # no overflow at huge beta*theta
    assert math.isfinite(log_partition_single(10.0, 0.0, 1e18, 1e5))


@pytest.fixture(scope="module")
def typical_solution():
    return solve_self_consistent(SD, P)


def test_typical_solution(typical_solution):
    sol = typical_solution
    assert sol.residual < 1e-8
    assert gbar_update(SD, P, sol.gbar) == pytest.approx(sol.gbar, rel=1e-8)
    assert sol.gbar == pytest.approx(2.049e-13, rel=1e-3)
    assert sol.frak_b == pytest.approx(0.72787, rel=1e-5)
    assert sol.omega_r == pytest.approx(P.Omega * sol.frak_b, rel=1e-15)
    assert sol.theta == pytest.approx(math.hypot(sol.delta, 2 * sol.omega_r), rel=1e-15)
    law = gbar0_general(sol.delta, P.g * sol.frak_b, P.beta)
    assert sol.gbar == pytest.approx(law, rel=0.01)


def test_selected_candidate_has_lowest_bound(typical_solution):
    sol = typical_solution
    assert sol.f_fbp == min(f for _, f in sol.candidates)
    assert free_energy_fbp(SD, P, sol.gbar) == pytest.approx(sol.f_fbp, rel=1e-12)
    # with a photon offset the bound is finite and below zero
    assert free_energy_fbp(SD, P, sol.gbar, nu_bar=2.0) < 0


def test_zero_coupling_solution():
    sol = solve_self_consistent(SD.__class__(0.0, 3, W0), P.with_(A=0.0))
    assert sol.frak_b == 1.0 and sol.delta == 0.0
    assert sol.omega_r == pytest.approx(P.Omega, rel=1e-15)


def test_solver_error_carries_diagnostics():
    with pytest.raises(SolverError) as exc:
        solve_self_consistent(SD, P, SolverConfig(tol=0.0))
    assert "candidates" in exc.value.diagnostics


def test_params_for_omega_r_lands_on_target():
    target = 3 * W0
    p, sol = params_for_omega_r(SD, P, target)
    assert sol.omega_r == pytest.approx(target, rel=1e-8)
    assert p.N > 2
