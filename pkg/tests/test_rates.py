import csv
import io
import json
import math

import numpy as np
import pytest

from conftest import Frame
from vpme.correlations import BathFunctions
from vpme.eigensystem import dark_basis
from vpme.params import typical_params
from vpme.rates import (RATE_COLUMNS, closed_form_coefficients, coherence_rates, lamb_asymptote,
                        nonres_rates, rate_rows, to_csv, to_json, vpme_rates, wcme_rates)
from vpme.spectral import SpectralDensity, moment_bj

W0 = 6e-3


def test_wcme_transition_values():
    p = typical_params()
    rs, ls = wcme_rates(p)
    W, N, beta = p.Omega, p.N, p.beta
    sd = SpectralDensity.from_params(p)
    n = 1 / math.expm1(beta * W)
    assert rs.K("+", "d") == pytest.approx(2 * math.pi * sd(W) * (n + 1) / (2 * N), rel=1e-13)
    assert rs.K("d", "+") == pytest.approx(2 * math.pi * sd(W) * n / (2 * N), rel=1e-13)
    assert rs.K("+", "-") == pytest.approx(2 * math.pi * sd(2 * W) / (1 - math.exp(-2 * beta * W)) / (4 * N),
                                           rel=1e-13)
    assert rs.K("d", "d") == 0.0 and not rs.flags
    assert rs.loss["+"] == pytest.approx(rs.K("+", "-") + rs.dark_total("+"), rel=1e-15)
    assert ls.shifts["G"] == 0.0


def test_wcme_detailed_balance():
    p = typical_params()
    rs, _ = wcme_rates(p)
    W = p.Omega
    assert rs.K("+", "d") / rs.K("d", "+") == pytest.approx(math.exp(p.beta * W), rel=1e-12)
    assert rs.K("+", "-") / rs.K("-", "+") == pytest.approx(math.exp(2 * p.beta * W), rel=1e-12)


def test_wcme_zero_frequency_states():
    finite, _ = wcme_rates(typical_params(p=1.0))
    assert finite.K("d", "d") == pytest.approx(2 * math.pi * 0.083 / typical_params().beta / 1e6, rel=1e-12)
    div, _ = wcme_rates(typical_params(p=0.5))
    assert math.isinf(div.K("d", "d"))
    assert any(f.startswith("markovian-divergent") for f in div.flags)


def test_wcme_explicit_basis_matches_closed_forms():
    p = typical_params(N=6, p=1.0)
    a, la = wcme_rates(p)
    b, lb = wcme_rates(p, basis=dark_basis(6))
    for k, v in a.transitions.items():
        assert b.transitions[k] == pytest.approx(v, rel=1e-12)
    for k, v in a.dephasing.items():
        assert b.dephasing[k] == pytest.approx(v, rel=1e-12)
    for k in "+-d":
        assert lb.shifts[k] == pytest.approx(la.shifts[k], rel=1e-10)


def test_vpme_reduces_to_wcme_at_weak_bath():
    p = typical_params(A=1e-6)
    fr = Frame(p)
    rs, _ = fr.rates
    w, _ = wcme_rates(p)
    for k in (("+", "d"), ("d", "+"), ("+", "-"), ("-", "+")):
        assert rs.K(*k) == pytest.approx(w.K(*k), rel=1e-4)
        assert rs.multi[k] < 1e-3 * rs.single[k]


def test_single_phonon_order_removes_multi(typical):
    bath1 = BathFunctions.from_solution(typical.sd, typical.params, typical.sol, max_order=1)
    rs1, ls1 = vpme_rates(typical.params, typical.sol, bath1)
    rs, ls = typical.rates
    assert all(v == 0 for v in rs1.multi.values())
    for k, v in rs.single.items():
        assert rs1.single[k] == pytest.approx(v, rel=1e-14)
    assert ls1.parts["+"]["single"] == pytest.approx(ls.parts["+"]["single"], rel=1e-14)


def test_vpme_structure(typical):
    rs, ls = typical.rates
    N = typical.params.N
    assert rs.K("+", "d") == pytest.approx(rs.K("d", "-"), rel=1e-15)
    assert rs.K("-", "d") == pytest.approx(rs.K("d", "+"), rel=1e-15)
    assert rs.dephasing[("+", "-")] == pytest.approx(2 * rs.meta["gamma_phi_multi"], rel=1e-15)
    assert rs.phi("G", "+") == rs.phi("+", "G")
    assert rs.phi("+", "+") == 0.0
    assert rs.loss["d"] == pytest.approx(rs.K("d", "+") + rs.K("d", "-"), rel=1e-14)
    assert ls.shifts["+"] == pytest.approx(sum(ls.parts["+"].values()), rel=1e-14)
    assert rs.dark_total("+") == pytest.approx((N - 1) * rs.K("+", "d"), rel=1e-15)


@pytest.mark.parametrize("ratio", [0.2, -0.5])
def test_detuned_detailed_balance(typical, ratio):
    R = typical.sol.omega_r
    rs, _ = nonres_rates(typical.params, typical.sol, typical.bath, delta=ratio * 2 * R)
    th, d = rs.meta["theta"], rs.delta
    beta = typical.params.beta
    assert rs.K("+", "d") / rs.K("d", "+") == pytest.approx(math.exp(beta * (th - d) / 2), rel=1e-9)
    assert rs.K("d", "-") / rs.K("-", "d") == pytest.approx(math.exp(beta * (th + d) / 2), rel=1e-9)
    assert rs.K("+", "-") / rs.K("-", "+") == pytest.approx(math.exp(beta * th), rel=1e-9)


def test_detuned_shortcut_is_close_for_small_detuning(typical):
    R = typical.sol.omega_r
    rs, _ = nonres_rates(typical.params, typical.sol, typical.bath, delta=1e-3 * R)
    assert max(abs(v) for v in rs.meta["simplified_difference"].values()) < 1e-2


def test_closed_form_coefficients_resonant():
    c = closed_form_coefficients(10)
    assert c["pm"] == 1 / 40 and c["pd"] == 1 / 20 and c["dd_total"] == 0.8
    assert c["pm_even"] == 0.0 and c["phi_pm"] == 0.0 and c["phi_G_multi"] == 0.5


def test_coherence_rates(typical):
    rs, ls = typical.rates
    coh = coherence_rates(rs, ls)
    r = coh[("+", "G")]
    assert r.real == pytest.approx(0.5 * rs.loss["+"] + rs.phi("+", "G"), rel=1e-15)
    assert r.imag == pytest.approx(ls.delta("+", "G"), rel=1e-15)
    assert coh[("G", "+")].imag == -r.imag and coh[("G", "+")].real == r.real
    assert coh[("+", "+")] == 0
    assert coh[("d", "d")].real == pytest.approx(rs.loss["d"], rel=1e-15)


def test_lamb_asymptote_moments(typical):
    a = lamb_asymptote(typical.params, typical.sol)
    assert a["B2"] == pytest.approx(moment_bj(typical.sd, 2, typical.params.beta), rel=1e-15)
    assert a["low"] == pytest.approx(typical.sol.omega_r * a["B2"] / 2, rel=1e-15)
    assert a["dark"] == -typical.sol.delta


def test_serialisation(typical):
    rs, ls = typical.rates
    rows = rate_rows(rs, ls)
    kinds = {r["kind"] for r in rows}
    assert kinds == {"transition", "loss", "dephasing", "lamb"}
    parsed = list(csv.DictReader(io.StringIO(to_csv(rows))))
    assert list(parsed[0]) == RATE_COLUMNS
    assert len(parsed) == len(rows)
    pd = next(r for r in parsed if r["kind"] == "transition" and r["from"] == "+" and r["to"] == "d")
    assert float(pd["total_eV"]) == rs.K("+", "d")
    assert float(pd["single_eV"]) + float(pd["multi_eV"]) == pytest.approx(rs.K("+", "d"), rel=1e-15)
    back = json.loads(to_json(rows))
    assert back[0].keys() == rows[0].keys()
    assert np.isclose(back[0]["total_eV"], rows[0]["total_eV"], rtol=1e-15)
