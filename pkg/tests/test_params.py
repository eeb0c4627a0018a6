import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vpme.params import (K_B, ParameterError, PhysicalParams, RegimeTag, ResonanceConvention,
                         SingularFrequencyError, bose_occupation, build_params, classify_regime,
                         derived_scales, is_resonant, load_config, parse_config, typical_params)

RAW = {"g_eV": "1e-7", "N": "1000000", "T_K": "300", "A": "0.083", "p": "3", "omega0_eV": "6e-3"}


def test_beta_at_room_temperature():
    p = typical_params()
    assert math.isclose(p.beta, 38.6817, rel_tol=1e-5)
    assert math.isclose(p.omega_beta, 10 * K_B * 300, rel_tol=1e-14)


def test_collective_coupling():
    p = typical_params(N=4e6)
    assert math.isclose(p.Omega, 2e-4, rel_tol=1e-14)


@pytest.mark.parametrize("field,value", [("g", 0.0), ("g", -1e-7), ("T", 0.0), ("omega_0", -1.0),
                                         ("p", 0.0), ("A", -0.1), ("N", 1), ("g", float("nan"))])
def test_invalid_values_rejected(field, value):
    with pytest.raises(ParameterError):
        typical_params(**{field: value})


def test_zero_coupling_strength_allowed():
    assert typical_params(A=0.0).A == 0.0


def test_very_large_n():
    p = typical_params(N=1e18)
    assert math.isclose(p.Omega, 1e-7 * 1e9, rel_tol=1e-14)


def test_build_params_from_strings():
    p = build_params(RAW)
    assert p.N == 1_000_000 and isinstance(p.N, int)
    assert p.resonance is ResonanceConvention.MEASURED
    assert p == typical_params(N=1_000_000)


def test_build_params_errors():
    with pytest.raises(ParameterError, match="missing"):
        build_params({k: v for k, v in RAW.items() if k != "T_K"})
    with pytest.raises(ParameterError, match="unknown"):
        build_params({**RAW, "colour": "blue"})
    with pytest.raises(ParameterError, match="not a number"):
        build_params({**RAW, "A": "lots"})
    with pytest.raises(ParameterError, match="integer"):
        build_params({**RAW, "N": "2.5"})
    with pytest.raises(ParameterError, match="convention"):
        build_params({**RAW, "resonance": "sideways"})


def test_explicit_cavity_energy():
    p = build_params({**RAW, "omega_c_eV": "1.9"})
    assert p.resonance is ResonanceConvention.EXPLICIT
    assert p.cavity_energy(0.1) == 1.9
    with pytest.raises(ParameterError):
        typical_params(resonance="explicit")


def test_resonance_conventions():
    assert typical_params().cavity_energy(0.01) == pytest.approx(1.99, abs=1e-15)
    assert typical_params(resonance="bare").cavity_energy(0.01) == 2.0


def test_parse_config_comments_and_blanks(tmp_path):
    text = "# header\n\ng_eV = 1e-7   # coupling\nN=1000000\nT_K = 300\nA = 0.083\np = 3\nomega0_eV = 6e-3\n"
    assert parse_config(text)["g_eV"] == "1e-7"
    path = tmp_path / "run.cfg"
    path.write_text(text)
    assert load_config(path) == typical_params(N=1_000_000)
    with pytest.raises(ParameterError, match="line 1"):
        parse_config("no equals sign")


def test_bose_occupation_values():
    beta = 2.0
    n, n1 = bose_occupation(math.log(2) / beta, beta)
    assert math.isclose(float(n), 1.0, rel_tol=1e-14)
    assert math.isclose(float(n1), 2.0, rel_tol=1e-14)
    n, _ = bose_occupation(1 / beta, beta)
    assert math.isclose(float(n), 1 / (math.e - 1), rel_tol=1e-14)
    assert math.isclose(float(n), 0.5820, abs_tol=5e-5)


def test_bose_occupation_singular_at_zero():
    with pytest.raises(SingularFrequencyError):
        bose_occupation(np.array([0.1, 0.0]), 1.0)


@given(st.floats(1e-3, 30.0), st.floats(0.5, 100.0))
def test_bose_kms_property(x, beta):
    # (n+1)(nu) = exp(beta nu) n(nu) and n(-nu) = -(n+1)(nu)
    nu = x / beta
    n, n1 = bose_occupation(nu, beta)
    assert math.isclose(float(n1), math.exp(x) * float(n), rel_tol=1e-12)
    m, _ = bose_occupation(-nu, beta)
    assert math.isclose(float(m), -float(n1), rel_tol=1e-12)


def test_derived_scales():
    p = typical_params()
    d = derived_scales(p, 0.5, delta=3e-4)
    assert d.Omega_r == pytest.approx(0.5e-4, rel=1e-14)
    assert d.theta == pytest.approx(math.hypot(3e-4, 1e-4), rel=1e-14)
    assert d.Omega_beta == p.omega_beta


def _sol(omega_r, delta=0.0):
    return SimpleNamespace(omega_r=omega_r, delta=delta)


def test_regime_tags():
    p = typical_params()
    ob = p.omega_beta
    assert classify_regime(p, _sol(0.01 * ob)).tag is RegimeTag.HIGHT_WEAK
    assert classify_regime(p, _sol(ob)).tag is RegimeTag.TRANSITORY
    assert classify_regime(p, _sol(10 * ob)).tag is RegimeTag.HIGHT_STRONG
    cold = typical_params(T=5.0)
    assert classify_regime(cold, _sol(10 * cold.omega_beta)).tag is RegimeTag.LOWT


def test_resonance_flag():
    assert is_resonant(1e-4, 0.0)
    assert is_resonant(1e-4, 1.9e-5)
    assert not is_resonant(1e-4, 2.1e-5)
    p = typical_params()
    assert not classify_regime(p, _sol(1e-4, 1e-3)).resonant


def test_with_returns_new_frozen_instance():
    p = typical_params()
    q = p.with_(T=77.0)
    assert p.T == 300.0 and q.T == 77.0
    with pytest.raises(Exception):
        p.T = 10.0
    assert isinstance(q, PhysicalParams)
