import csv
import io
import json
import math
import subprocess
import sys

import pytest

from vpme.cli import SPECTRUM_COLUMNS, TRAJECTORY_COLUMNS, main
from vpme.params import typical_params
from vpme.rates import RATE_COLUMNS
from vpme.recipes import SweepSpec, fig3, fig4_decomp, fig5, fig6, run_points, sweep, tab1


def _csv(text):
    return list(csv.DictReader(io.StringIO(text)))


# ------------------------------------------------------------------ recipes

def test_run_points_keeps_order():
    xs = [9.0, 1.0, 4.0, 16.0]
    assert run_points(math.sqrt, xs, jobs=2) == [3.0, 1.0, 2.0, 4.0]
    assert run_points(math.sqrt, xs, jobs=1) == [3.0, 1.0, 2.0, 4.0]


def test_sweep_spec_validation():
    base = typical_params()
    with pytest.raises(ValueError):
        SweepSpec(base, {})
    with pytest.raises(ValueError):
        SweepSpec(base, {"N": (1e6, 1e7, 2, "log"), "A": (0.01, 0.1, 2, "log"), "T": (10, 300, 2, "log")})
    with pytest.raises(ValueError):
        SweepSpec(base, {"colour": (1, 2, 2, "log")})
    with pytest.raises(ValueError):
        SweepSpec(base, {"N": (1e6, 1e7, 2, "cubic")})
    with pytest.raises(ValueError):
        SweepSpec(base, {"A": (-1.0, 1.0, 2, "linear")})
    spec = SweepSpec(base, {"N": (1e6, 1e8, 3, "log"), "T": (100, 300, 2, "linear")})
    pts = spec.points()
    assert len(pts) == 6
    assert pts[0] == {"N": 1e6, "T": 100.0} and pts[1]["T"] == 300.0


def test_sweep_rows():
    spec = SweepSpec(typical_params(), {"N": (1e6, 1e7, 2, "log")})
    rows = sweep(spec, jobs=1)
    assert [r["N"] for r in rows] == [1e6, 1e7]
    assert all(r["converged"] for r in rows)
    assert rows[1]["omega_r_eV"] == pytest.approx(math.sqrt(10) * rows[0]["omega_r_eV"], rel=1e-3)


def test_sweep_with_detuning_and_rates():
    spec = SweepSpec(typical_params(), {"Delta_override": (0.0, 1e-5, 2, "linear")}, ("solve", "rates"))
    rows = sweep(spec, jobs=1)
    assert rows[0]["K_+d_eV"] != rows[1]["K_+d_eV"]
    assert "Lamb_+_eV" in rows[0] and "Kphi_+-_eV" in rows[0]


def test_fig6_small():
    out = fig6(points=4, p_values=(2, 3), N_values=[1, 1000])
    a, b = out["fig6a"], out["fig6b"]
    d = [r["D_1_1"] for r in a if r["p"] == 3]
    assert all(y <= x for x, y in zip(d, d[1:]))
    inf = {(r["p"], r["N"]): r["D_inf"] for r in b}
    assert inf[(2, 1000)] == 0.0
    assert inf[(3, 1000)] > 0.99


def test_fig4_decomp_small():
    rows = fig4_decomp(points=2, span=(0.5, 4.0))["fig4_decomp"]
    for r in rows:
        parts = r["emit_emit"] + r["emit_absorb"] + r["absorb_emit"]
        assert parts == pytest.approx(r["rho2_direct"], rel=1e-12)
        assert r["rho2_fft"] == pytest.approx(r["rho2_direct"], rel=1e-3)


def test_tab1_single_point():
    rows = tab1(T_values=(300.0,), omega0_values=(6e-3,), N_values=(1e6,), jobs=1)["tab1"]
    (r,) = rows
    assert r["regime"] == "HighT_WeakLM" and r["gbar_law"] == "Gbar0"
    assert r["gbar_eV"] == pytest.approx(r["gbar_law_eV"], rel=0.01)


def test_fig3_small():
    rows = fig3(points=2, A_values=(0.083,), span=(1e-2, 10.0), jobs=1)["fig3"]
    assert len(rows) == 2 and all(r["converged"] for r in rows)
    assert rows[0]["regime"] == "HighT_WeakLM" and rows[1]["regime"] == "HighT_StrongLM"


def test_fig5_single_point():
    out = fig5(points=1, p_values=(3,), span=(2.0, 2.0), jobs=1)
    (r,) = out["fig5_p3"]
    assert r["omega_r_over_omega0"] == pytest.approx(2.0, rel=1e-6)
    assert r["ratio_pd"] > 1


# ---------------------------------------------------------------------- CLI

def test_cli_solve(tmp_path, capsys):
    out = tmp_path / "solve.json"
    assert main(["solve", "-o", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["regime"] == "HighT_WeakLM"
    assert data["frak_b"] == pytest.approx(0.72787, rel=1e-5)
    assert main(["solve", "--set", "A=0"]) == 0
    assert json.loads(capsys.readouterr().out)["frak_b"] == 1.0


def test_cli_parameter_errors(tmp_path, capsys):
    assert main(["solve", "--set", "T_K=0"]) == 2
    assert main(["solve", "--set", "no_equals"]) == 2
    assert main(["solve", "--set", "colour=blue"]) == 2
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("N = 2.5\n")
    assert main(["solve", "--config", str(cfg)]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# typical set, more molecules\nN = 4000000\n")
    assert main(["solve", "--config", str(cfg)]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["N"] == 4_000_000
    assert data["Omega"] == pytest.approx(2e-4, rel=1e-12)


def test_cli_rates_wcme(capsys):
    assert main(["rates", "--theory", "wcme", "--set", "p=1"]) == 0
    rows = _csv(capsys.readouterr().out)
    assert list(rows[0]) == RATE_COLUMNS
    deph = {(r["from"], r["to"]): float(r["total_eV"]) for r in rows if r["kind"] == "dephasing"}
    assert deph[("+", "G")] * 1e6 * 1e3 == pytest.approx(1.6852, rel=1e-3)


def test_cli_rates_json_divergent(capsys):
    assert main(["rates", "--theory", "wcme", "--set", "p=0.5", "--format", "json"]) == 1
    captured = capsys.readouterr()
    assert json.loads(captured.out)[0]["theory"] == "WCME"
    assert "markovian-divergent" in captured.err


def test_cli_rates_vpme_single_phonon(capsys):
    assert main(["rates", "--max-phonons", "1"]) == 0
    rows = _csv(capsys.readouterr().out)
    tr = [r for r in rows if r["kind"] == "transition"]
    assert all(float(r["multi_eV"]) == 0.0 for r in tr)


def test_cli_spectrum(tmp_path, capsys):
    out = tmp_path / "spec.csv"
    assert main(["spectrum", "--set", "A=0", "--points", "101", "-o", str(out)]) == 0
    rows = _csv(out.read_text())
    assert list(rows[0]) == SPECTRUM_COLUMNS
    err = capsys.readouterr().err
    assert "peak,center_eV,fwhm_eV,delta_line" in err and "True" in err
    assert main(["spectrum", "--theory", "wcme", "--omega-min", "1.9998", "--omega-max", "2.0002",
                 "--points", "11"]) == 0
    assert len(_csv(capsys.readouterr().out)) == 11


def test_cli_dynamics(capsys):
    assert main(["dynamics", "--theory", "wcme", "--t-max", "1e8", "--points", "3"]) == 0
    rows = _csv(capsys.readouterr().out)
    assert list(rows[0]) == TRAJECTORY_COLUMNS
    assert float(rows[0]["p_plus"]) == 1.0
    assert float(rows[-1]["p_dark_total"]) > 0.99
    total = sum(float(rows[-1][k]) for k in TRAJECTORY_COLUMNS[1:])
    assert total == pytest.approx(1.0, abs=1e-9)


def test_cli_sweep(capsys):
    assert main(["sweep", "--axis", "N:1e6:1e7:2", "--axis", "T:200:300:2:linear"]) == 0
    rows = _csv(capsys.readouterr().out)
    assert len(rows) == 4 and {"N", "T", "gbar_eV", "regime"} <= set(rows[0])
    assert main(["sweep", "--axis", "N:1:2:2", "--axis", "T:1:2:2", "--axis", "A:1:2:2"]) == 2


def test_cli_sweep_bad_axis():
    with pytest.raises(SystemExit):
        main(["sweep", "--axis", "colour:1:2:2"])


def test_cli_figures(tmp_path):
    assert main(["figures", "fig6", "--points", "3", "--outdir", str(tmp_path)]) == 0
    a = _csv((tmp_path / "fig6a.csv").read_text())
    assert len(a) == 3 * 4
    assert {"p", "t_over_tau_beta", "D_1_1"} <= set(a[0])
    assert (tmp_path / "fig6b.csv").exists()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "vpme", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("solve", "rates", "spectrum", "dynamics", "sweep", "figures"):
        assert cmd in res.stdout
