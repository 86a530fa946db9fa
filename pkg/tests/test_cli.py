import json
import subprocess
import sys

import numpy as np
import pytest

from nvmem.cli import main
from nvmem.io import read_csv


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    rc = main([*argv, "--out", str(out)])
    return rc, out


def test_filter_table_matches_closed_form(tmp_path):
    rc, out = run(tmp_path, "filter", "--kind", "this_work", "--eta-tau", "1", "--eta-tc", "0", "--no-figures")
    assert rc == 0
    header, data = read_csv(out / "filter.csv")
    assert header[:2] == ["omega_t", "F"]
    x = data[:, 0]
    np.testing.assert_allclose(data[:, 1], 32 * np.sin(x / 8) ** 4 * np.cos(x / 4) ** 2, atol=1e-12)
    assert (out / "filter.csv").read_text().startswith("# sequence=this_work eta_tau=1")


def test_fit_on_shipped_fixture(tmp_path):
    rc, out = run(tmp_path, "fit", "--no-figures")
    assert rc == 0
    d = json.loads((out / "fit.json").read_text())
    assert d["fwhm_hz"] == pytest.approx(1 / (np.pi * 23.8e-3), rel=0.005)
    assert d["t2star_s"] == pytest.approx(23.8e-3, rel=0.005)


def test_fit_synthetic_in_time_domain(tmp_path):
    rc, out = run(tmp_path, "fit", "--synthesize", "0.01", "--domain", "time", "--no-figures")
    assert rc == 0
    assert json.loads((out / "fit.json").read_text())["t2star_s"] == pytest.approx(0.01, rel=1e-3)


def test_dark_coupling_scan_plateau(tmp_path):
    rc, out = run(tmp_path, "sweep-coupling", "--method", "dark_nvm", "--start", "100", "--stop", "1e4",
                  "--num", "3", "--log", "--no-figures")
    assert rc == 0
    _, data = read_csv(out / "sweep_coupling.csv")
    np.testing.assert_allclose(data[:, 0], [100, 1e3, 1e4])
    assert data[1, 1] == pytest.approx(9.6e-3, rel=0.03)


def test_outputs_are_deterministic(tmp_path):
    args = ("fit", "--synthesize", "0.02", "--noise-sigma", "0.05", "--seed", "7")
    _, a = run(tmp_path, *args, name="a")
    _, b = run(tmp_path, *args, name="b")
    files = sorted(p.name for p in a.iterdir() if p.suffix in (".csv", ".json") and p.name != "manifest.json")
    assert files
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()
    _, c = run(tmp_path, *args[:-1], "8", name="c")
    assert (a / "fit.json").read_bytes() != (c / "fit.json").read_bytes()


def test_figures_flag(tmp_path):
    _, with_fig = run(tmp_path, "geometry", name="fig")
    _, without = run(tmp_path, "geometry", "--no-figures", name="nofig")
    assert list(with_fig.glob("*.png"))
    assert not list(without.glob("*.png"))
    m = json.loads((without / "manifest.json").read_text())
    assert len(m["scenario_hash"]) == 64 and m["command"] == "geometry"
    assert "geometry.csv" in m["outputs"]


def test_geometry_values(tmp_path):
    _, out = run(tmp_path, "geometry", "--a-par", "35", "--species", "H1", "--no-figures")
    d = json.loads((out / "geometry.json").read_text())
    assert d["species"] == "H1"
    assert d["magic_angle_deg"] == pytest.approx(np.degrees(np.arccos(1 / np.sqrt(3))))
    assert 14 < d["max_distance_nm"] < 20


def test_bad_scenario_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("dissipation:\n  illumination:\n    p_branching: 1.3\n")
    rc, _ = run(tmp_path, "geometry", "--scenario", str(bad))
    assert rc == 2
    assert "p_branching" in capsys.readouterr().err
    rc, _ = run(tmp_path, "geometry", "--scenario", str(tmp_path / "missing.yaml"))
    assert rc == 2


def test_runtime_error_exits_1(tmp_path, capsys):
    rc, _ = run(tmp_path, "fit", "--input", str(tmp_path / "missing.csv"))
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_env_var_sets_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("NVMEM_OUT", str(tmp_path / "env"))
    assert main(["geometry", "--no-figures"]) == 0
    assert (tmp_path / "env" / "geometry.json").is_file()


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "nvmem", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "nvmem" in r.stdout
