import subprocess
import sys

import numpy as np
import pytest

from lenssensor.cli import EXIT_DOMAIN, EXIT_IO, EXIT_OK, EXIT_VALIDATION, main
from lenssensor.lensdesign import import_profile
from lenssensor.material import index_at_wavelength, read_constants
from lenssensor.scene import load_scene_file


def read_rows(path):
    lines = path.read_text().splitlines()
    return lines[0], [ln.split(",") for ln in lines[1:]]


# -- extract-index -----------------------------------------------------------------------


def test_extract_index_synthetic(tmp_path, data_dir):
    out = tmp_path / "n.csv"
    assert main(["extract-index", str(data_dir / "synthetic_n15_spectrum.csv"), "--thickness", "0.025",
                 "-o", str(out)]) == EXIT_OK
    c = read_constants(out)
    assert np.all(np.abs(c.n - 1.5) <= 1e-6)


def test_extract_index_measured(tmp_path, data_dir):
    out = tmp_path / "n.csv"
    assert main(["extract-index", str(data_dir / "measured_spectrum.csv"), "-o", str(out)]) == EXIT_OK
    assert index_at_wavelength(read_constants(out), 860.0) == pytest.approx(1.44, abs=5e-3)


def test_extract_index_bad_header(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("nm,T,A\n500,0.9,0.0\n")
    assert main(["extract-index", str(bad), "-o", str(tmp_path / "n.csv")]) == EXIT_VALIDATION
    assert "wavelength_nm,T,A" in capsys.readouterr().err


def test_extract_index_flags_rows(tmp_path, capsys):
    spec = tmp_path / "s.csv"
    spec.write_text("wavelength_nm,T,A\n500,0.9,0.1\n600,0.9,0.02\n")
    out = tmp_path / "n.csv"
    assert main(["extract-index", str(spec), "-o", str(out)]) == EXIT_DOMAIN
    assert "500 nm" in capsys.readouterr().err
    _, rows = read_rows(out)
    assert rows[0][3] == "nan" and rows[1][3] != "nan"


def test_missing_input_is_io_error(tmp_path):
    assert main(["extract-index", str(tmp_path / "nope.csv"), "-o", str(tmp_path / "n.csv")]) == EXIT_IO


# -- fit-workingcurve --------------------------------------------------------------------


def test_fit_analytic(tmp_path, data_dir, capsys):
    out = tmp_path / "fit.csv"
    assert main(["fit-workingcurve", str(data_dir / "jacobs_analytic.csv"), "-o", str(out)]) == EXIT_OK
    header, rows = read_rows(out)
    assert header == "penetration_depth_um,critical_energy_mJ_cm2,residual_rms_um"
    assert float(rows[0][0]) == pytest.approx(200.0, rel=1e-8)
    assert float(rows[0][1]) == pytest.approx(5.0, rel=1e-8)
    assert "Dp = 200" in capsys.readouterr().out


def test_fit_measured(tmp_path, data_dir):
    out = tmp_path / "fit.csv"
    assert main(["fit-workingcurve", str(data_dir / "measured_working_curve.csv"), "-o", str(out)]) == EXIT_OK
    _, rows = read_rows(out)
    dp, ec = float(rows[0][0]), float(rows[0][1])
    assert dp * np.log(40.0 / ec) > 200.0


def test_fit_single_point(tmp_path):
    p = tmp_path / "one.csv"
    p.write_text("energy_mJ_cm2,cure_depth_um\n10,100\n")
    assert main(["fit-workingcurve", str(p)]) == EXIT_VALIDATION


# -- design-lens -------------------------------------------------------------------------


def test_design_lens_default(tmp_path, capsys):
    out = tmp_path / "lens.csv"
    assert main(["design-lens", "--n1", "1", "--n2", "1.44", "--s", "1", "--s-prime", "20",
                 "--aperture", "2", "--samples", "2001", "-o", str(out)]) == EXIT_OK
    prof = import_profile(out)
    assert len(prof.x) == 2001 and prof.z[1000] == 0.0
    assert np.array_equal(prof.z, prof.z[::-1])
    assert "29.8" in capsys.readouterr().out


def test_design_lens_even_samples(tmp_path):
    assert main(["design-lens", "--samples", "2", "-o", str(tmp_path / "l.csv")]) == EXIT_VALIDATION


def test_design_lens_sags_ordered(tmp_path):
    sags = []
    for n2 in ("1.44", "1.49", "1.54"):
        out = tmp_path / f"lens_{n2}.csv"
        assert main(["design-lens", "--n2", n2, "--samples", "101", "-o", str(out)]) == EXIT_OK
        sags.append(import_profile(out).edge_sag)
    assert sags[0] > sags[1] > sags[2]


def test_design_lens_unbracketed(tmp_path, capsys):
    assert main(["design-lens", "--aperture", "60", "--samples", "3", "-o", str(tmp_path / "l.csv")]) == EXIT_DOMAIN
    assert "60" in capsys.readouterr().err


# -- simulate ----------------------------------------------------------------------------


def test_simulate_sweep(tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "--mode", "sweep", "--thetas=-3,0,3", "--out", str(out)]) == EXIT_OK
    _, rows = read_rows(out / "sweep.csv")
    assert len(rows) == 3
    (l_m, r_m), (l_0, r_0), (l_p, r_p) = ((float(r[1]), float(r[2])) for r in rows)
    assert r_m > l_m and l_0 == r_0 and l_p > r_p
    assert (out / "sweep.svg").exists()
    scene = load_scene_file(out / "effective_scene.ini")
    assert scene.params.n_polymer == 1.44


def test_simulate_overrides_are_recorded(tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "--thetas", "-1", "0", "--lens", "none", "--n-polymer", "1.49", "--rays", "21",
                 "--out", str(out)]) == EXIT_OK
    scene = load_scene_file(out / "effective_scene.ini")
    assert scene.params.lens is False and scene.params.n_polymer == 1.49 and scene.trace["rays"] == 21
    _, rows = read_rows(out / "sweep.csv")
    assert [float(r[0]) for r in rows] == [-1.0, 0.0]


def test_simulate_compare(tmp_path, capsys):
    out = tmp_path / "cmp"
    assert main(["simulate", "--mode", "compare", "--out", str(out)]) == EXIT_OK
    header, rows = read_rows(out / "compare.csv")
    assert header == "theta_deg,D_with_lens,D_without_lens"
    for r in (rows[0], rows[2]):
        assert abs(float(r[1])) > abs(float(r[2]))


def test_simulate_protocol(tmp_path, capsys):
    out = tmp_path / "proto"
    assert main(["simulate", "--mode", "protocol", "--out", str(out)]) == EXIT_OK
    _, rows = read_rows(out / "protocol.csv")
    assert len(rows) == 1441 and float(rows[-1][0]) == pytest.approx(14.4)
    assert "6 cycles" in capsys.readouterr().out
    _, folded = read_rows(out / "folded.csv")
    assert all(float(r[2]) == 0.0 and float(r[4]) == 0.0 for r in folded)


def test_simulate_bad_scene(tmp_path, capsys):
    scene = tmp_path / "s.ini"
    scene.write_text("[sensor]\nwobble = 1\n")
    assert main(["simulate", "--scene", str(scene), "--out", str(tmp_path / "o")]) == EXIT_VALIDATION
    assert "wobble" in capsys.readouterr().err


def test_simulate_bad_threads(tmp_path):
    assert main(["simulate", "--threads", "0", "--out", str(tmp_path / "o")]) == EXIT_VALIDATION


def test_module_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "lenssensor", "simulate", "--help"],
                         capture_output=True, text=True, check=True)
    assert "--threads" in res.stdout and "default: 1" in res.stdout
