import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from lenssensor.errors import BracketError, ValidationError
from lenssensor.lensdesign import (
    LensSpec,
    export_profile,
    import_profile,
    optical_path_length,
    oval_residual,
    residual_gradient,
    solve_profile,
    solve_sag,
)

DESIGN = LensSpec(n1=1.0, n2=1.44, s=1.0, s_prime=20.0, half_aperture_x=2.0, sample_count=2001)

# edge sag z(+-2 mm) frozen from a brentq solve of the oval equation before the solver existed
EDGE_SAG = {1.44: 1.8108521422303197, 1.49: 1.6844023551937308, 1.54: 1.5772109595837827}


def brentq_sag(x, spec):
    return brentq(lambda z: float(oval_residual(x, z, spec)), 0.0, 0.99 * spec.s_prime, xtol=1e-15, rtol=1e-15)


def test_residual_at_apex_and_focus():
    assert oval_residual(0.0, 0.0, DESIGN) == 0.0
    assert oval_residual(0.0, 20.0, DESIGN) == pytest.approx((1.0 - 1.44) * 20.0, abs=1e-12)


def test_residual_off_surface_point():
    assert oval_residual(2.0, 0.0, DESIGN) == pytest.approx(1.3797097663279558, abs=1e-12)
    assert optical_path_length(2.0, 0.0, DESIGN) == pytest.approx(29.8 + 1.3797097663279558, abs=1e-12)


def test_optical_path_at_apex():
    assert DESIGN.optical_path == pytest.approx(29.8, abs=1e-14)
    assert optical_path_length(0.0, 0.0, DESIGN) == DESIGN.optical_path


def test_apex_sag_is_zero():
    assert solve_sag(np.array([0.0]), DESIGN)[0] == 0.0


@pytest.mark.parametrize("n2", sorted(EDGE_SAG))
def test_edge_sag_matches_oracle(n2):
    spec = LensSpec(n2=n2)
    z = solve_sag(np.array([-2.0, 2.0]), spec)
    assert z[0] == z[1]
    assert z[1] == pytest.approx(EDGE_SAG[n2], abs=1e-9)
    assert z[1] == pytest.approx(brentq_sag(2.0, spec), abs=1e-9)


def test_profile_properties():
    prof = solve_profile(DESIGN)
    assert len(prof.x) == 2001
    assert prof.z[1000] == 0.0 and prof.x[1000] == 0.0
    assert np.max(np.abs(prof.z - prof.z[::-1])) <= 1e-12
    opl = optical_path_length(prof.x, prof.z, DESIGN)
    assert np.max(np.abs(opl - 29.8)) <= 2e-9
    assert np.all(np.diff(prof.z[1000:]) > 0)  # sag grows towards the edge


def test_profiles_nest_with_index():
    sags = [solve_profile(LensSpec(n2=n2)).edge_sag for n2 in (1.44, 1.49, 1.54)]
    assert sags[0] > sags[1] > sags[2]


def test_gradient_points_to_emitter_side():
    # the residual grows towards the emitter (negative z) at the apex
    gx, gz = residual_gradient(0.0, 0.0, DESIGN)
    assert gx == pytest.approx(0.0, abs=1e-15)
    assert gz < 0


def test_spec_validation():
    for bad in (dict(n2=1.0), dict(s=0.0), dict(sample_count=2), dict(sample_count=4), dict(half_aperture_x=0)):
        with pytest.raises(ValidationError):
            LensSpec(**bad)


def test_unbracketed_sag_names_x():
    spec = LensSpec(half_aperture_x=60.0, sample_count=3)
    with pytest.raises(BracketError, match="60"):
        solve_sag(np.array([60.0]), spec)


def test_export_import_round_trip(tmp_path):
    prof = solve_profile(LensSpec(sample_count=3))
    path = tmp_path / "lens.csv"
    export_profile(prof, path)
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    assert lines[0] == "x_mm,z_mm" and len(lines) == 4
    back = import_profile(path)
    assert back.spec == prof.spec
    export_profile(back, tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()
    assert np.array_equal(import_profile(tmp_path / "again.csv").points, back.points)


@settings(max_examples=60, deadline=None)
@given(
    n2=st.floats(1.3, 1.7),
    s=st.floats(0.5, 3.0),
    s_prime=st.floats(10.0, 40.0),
    x=st.floats(-2.0, 2.0),
)
def test_solved_points_lie_on_the_oval(n2, s, s_prime, x):
    spec = LensSpec(n2=n2, s=s, s_prime=s_prime, sample_count=3)
    z = solve_sag(np.array([x, -x]), spec)
    assert z[0] == z[1]
    assert abs(optical_path_length(x, z[0], spec) - spec.optical_path) <= 2e-9
    assert z[0] >= 0
