import math

import numpy as np
import pytest

from lenssensor.errors import ValidationError
from lenssensor.experiment import (
    HOLD,
    Protocol,
    ProtocolTrace,
    ReadoutModel,
    compare_with_without_lens,
    crop_and_fold,
    differential,
    emit_report,
    rotation_sweep,
    synthesize_protocol,
)


@pytest.fixture(scope="module")
def sweep(sensor):
    return rotation_sweep(sensor, [-3.0, 0.0, 3.0])


@pytest.fixture(scope="module")
def protocol_trace(sensor):
    return synthesize_protocol(sensor)


@pytest.fixture(scope="module")
def folded(protocol_trace):
    return crop_and_fold(protocol_trace, 1)


def test_differential():
    assert differential(0.2, 0.6) == pytest.approx(0.5)
    assert differential(0.3, 0.3) == 0.0
    assert math.isnan(differential(0.0, 0.0))


# -- sweeps ------------------------------------------------------------------------------


def test_sweep_sign_switch(sweep):
    assert sweep.right_power[0] > sweep.left_power[0]
    assert abs(sweep.differential[1]) <= 1e-9
    assert sweep.left_power[2] > sweep.right_power[2]
    assert sweep.differential[0] == pytest.approx(-sweep.differential[2], abs=1e-9)


def test_sweep_mirror_rows(sensor):
    s = rotation_sweep(sensor, [-1.7, 1.7])
    assert s.left_power[0] == pytest.approx(s.right_power[1], abs=1e-9)
    assert s.right_power[0] == pytest.approx(s.left_power[1], abs=1e-9)
    assert (s.left_count[0], s.right_count[0]) == (s.right_count[1], s.left_count[1])


def test_sweep_without_lens_is_balanced(flat_sensor):
    s = rotation_sweep(flat_sensor, [-3.0, 0.0, 3.0])
    assert np.all(np.abs(s.differential) < 0.2)


def test_sweep_requires_increasing_angles(sensor):
    with pytest.raises(ValidationError):
        rotation_sweep(sensor, [0.0, -3.0])
    with pytest.raises(ValidationError):
        rotation_sweep(sensor, [])


def test_sweep_row_lookup(sweep):
    row = sweep.row(-3.0)
    assert row["right_power"] > row["left_power"]


# -- protocol ----------------------------------------------------------------------------


def test_protocol_timing():
    p = Protocol()
    assert p.cycle_duration == pytest.approx(2.4, abs=1e-15)
    assert p.duration == pytest.approx(14.4, abs=1e-12)
    t, th, phase, cycle = p.trajectory()
    assert len(t) == 1441 and t[-1] == pytest.approx(14.4, abs=1e-12)
    assert th.min() == -3.0 and th.max() == 3.0
    assert th[0] == 0.0 and th[-1] == 0.0
    assert np.array_equal(np.unique(cycle), np.arange(6))
    # first excursion is the right (clockwise) rotation
    assert th[np.argmax(np.abs(th) == 3.0)] == -3.0


def test_protocol_validation():
    with pytest.raises(ValidationError):
        Protocol(speed=0.0)
    with pytest.raises(ValidationError):
        Protocol(cycles=0)


def test_readout_dark_level():
    r = ReadoutModel()
    assert r.voltage(0.0) == 3.3
    assert r.voltage(0.5) < r.voltage(0.1)


def test_protocol_trace_pattern(protocol_trace):
    tr = protocol_trace
    assert len(tr) == 1441 and tr.time_s[-1] == pytest.approx(14.4)
    base = (tr.theta_deg == 0.0)
    left0, right0 = tr.left_voltage[base][0], tr.right_voltage[base][0]
    at_right = (tr.theta_deg == -3.0) & (tr.phase == HOLD)
    at_left = (tr.theta_deg == 3.0) & (tr.phase == HOLD)
    assert np.all(tr.right_voltage[at_right] < right0) and np.all(tr.left_voltage[at_right] > left0)
    assert np.all(tr.left_voltage[at_left] < left0) and np.all(tr.right_voltage[at_left] > right0)


def test_fold_is_noise_free(folded):
    assert folded.cycles_used == 5
    assert len(folded) == 41
    assert np.all(folded.left_std == 0.0) and np.all(folded.right_std == 0.0)
    assert folded.theta_deg[0] == -3.0 and folded.theta_deg[-1] == 3.0


def test_mirrored_protocol_swaps_curves(sensor, protocol_trace, folded):
    twin_trace = synthesize_protocol(sensor, protocol=Protocol(first_side=1))
    assert np.array_equal(twin_trace.theta_deg, -protocol_trace.theta_deg)
    assert np.allclose(twin_trace.left_voltage, protocol_trace.right_voltage, atol=1e-9, rtol=0)
    assert np.allclose(twin_trace.right_voltage, protocol_trace.left_voltage, atol=1e-9, rtol=0)
    twin = crop_and_fold(twin_trace, 1)
    # folded curves are functions of the angle alone; mirroring the angle swaps them
    assert np.array_equal(twin.theta_deg, folded.theta_deg)
    assert np.allclose(twin.left_mean, folded.right_mean[::-1], atol=1e-9, rtol=0)
    assert np.allclose(twin.right_mean, folded.left_mean[::-1], atol=1e-9, rtol=0)


def test_fold_discard_bounds(protocol_trace):
    with pytest.raises(ValidationError):
        crop_and_fold(protocol_trace, 6)
    assert crop_and_fold(protocol_trace, 0).cycles_used == 6


def test_fold_refuses_empty_crop():
    n = 5
    tr = ProtocolTrace(np.arange(n) * 0.01, np.full(n, 3.0), np.ones(n), np.ones(n),
                       np.array([HOLD] * n), np.zeros(n, dtype=int), 1)
    with pytest.raises(ValidationError, match="no samples"):
        crop_and_fold(tr, 0)


# -- lens vs flat face -------------------------------------------------------------------


def test_comparison():
    report = compare_with_without_lens()
    i0 = int(np.flatnonzero(report.theta_deg == 0.0)[0])
    assert report.d_with[i0] == 0.0 and report.d_without[i0] == 0.0
    assert report.d_with[0] > 0  # -3 deg, D = (R - L) / (R + L)
    for theta in (-3.0, 3.0):
        assert report.magnitude_ratio(theta) >= 5.0


# -- reports -----------------------------------------------------------------------------


def test_sweep_csv(tmp_path, sweep):
    path = emit_report(sweep, tmp_path)
    lines = path.read_text().splitlines()
    assert lines[0] == "theta_deg,left_power,right_power,left_count,right_count"
    assert len(lines) == 4


def test_reports_are_repeatable(tmp_path, sensor, sweep, folded):
    again = rotation_sweep(sensor, [-3.0, 0.0, 3.0])
    for fmt in ("csv", "svg"):
        a = emit_report(sweep, tmp_path / "a", fmt).read_bytes()
        b = emit_report(again, tmp_path / "b", fmt).read_bytes()
        assert a == b
    assert emit_report(folded, tmp_path / "a", "svg").read_bytes() == emit_report(folded, tmp_path / "b", "svg").read_bytes()


def test_folded_svg_has_curves_and_bands(tmp_path, folded):
    svg = emit_report(folded, tmp_path, "svg").read_text()
    for gid in ("mean_left", "mean_right", "band_left", "band_right"):
        assert f'id="{gid}"' in svg


def test_empty_report_refused(tmp_path, sweep):
    from dataclasses import replace

    empty = replace(sweep, theta_deg=np.array([]), left_power=np.array([]), right_power=np.array([]),
                    left_count=np.array([], dtype=int), right_count=np.array([], dtype=int))
    with pytest.raises(ValidationError, match="empty"):
        emit_report(empty, tmp_path)


def test_unknown_format_refused(tmp_path, sweep):
    with pytest.raises(ValidationError):
        emit_report(sweep, tmp_path, "png")
