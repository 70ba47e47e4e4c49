"""Shared fixtures.  Every traced ray in every test passes the physics guard below."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

from lenssensor import raytrace
from lenssensor.scene import build_sensor

DATA = Path(__file__).resolve().parent / "data"

BALANCE_TOL = 1e-9
SNELL_TOL = 1e-12
CRITICAL_MARGIN = 1e-12  # grazing-critical hits are not classified either way


def check_outcome(out):
    booked = out.deposited_power + out.escaped_power + out.absorbed_power + out.limit_power
    assert abs(out.initial_power - booked) <= BALANCE_TOL, f"ray power not conserved: {out.initial_power} vs {booked}"
    for ev in out.events:
        critical = ev.n_to / ev.n_from if ev.n_from > ev.n_to else None
        if ev.kind == raytrace.REFRACTED:
            assert abs(ev.n_from * ev.sin_incidence - ev.n_to * ev.sin_transmission) <= SNELL_TOL, ev
            assert critical is None or ev.sin_incidence <= critical + CRITICAL_MARGIN, f"super-critical refraction {ev}"
            assert 0.0 <= ev.transmittance <= 1.0
        else:
            assert ev.kind == raytrace.TIR, ev
            assert critical is not None and ev.sin_incidence >= critical - CRITICAL_MARGIN, f"sub-critical TIR {ev}"
            assert ev.transmittance == 0.0


class CheckedTally(raytrace.DetectionTally):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        assert abs(self.balance()) <= BALANCE_TOL, f"fan power not conserved: {self.balance()}"


@pytest.fixture(autouse=True)
def physics_guard(monkeypatch):
    original = raytrace.trace

    def checked(ray, scene, limits=raytrace.TraceLimits()):
        out = original(ray, scene, limits)
        check_outcome(out)
        return out

    monkeypatch.setattr(raytrace, "trace", checked)
    monkeypatch.setattr(raytrace, "DetectionTally", CheckedTally)
    yield


@pytest.fixture(scope="session")
def sensor():
    return build_sensor()


@pytest.fixture(scope="session")
def flat_sensor():
    return build_sensor(lens=False)


@pytest.fixture
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
