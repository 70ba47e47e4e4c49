"""Rotation sweeps, the simulated rotation-stage protocol and their reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import LensSensorError, ValidationError
from .raytrace import FanParams, FocalSpot, TraceLimits, focal_spot, run_fan
from .scene import Pose, SensorGeometry, SensorParams, apply_pose, build_sensor

SWEEP_HEADER = ("theta_deg", "left_power", "right_power", "left_count", "right_count")
PROTOCOL_HEADER = ("time_s", "theta_deg", "left_voltage_V", "right_voltage_V")
FOLDED_HEADER = ("theta_deg", "left_mean_V", "left_std_V", "right_mean_V", "right_std_V")
COMPARISON_HEADER = ("theta_deg", "D_with_lens", "D_without_lens")
FOCAL_HEADER = ("theta_deg", "depth_mm", "radius_mm", "center_x_mm", "center_y_mm")

THETA_DECIMALS = 12
HOLD = "hold"
RAMP = "ramp"


def differential(left: float, right: float) -> float:
    """``(right - left) / (right + left)``; ``nan`` when nothing was detected."""
    total = right + left
    if total == 0:
        return math.nan
    return (right - left) / total


@dataclass(frozen=True)
class SweepResult:
    theta_deg: np.ndarray
    left_power: np.ndarray
    right_power: np.ndarray
    left_count: np.ndarray
    right_count: np.ndarray

    def __len__(self):
        return len(self.theta_deg)

    @property
    def differential(self) -> np.ndarray:
        return np.array([differential(l, r) for l, r in zip(self.left_power, self.right_power)])

    def row(self, theta: float) -> dict:
        i = int(np.flatnonzero(self.theta_deg == theta)[0])
        return {
            "theta_deg": float(self.theta_deg[i]),
            "left_power": float(self.left_power[i]),
            "right_power": float(self.right_power[i]),
            "left_count": int(self.left_count[i]),
            "right_count": int(self.right_count[i]),
        }


def rotation_sweep(
    geometry: SensorGeometry,
    thetas: Sequence[float],
    fan: FanParams = FanParams(),
    limits: TraceLimits = TraceLimits(),
    threads: int = 1,
) -> SweepResult:
    """One :func:`run_fan` per rotation angle, angles sorted ascending."""
    thetas = [float(t) for t in thetas]
    if not thetas:
        raise ValidationError("rotation sweep needs at least one angle")
    if any(b <= a for a, b in zip(thetas, thetas[1:])):
        raise ValidationError(f"sweep angles must be strictly increasing, got {thetas}")
    rows = []
    for theta in thetas:
        try:
            tally = run_fan(apply_pose(geometry, Pose(theta)), fan, limits, threads)
        except LensSensorError as exc:
            raise type(exc)(f"at theta={theta:g} deg: {exc}") from exc
        rows.append((theta, tally.left_power, tally.right_power,
                     tally.ray_count["left"], tally.ray_count["right"]))
    th, lp, rp, lc, rc = (np.array(c) for c in zip(*rows))
    return SweepResult(th, lp, rp, lc.astype(int), rc.astype(int))


def focal_sweep(
    geometry: SensorGeometry, thetas: Sequence[float], fan: FanParams = FanParams()
) -> list[tuple[float, FocalSpot | None]]:
    """Focal spot of the refracted bundle at each angle; ``None`` where too few rays enter."""
    out = []
    for theta in thetas:
        try:
            spot = focal_spot(apply_pose(geometry, Pose(float(theta))), fan)
        except LensSensorError:
            spot = None
        out.append((float(theta), spot))
    return out


# -- rotation-stage protocol -------------------------------------------------------------


@dataclass(frozen=True)
class ReadoutModel:
    """Affine photoreceiver model: more light, lower voltage."""

    v_max: float = 3.3
    gain: float = 3.0

    def __post_init__(self):
        if not (self.v_max > 0 and self.gain > 0 and self.v_max - self.gain >= 0):
            raise ValidationError(
                f"readout needs v_max > 0, gain > 0, v_max - gain >= 0 (got {self.v_max}, {self.gain})"
            )

    def voltage(self, power):
        return self.v_max - self.gain * np.asarray(power, dtype=float)


@dataclass(frozen=True)
class Protocol:
    """Trapezoidal rotation cycle: to one side, hold, back; other side, hold, back.

    ``first_side = -1`` starts with the clockwise (right) rotation.
    """

    amplitude: float = 3.0  # deg
    speed: float = 15.0  # deg/s
    hold: float = 0.8  # s
    cycles: int = 6
    sample_rate: float = 100.0  # Hz
    first_side: int = -1

    def __post_init__(self):
        problems = []
        if not 0 < self.amplitude <= 90:
            problems.append(f"amplitude must lie in (0, 90] deg (got {self.amplitude})")
        for name in ("speed", "hold", "sample_rate"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0 (got {getattr(self, name)})")
        if int(self.cycles) != self.cycles or self.cycles < 1:
            problems.append(f"cycles must be a positive integer (got {self.cycles})")
        if self.first_side not in (-1, 1):
            problems.append("first_side must be -1 or +1")
        if problems:
            raise ValidationError(problems)

    @property
    def ramp_time(self) -> float:
        return self.amplitude / self.speed

    @property
    def cycle_duration(self) -> float:
        return 4 * self.ramp_time + 2 * self.hold

    @property
    def duration(self) -> float:
        return self.cycles * self.cycle_duration

    def angle(self, t_cycle: float) -> tuple[float, str]:
        """Angle and phase label at a time inside one cycle.

        Ramps are closed intervals, holds open, so the sample that reaches
        full amplitude belongs to the ramp.
        """
        r, h, a = self.ramp_time, self.hold, self.amplitude
        side = self.first_side
        if t_cycle <= r:
            return side * self.speed * t_cycle, RAMP
        if t_cycle < r + h:
            return side * a, HOLD
        if t_cycle <= 2 * r + h:
            return side * (a - self.speed * (t_cycle - r - h)), RAMP
        if t_cycle <= 3 * r + h:
            return -side * self.speed * (t_cycle - 2 * r - h), RAMP
        if t_cycle < 3 * r + 2 * h:
            return -side * a, HOLD
        return -side * (a - self.speed * (t_cycle - 3 * r - 2 * h)), RAMP

    def trajectory(self):
        """Sampled ``(time, theta, phase, cycle)`` over the whole run, endpoint included."""
        n_total = int(round(self.duration * self.sample_rate))
        per_cycle = self.cycle_duration * self.sample_rate
        whole = abs(per_cycle - round(per_cycle)) < 1e-9
        times, thetas, phases, cycles = [], [], [], []
        for i in range(n_total + 1):
            t = i / self.sample_rate
            if whole:
                k = min(i // int(round(per_cycle)), self.cycles - 1)
                t_cycle = (i - k * int(round(per_cycle))) / self.sample_rate
            else:
                k = min(int(t // self.cycle_duration), self.cycles - 1)
                t_cycle = t - k * self.cycle_duration
            theta, phase = self.angle(t_cycle)
            # exact repeats across cycles; +0.0 folds -0.0 into 0.0
            theta = round(theta, THETA_DECIMALS) + 0.0
            times.append(t)
            thetas.append(theta)
            phases.append(phase)
            cycles.append(k)
        return np.array(times), np.array(thetas), np.array(phases), np.array(cycles)


@dataclass(frozen=True)
class ProtocolTrace:
    time_s: np.ndarray
    theta_deg: np.ndarray
    left_voltage: np.ndarray
    right_voltage: np.ndarray
    phase: np.ndarray
    cycle: np.ndarray
    cycle_count: int
    protocol: Protocol = field(default_factory=Protocol)

    def __len__(self):
        return len(self.time_s)


def synthesize_protocol(
    geometry: SensorGeometry,
    readout: ReadoutModel = ReadoutModel(),
    protocol: Protocol = Protocol(),
    fan: FanParams = FanParams(),
    limits: TraceLimits = TraceLimits(),
    threads: int = 1,
) -> ProtocolTrace:
    """Simulated receiver voltages along the rotation protocol.

    The simulator is deterministic in the angle, so each distinct sampled
    angle is traced once and reused.
    """
    times, thetas, phases, cycles = protocol.trajectory()
    cache = {}
    left = np.empty(len(times))
    right = np.empty(len(times))
    for i, theta in enumerate(thetas):
        key = float(theta)
        if key not in cache:
            tally = run_fan(apply_pose(geometry, Pose(key)), fan, limits, threads)
            cache[key] = (tally.left_power, tally.right_power)
        lp, rp = cache[key]
        left[i] = readout.voltage(lp)
        right[i] = readout.voltage(rp)
    return ProtocolTrace(times, thetas, left, right, phases, cycles, protocol.cycles, protocol)


@dataclass(frozen=True)
class FoldedCurves:
    theta_deg: np.ndarray
    left_mean: np.ndarray
    left_std: np.ndarray
    right_mean: np.ndarray
    right_std: np.ndarray
    cycles_used: int

    def __len__(self):
        return len(self.theta_deg)

    def at(self, theta: float) -> dict:
        i = int(np.flatnonzero(self.theta_deg == theta)[0])
        return {k: float(getattr(self, k)[i]) for k in ("left_mean", "left_std", "right_mean", "right_std")}


def _mean_std(values: np.ndarray) -> tuple[float, float]:
    if np.all(values == values[0]):
        return float(values[0]), 0.0
    return float(values.mean()), float(values.std())


def crop_and_fold(trace: ProtocolTrace, discard_cycles: int = 1) -> FoldedCurves:
    """Drop the first cycles and the hold phases, then average per exact angle."""
    if not 0 <= discard_cycles < trace.cycle_count:
        raise ValidationError(
            f"discard_cycles must lie in [0, {trace.cycle_count}) (got {discard_cycles})"
        )
    keep = (trace.cycle >= discard_cycles) & (trace.phase != HOLD)
    if not np.any(keep):
        raise ValidationError("no samples left after cropping cycles and hold phases")
    th = trace.theta_deg[keep]
    lv = trace.left_voltage[keep]
    rv = trace.right_voltage[keep]
    bins = np.unique(th)
    stats = []
    for b in bins:
        sel = th == b
        if not np.any(sel):
            raise ValidationError(f"empty angle bin at {b:g} deg after cropping")
        stats.append((*_mean_std(lv[sel]), *_mean_std(rv[sel])))
    lm, ls, rm, rs = (np.array(c) for c in zip(*stats))
    return FoldedCurves(bins, lm, ls, rm, rs, trace.cycle_count - discard_cycles)


# -- lens vs no-lens ---------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonReport:
    with_lens: SweepResult
    without_lens: SweepResult

    def __len__(self):
        return len(self.with_lens)

    @property
    def theta_deg(self) -> np.ndarray:
        return self.with_lens.theta_deg

    @property
    def d_with(self) -> np.ndarray:
        return self.with_lens.differential

    @property
    def d_without(self) -> np.ndarray:
        return self.without_lens.differential

    def magnitude_ratio(self, theta: float) -> float:
        """``|D_with| / |D_without|`` at one angle (``inf`` if the control is exactly balanced)."""
        i = int(np.flatnonzero(self.theta_deg == theta)[0])
        dw, dn = abs(self.d_with[i]), abs(self.d_without[i])
        if math.isnan(dw) or math.isnan(dn):
            return math.nan
        return math.inf if dn == 0 else dw / dn


def compare_with_without_lens(
    params: SensorParams | None = None,
    thetas: Sequence[float] = (-3.0, 0.0, 3.0),
    fan: FanParams = FanParams(),
    limits: TraceLimits = TraceLimits(),
    threads: int = 1,
) -> ComparisonReport:
    """Sweep the sensor with its oval lens and with a flat face flush with the minor base."""
    params = params or SensorParams()
    with_lens = rotation_sweep(build_sensor(replace(params, lens=True)), thetas, fan, limits, threads)
    without = rotation_sweep(build_sensor(replace(params, lens=False)), thetas, fan, limits, threads)
    return ComparisonReport(with_lens, without)


# -- reports --------------------------------------------------------------------------


def _fmt(v) -> str:
    v = float(v)
    return "nan" if math.isnan(v) else f"{v:.9g}"


def _write_csv(path: Path, header, rows) -> Path:
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc.strerror or exc}") from exc
    return path


def write_sweep_csv(result: SweepResult, path) -> Path:
    rows = (
        (_fmt(t), _fmt(lp), _fmt(rp), str(int(lc)), str(int(rc)))
        for t, lp, rp, lc, rc in zip(result.theta_deg, result.left_power, result.right_power,
                                     result.left_count, result.right_count)
    )
    return _write_csv(Path(path), SWEEP_HEADER, rows)


def write_protocol_csv(trace: ProtocolTrace, path) -> Path:
    rows = (
        (_fmt(t), _fmt(th), _fmt(lv), _fmt(rv))
        for t, th, lv, rv in zip(trace.time_s, trace.theta_deg, trace.left_voltage, trace.right_voltage)
    )
    return _write_csv(Path(path), PROTOCOL_HEADER, rows)


def write_folded_csv(folded: FoldedCurves, path) -> Path:
    rows = (
        tuple(_fmt(v) for v in row)
        for row in zip(folded.theta_deg, folded.left_mean, folded.left_std,
                       folded.right_mean, folded.right_std)
    )
    return _write_csv(Path(path), FOLDED_HEADER, rows)


def write_comparison_csv(report: ComparisonReport, path) -> Path:
    rows = ((_fmt(t), _fmt(a), _fmt(b)) for t, a, b in zip(report.theta_deg, report.d_with, report.d_without))
    return _write_csv(Path(path), COMPARISON_HEADER, rows)


def write_focal_csv(spots, path) -> Path:
    nan = float("nan")
    rows = (
        (_fmt(t), *(_fmt(v) for v in ((sp.depth, sp.radius, *sp.center) if sp else (nan,) * 4)))
        for t, sp in spots
    )
    return _write_csv(Path(path), FOCAL_HEADER, rows)


_WRITERS = {
    SweepResult: ("sweep", write_sweep_csv),
    ProtocolTrace: ("protocol", write_protocol_csv),
    FoldedCurves: ("folded", write_folded_csv),
    ComparisonReport: ("compare", write_comparison_csv),
}


def emit_report(result, destination, fmt: str = "csv", stem: str | None = None) -> Path:
    """Write ``result`` as CSV or SVG into the ``destination`` directory.

    Returns the written file; its name is ``<stem>.<fmt>`` with a stem
    derived from the result type unless given.
    """
    from . import plotting

    if type(result) not in _WRITERS:
        raise TypeError(f"no report format for {type(result).__name__}")
    if len(result) == 0:
        raise ValidationError(f"refusing to write an empty {type(result).__name__}")
    if fmt not in ("csv", "svg"):
        raise ValidationError(f"report format must be 'csv' or 'svg', got {fmt!r}")
    name, writer = _WRITERS[type(result)]
    dest = Path(destination)
    try:
        dest.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {dest}: {exc.strerror or exc}") from exc
    path = dest / f"{stem or name}.{fmt}"
    if fmt == "csv":
        return writer(result, path)
    return plotting.plot_result(result, path)
