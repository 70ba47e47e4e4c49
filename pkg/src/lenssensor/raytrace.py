"""Deterministic 2D geometric ray tracer for the sensor scene.

Rays are followed without splitting: at a refracting interface the
transmitted ray continues with its power scaled by the unpolarised Fresnel
transmittance and the reflected share is booked as escaped.  Total internal
reflection keeps the full power.  Receivers absorb on first contact.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, ValidationError
from .lensdesign import LensSpec, oval_residual, residual_gradient
from .scene import (
    AMBIENT,
    FRONT,
    POLYMER,
    RECEIVER_LEFT,
    RECEIVER_NAMES,
    RECEIVER_RIGHT,
    FrontFrame,
    SensorGeometry,
    classify_point,
)

HIT_TOL = 1e-9  # mm
NUDGE = 1e-7  # mm
LENS_SAMPLES = 64

DETECTED = "detected"
ESCAPED = "escaped"
ABSORBED = "absorbed"
BOUNCE_LIMIT = "bounce_limit"

REFRACTED = "refracted"
TIR = "total_internal_reflection"


@dataclass
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    power: float = 1.0
    medium: str = AMBIENT
    bounce_count: int = 0


@dataclass(frozen=True)
class FanParams:
    count: int = 100
    aperture_deg: float = 120.0

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise ValidationError(f"ray count must be a positive integer (got {self.count})")
        if not 0 < self.aperture_deg <= 180:
            raise ValidationError(f"fan aperture must lie in (0, 180] deg (got {self.aperture_deg})")


@dataclass(frozen=True)
class TraceLimits:
    max_bounces: int = 200
    power_floor: float = 1e-4
    bulk_alpha: float = 0.0  # 1/mm inside the polymer; off by default

    def __post_init__(self):
        if self.max_bounces < 1 or not self.power_floor > 0 or self.bulk_alpha < 0:
            raise ValidationError(f"invalid trace limits {self}")


@dataclass(frozen=True)
class SurfaceEvent:
    """Record of one interface interaction, kept for physics checks."""

    point: np.ndarray
    kind: str
    n_from: float
    n_to: float
    sin_incidence: float
    sin_transmission: float
    transmittance: float


@dataclass
class TraceOutcome:
    terminal: str
    receiver: str | None
    initial_power: float
    deposited_power: float = 0.0
    escaped_power: float = 0.0
    absorbed_power: float = 0.0
    limit_power: float = 0.0
    path: list = field(default_factory=list)
    path_power: list = field(default_factory=list)  # power carried into each vertex
    events: list = field(default_factory=list)


@dataclass
class DetectionTally:
    ray_count: dict
    power: dict
    escaped_power: float
    absorbed_power: float
    limit_power: float
    emitted_power: float
    outcomes: list = field(default_factory=list, repr=False)

    @property
    def left_power(self) -> float:
        return self.power["left"]

    @property
    def right_power(self) -> float:
        return self.power["right"]

    def balance(self) -> float:
        """Emitted power minus everything accounted for; zero up to rounding."""
        booked = (
            self.power["left"] + self.power["right"] + self.escaped_power
            + self.absorbed_power + self.limit_power
        )
        return self.emitted_power - booked


# -- elementary optics ---------------------------------------------------------------


def emit_fan(position, axis, count: int = 100, aperture_deg: float = 120.0) -> list[Ray]:
    """Uniform angular fan about ``axis``, end directions included, equal power.

    Offsets are ``(k - (count-1)/2) * step`` so ray ``k`` and ray
    ``count-1-k`` are exact mirror images about the axis.
    """
    FanParams(count, aperture_deg)
    position = np.asarray(position, dtype=float)
    ax = np.asarray(axis, dtype=float)
    step = aperture_deg / (count - 1) if count > 1 else 0.0
    centre = (count - 1) / 2
    rays = []
    for k in range(count):
        phi = math.radians((k - centre) * step)
        c, s = math.cos(phi), math.sin(phi)
        d = np.array([ax[0] * c - ax[1] * s, ax[0] * s + ax[1] * c])
        rays.append(Ray(position.copy(), d, 1.0 / count))
    return rays


def refract_or_reflect(direction, normal, n_from: float, n_to: float):
    """Snell refraction, or mirror reflection past the critical angle.

    ``normal`` must face the incoming ray.  Returns ``(new_direction, kind,
    transmittance)``; transmittance is the unpolarised Fresnel value
    ``1 - (Rs + Rp)/2`` for refraction and 0 for total internal reflection.
    """
    d = np.asarray(direction, dtype=float)
    nv = np.asarray(normal, dtype=float)
    cos_i = -float(d @ nv)
    if not cos_i > 0:
        raise DomainError(f"normal does not face the incoming ray (d.n = {-cos_i:g})")
    eta = n_from / n_to
    sin2_t = eta * eta * max(0.0, 1.0 - cos_i * cos_i)
    if sin2_t > 1.0:
        r = d + 2.0 * cos_i * nv
        return r / math.hypot(r[0], r[1]), TIR, 0.0
    cos_t = math.sqrt(1.0 - sin2_t)
    t = eta * d + (eta * cos_i - cos_t) * nv
    t = t / math.hypot(t[0], t[1])
    rs = (n_from * cos_i - n_to * cos_t) / (n_from * cos_i + n_to * cos_t)
    rp = (n_to * cos_i - n_from * cos_t) / (n_to * cos_i + n_from * cos_t)
    return t, REFRACTED, 1.0 - 0.5 * (rs * rs + rp * rp)


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


# -- intersections ---------------------------------------------------------------


@dataclass(frozen=True)
class PlacedLens:
    """Implicit oval in scene coordinates, clipped to its aperture."""

    spec: LensSpec
    frame: FrontFrame
    sag: float

    def local(self, p):
        d0, d1 = p[0] - self.frame.origin[0], p[1] - self.frame.origin[1]
        ex, ez = self.frame.ex, self.frame.ez
        return d0 * ex[0] + d1 * ex[1], d0 * ez[0] + d1 * ez[1]

    def local_dir(self, d):
        ex, ez = self.frame.ex, self.frame.ez
        return d[0] * ex[0] + d[1] * ex[1], d[0] * ez[0] + d[1] * ez[1]


def intersect_lens(origin, direction, lens: PlacedLens):
    """Nearest crossing of the ray with the oval surface, or ``None``.

    The ray is clipped to the lens bounding box in local coordinates, the
    residual is sampled along the clipped chord to find the first sign
    change, and that bracket is bisected until the chord parameter is fixed
    to ~1e-13 mm.  Returns ``(point, normal)`` with the normal facing the ray.
    """
    spec = lens.spec
    a = spec.half_aperture_x
    ox, oz = lens.local(origin)
    dx, dz = lens.local_dir(direction)
    t0, t1 = 0.0, math.inf
    for o, d, lo, hi in ((ox, dx, -a, a), (oz, dz, -HIT_TOL, lens.sag + HIT_TOL)):
        if d == 0:
            if not lo <= o <= hi:
                return None
            continue
        ta, tb = (lo - o) / d, (hi - o) / d
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
    if not t0 < t1:
        return None
    ts = np.linspace(t0, t1, LENS_SAMPLES)
    g = oval_residual(ox + ts * dx, oz + ts * dz, spec)
    sign = np.sign(g)
    change = np.flatnonzero(sign[:-1] * sign[1:] <= 0)
    # skip a root sitting at the chord start (the surface the ray just left)
    change = [i for i in change if not (g[i] == 0 and i == 0 and t0 == 0.0)]
    if not change:
        return None
    i = change[0]
    lo, hi = float(ts[i]), float(ts[i + 1])
    g_lo = float(g[i])
    if g_lo == 0:
        t = lo
    else:
        for _ in range(200):
            if hi - lo <= 1e-13:
                break
            mid = 0.5 * (lo + hi)
            g_mid = float(oval_residual(ox + mid * dx, oz + mid * dz, spec))
            if g_mid == 0:
                lo = hi = mid
                break
            if (g_mid > 0) == (g_lo > 0):
                lo = mid
            else:
                hi = mid
        t = 0.5 * (lo + hi)
    x, z = ox + t * dx, oz + t * dz
    if abs(x) > a + HIT_TOL:
        return None
    gx, gz = residual_gradient(x, z, spec)
    ex, ez = lens.frame.ex, lens.frame.ez
    nrm = np.array([gx * ex[0] + gz * ez[0], gx * ex[1] + gz * ez[1]])
    nrm /= math.hypot(nrm[0], nrm[1])
    if nrm @ direction > 0:
        nrm = -nrm
    point = lens.frame.origin + x * ex + z * ez
    return point, nrm


@dataclass(frozen=True)
class TraceScene:
    """Read-only view of a posed geometry, laid out for fast intersection."""

    geometry: SensorGeometry
    starts: np.ndarray
    edges: np.ndarray
    kinds: np.ndarray
    lens: PlacedLens | None
    n_ambient: float
    n_polymer: float

    @classmethod
    def from_geometry(cls, geometry: SensorGeometry) -> "TraceScene":
        starts, ends, kinds = geometry.segments()
        lens = None
        if geometry.lens is not None:
            lens = PlacedLens(geometry.lens.spec, geometry.frame, geometry.base_z)
        return cls(geometry, starts, ends - starts, kinds, lens, geometry.n_ambient, geometry.n_polymer)

    def nearest_segment(self, origin, direction):
        """``(t, index)`` of the closest straight-segment hit, or ``(inf, -1)``."""
        px = self.starts[:, 0] - origin[0]
        py = self.starts[:, 1] - origin[1]
        ex, ey = self.edges[:, 0], self.edges[:, 1]
        denom = _cross(direction[0], direction[1], ex, ey)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = _cross(px, py, ex, ey) / denom
            u = _cross(px, py, direction[0], direction[1]) / denom
        ok = (denom != 0) & (t > HIT_TOL) & (u >= 0) & (u <= 1)
        if not np.any(ok):
            return math.inf, -1
        t = np.where(ok, t, np.inf)
        i = int(np.argmin(t))
        return float(t[i]), i

    def segment_normal(self, i, direction):
        ex, ey = self.edges[i]
        nrm = np.array([ey, -ex]) / math.hypot(ex, ey)
        return -nrm if nrm @ direction > 0 else nrm


def trace(ray: Ray, scene: TraceScene, limits: TraceLimits = TraceLimits()) -> TraceOutcome:
    """Follow one ray until a receiver, escape, power floor or bounce limit."""
    origin = np.asarray(ray.origin, dtype=float)
    direction = np.asarray(ray.direction, dtype=float)
    power = float(ray.power)
    medium = ray.medium
    bounces = ray.bounce_count
    out = TraceOutcome(terminal=ESCAPED, receiver=None, initial_power=power,
                       path=[origin.copy()], path_power=[power])
    if power < limits.power_floor:
        out.terminal = ABSORBED
        out.absorbed_power = power
        return out
    while True:
        if bounces >= limits.max_bounces:
            out.terminal = BOUNCE_LIMIT
            out.limit_power = power
            return out
        t_seg, i_seg = scene.nearest_segment(origin, direction)
        lens_hit = None
        if scene.lens is not None:
            lens_hit = intersect_lens(origin, direction, scene.lens)
        if lens_hit is not None:
            t_lens = float((lens_hit[0] - origin) @ direction)
            if t_lens > t_seg:
                lens_hit = None
        if lens_hit is None and i_seg < 0:
            out.terminal = ESCAPED
            out.escaped_power += power
            out.path.append(origin + 10.0 * direction)
            out.path_power.append(power)
            return out
        if lens_hit is not None:
            point, normal = lens_hit
            kind = None
        else:
            point = origin + t_seg * direction
            kind = int(scene.kinds[i_seg])
            normal = scene.segment_normal(i_seg, direction)
        out.path.append(point)
        out.path_power.append(power)
        if medium == POLYMER and limits.bulk_alpha > 0:
            length = math.hypot(*(point - origin))
            kept = power * math.exp(-limits.bulk_alpha * length)
            out.absorbed_power += power - kept
            power = kept
        if kind in (RECEIVER_LEFT, RECEIVER_RIGHT):
            out.terminal = DETECTED
            out.receiver = RECEIVER_NAMES[kind]
            out.deposited_power = power
            return out
        inside = medium == POLYMER
        n_from, n_to = (scene.n_polymer, scene.n_ambient) if inside else (scene.n_ambient, scene.n_polymer)
        new_dir, how, trans = refract_or_reflect(direction, normal, n_from, n_to)
        sin_i = abs(_cross(direction[0], direction[1], normal[0], normal[1]))
        sin_t = abs(_cross(new_dir[0], new_dir[1], normal[0], normal[1])) if how == REFRACTED else math.nan
        out.events.append(SurfaceEvent(point, how, n_from, n_to, sin_i, sin_t, trans))
        if how == REFRACTED:
            transmitted = power * trans
            out.escaped_power += power - transmitted
            power = transmitted
            medium = AMBIENT if inside else POLYMER
        bounces += 1
        direction = new_dir
        origin = point + NUDGE * direction
        if power < limits.power_floor:
            out.terminal = ABSORBED
            out.absorbed_power += power
            return out


def run_fan(
    geometry: SensorGeometry,
    fan: FanParams = FanParams(),
    limits: TraceLimits = TraceLimits(),
    threads: int = 1,
    keep_outcomes: bool = False,
) -> DetectionTally:
    """Trace the emitter fan and tally receiver hits.

    Rays are independent; with ``threads > 1`` they are traced on a pool,
    but the tally is always summed in ray-index order so the result does
    not depend on scheduling.
    """
    scene = TraceScene.from_geometry(geometry)
    rays = emit_fan(geometry.emitter_position, geometry.emitter_axis, fan.count, fan.aperture_deg)
    start = classify_point(geometry.region_map(), geometry.emitter_position)
    for r in rays:
        r.medium = start
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(lambda r: trace(r, scene, limits), rays))
    else:
        outcomes = [trace(r, scene, limits) for r in rays]
    counts = {"left": 0, "right": 0}
    hits = {"left": [], "right": []}
    for o in outcomes:
        if o.terminal == DETECTED:
            counts[o.receiver] += 1
            hits[o.receiver].append(o.deposited_power)
    # correctly rounded sums: exact mirror symmetry survives, order never matters
    power = {name: math.fsum(v) for name, v in hits.items()}
    emitted = math.fsum(o.initial_power for o in outcomes)
    escaped = math.fsum(o.escaped_power for o in outcomes)
    absorbed = math.fsum(o.absorbed_power for o in outcomes)
    limit = math.fsum(o.limit_power for o in outcomes)
    return DetectionTally(counts, power, escaped, absorbed, limit, emitted,
                          outcomes if keep_outcomes else [])


# -- focal spot ---------------------------------------------------------------------


@dataclass(frozen=True)
class FocalSpot:
    depth: float  # along the front-face axis, from the apex (or flat-face centre)
    radius: float  # largest transverse distance of a ray from the spot centre
    center: np.ndarray  # scene coordinates


def refracted_bundle(geometry: SensorGeometry, fan: FanParams = FanParams()):
    """Points and directions of the fan rays just after entering the front face."""
    scene = TraceScene.from_geometry(geometry)
    rays = emit_fan(geometry.emitter_position, geometry.emitter_axis, fan.count, fan.aperture_deg)
    pts, dirs = [], []
    for r in rays:
        hit = None
        if scene.lens is not None:
            hit = intersect_lens(r.origin, r.direction, scene.lens)
        else:
            t, i = scene.nearest_segment(r.origin, r.direction)
            if i >= 0 and scene.kinds[i] == FRONT:
                hit = (r.origin + t * r.direction, scene.segment_normal(i, r.direction))
        if hit is None:
            continue
        new_dir, how, _ = refract_or_reflect(r.direction, hit[1], scene.n_ambient, scene.n_polymer)
        if how == REFRACTED:
            pts.append(hit[0])
            dirs.append(new_dir)
    return np.array(pts).reshape(-1, 2), np.array(dirs).reshape(-1, 2)


def axis_crossings(points, directions, frame: FrontFrame) -> np.ndarray:
    """Depth at which each straight ray line crosses the front-face axis."""
    rel = points - frame.origin
    x = rel @ frame.ex
    z = rel @ frame.ez
    ux = directions @ frame.ex
    uz = directions @ frame.ez
    with np.errstate(divide="ignore", invalid="ignore"):
        return z - x * uz / ux


def focal_spot(geometry: SensorGeometry, fan: FanParams = FanParams(), max_depth: float = 100.0) -> FocalSpot:
    """Depth along the face axis where the refracted bundle is narrowest.

    The transverse spread (largest distance from the bundle centroid) is a
    convex function of depth for straight rays; a coarse sweep over
    ``[0, max_depth]`` is refined with a bounded scalar minimisation.
    """
    pts, dirs = refracted_bundle(geometry, fan)
    if len(pts) < 2:
        raise DomainError(f"only {len(pts)} ray(s) enter the polymer; no focal spot")
    frame = geometry.frame
    rel = pts - frame.origin
    x0, z0 = rel @ frame.ex, rel @ frame.ez
    ux, uz = dirs @ frame.ex, dirs @ frame.ez
    slope = ux / uz

    def transverse(depth):
        return x0 + (depth - z0) * slope

    def spread(depth):
        xs = transverse(depth)
        return float(np.max(np.abs(xs - xs.mean())))

    grid = np.linspace(0.0, max_depth, 2001)
    values = [spread(d) for d in grid]
    k = int(np.argmin(values))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(spread, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    depth, radius = (float(res.x), float(res.fun)) if res.fun <= values[k] else (float(grid[k]), values[k])
    centre_x = float(transverse(depth).mean())
    return FocalSpot(depth, radius, frame.origin + centre_x * frame.ex + depth * frame.ez)


# -- diagnostic dumps ---------------------------------------------------------------


def write_path_dump(outcomes, path) -> Path:
    """``ray_id,vertex_index,x_mm,y_mm,power`` rows, one per path vertex."""
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            fh.write("ray_id,vertex_index,x_mm,y_mm,power\n")
            for rid, o in enumerate(outcomes):
                for k, (pt, pw) in enumerate(zip(o.path, o.path_power)):
                    fh.write(f"{rid},{k},{pt[0]:.9g},{pt[1]:.9g},{pw:.9g}\n")
    except OSError as exc:
        raise OSError(f"cannot write path dump {path}: {exc.strerror or exc}") from exc
    return path


def write_tally_csv(tally: DetectionTally, path) -> Path:
    """``receiver,ray_count,power`` for both receivers."""
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            fh.write("receiver,ray_count,power\n")
            for name in ("left", "right"):
                fh.write(f"{name},{tally.ray_count[name]},{tally.power[name]:.9g}\n")
    except OSError as exc:
        raise OSError(f"cannot write tally {path}: {exc.strerror or exc}") from exc
    return path
