"""2D world of the Y-shaped waveguide sensor.

Scene frame (mm): the pivot, i.e. the centre of the stem's minor base, is the
origin; the stem axis is ``+y`` and the fork lies at ``y = stem_length``.
The front face (Cartesian-oval lens, or a flat face for the no-lens control)
has its edges on the minor-base corners, so an oval apex protrudes towards
the emitter by the lens edge sag.  The emitter sits in air at
``emitter_distance`` in front of the apex (or of the flat face).

Only the front face and the emitter move with a :class:`Pose`; short
junction segments re-join the rotated face to the fixed base corners.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from shapely.geometry import LinearRing

from .errors import ParseError, ValidationError
from .lensdesign import LensProfile, LensSpec, solve_profile

AMBIENT = "ambient"
POLYMER = "polymer"

WALL = 0
RECEIVER_LEFT = 1
RECEIVER_RIGHT = 2
FRONT = 3  # flat front face or lens flank
JUNCTION = 4

MERGE_TOL = 1e-12  # mm, vertices closer than this are treated as one

RECEIVER_NAMES = {RECEIVER_LEFT: "left", RECEIVER_RIGHT: "right"}


def rotation(theta_deg: float) -> np.ndarray:
    t = math.radians(theta_deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class SensorParams:
    """Inputs of :func:`build_sensor`; defaults reproduce the published sensor."""

    stem_length: float = 16.2
    arm_length: float = 22.2
    minor_base: float = 4.0
    major_base: float = 6.2
    arm_width: float = 3.0
    smoothing_a: float = -0.004  # quadratic coefficient of the stem sides, 1/mm
    fork_half_angle: float = 25.0  # deg, arm axis vs stem axis
    emitter_distance: float = 1.0
    n_ambient: float = 1.0
    n_polymer: float = 1.44
    lens: bool = True
    focal_distance: float = 20.0
    lens_half_aperture: float | None = None  # defaults to minor_base / 2
    lens_samples: int = 2001
    side_segments: int = 64

    @property
    def half_aperture(self) -> float:
        return self.minor_base / 2 if self.lens_half_aperture is None else self.lens_half_aperture

    def lens_spec(self) -> LensSpec:
        return LensSpec(
            n1=self.n_ambient,
            n2=self.n_polymer,
            s=self.emitter_distance,
            s_prime=self.focal_distance,
            half_aperture_x=self.half_aperture,
            sample_count=self.lens_samples,
        )


@dataclass(frozen=True)
class Pose:
    theta_deg: float = 0.0
    pivot: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not abs(self.theta_deg) <= 90:
            raise ValidationError(f"|theta| must be <= 90 deg, got {self.theta_deg}")


@dataclass(frozen=True)
class FrontFrame:
    """Placement of the front face: local ``(x, z)`` maps to ``origin + x*ex + z*ez``."""

    origin: np.ndarray  # oval apex, or centre of the flat face
    ex: np.ndarray
    ez: np.ndarray

    def to_scene(self, x, z) -> np.ndarray:
        x = np.asarray(x, dtype=float)[..., None]
        z = np.asarray(z, dtype=float)[..., None]
        return self.origin + x * self.ex + z * self.ez

    def to_local(self, p) -> tuple[float, float]:
        d = np.asarray(p, dtype=float) - self.origin
        return float(d @ self.ex), float(d @ self.ez)

    def rotated(self, rot: np.ndarray, pivot: np.ndarray) -> "FrontFrame":
        return FrontFrame(pivot + rot @ (self.origin - pivot), rot @ self.ex, rot @ self.ez)


@dataclass(frozen=True)
class SensorGeometry:
    params: SensorParams
    wall_polyline: np.ndarray  # fixed boundary, right base corner -> around -> left base corner
    wall_kinds: np.ndarray  # kind of each wall_polyline segment
    lens: LensProfile | None
    frame: FrontFrame
    base_z: float  # local z of the line through the face edges (edge sag, or 0 if flat)
    emitter_position: np.ndarray
    emitter_axis: np.ndarray
    theta_deg: float = 0.0
    pivot: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def n_ambient(self) -> float:
        return self.params.n_ambient

    @property
    def n_polymer(self) -> float:
        return self.params.n_polymer

    @property
    def base_corners(self) -> tuple[np.ndarray, np.ndarray]:
        """Fixed (left, right) corners of the minor base."""
        return self.wall_polyline[-1], self.wall_polyline[0]

    def front_polyline(self) -> np.ndarray:
        """Front face, left to right in local x, in scene coordinates.

        Includes the flat flanks when the lens aperture is narrower than the base.
        """
        half = self.params.minor_base / 2
        if self.lens is None:
            return self.frame.to_scene([-half, half], [0.0, 0.0])
        x, z = self.lens.x, self.lens.z
        a = self.lens.spec.half_aperture_x
        if a < half:
            x = np.concatenate([[-half], x, [half]])
            z = np.concatenate([[self.base_z], z, [self.base_z]])
        return self.frame.to_scene(x, z)

    def boundary(self) -> np.ndarray:
        """Closed outline (first vertex not repeated), counter-clockwise."""
        front = self.front_polyline()
        left, right = self.base_corners
        pts = [left, *front, right, *self.wall_polyline[1:-1]]
        out = [pts[0]]
        for p in pts[1:]:
            if math.hypot(*(p - out[-1])) > MERGE_TOL:
                out.append(p)
        return np.array(out)

    def segments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Straight boundary pieces used by the tracer: ``(start, end, kind)``.

        The oval itself is excluded; it is intersected through its implicit form.
        """
        starts, ends, kinds = [], [], []

        def add(p, q, kind):
            if math.hypot(*(q - p)) > MERGE_TOL:
                starts.append(p)
                ends.append(q)
                kinds.append(kind)

        wp = self.wall_polyline
        for i in range(len(wp) - 1):
            add(wp[i], wp[i + 1], self.wall_kinds[i])
        left, right = self.base_corners
        front = self.front_polyline()
        add(left, front[0], JUNCTION)
        add(front[-1], right, JUNCTION)
        if self.lens is None:
            add(front[0], front[1], FRONT)
        elif self.lens.spec.half_aperture_x < self.params.minor_base / 2:
            add(front[0], front[1], FRONT)
            add(front[-2], front[-1], FRONT)
        return np.array(starts), np.array(ends), np.array(kinds)

    def receiver(self, name: str) -> np.ndarray:
        kind = RECEIVER_LEFT if name == "left" else RECEIVER_RIGHT
        i = int(np.flatnonzero(self.wall_kinds == kind)[0])
        return self.wall_polyline[i : i + 2]

    @property
    def fork_point(self) -> np.ndarray:
        return np.array([0.0, self.params.stem_length])

    @property
    def notch_point(self) -> np.ndarray:
        """Vertex where the inner arm edges meet on the axis."""
        i = len(self.wall_polyline) // 2
        return self.wall_polyline[i]

    def region_map(self) -> "RegionMap":
        return RegionMap(self.n_polymer, self.n_ambient, self.boundary())


@dataclass(frozen=True)
class RegionMap:
    n_polymer: float
    n_ambient: float
    polygon: np.ndarray

    def classify(self, point) -> str:
        return classify_point(self, point)


def winding_number(point, polygon: np.ndarray) -> int:
    """Winding number of a closed polygon (vertices not repeated) about ``point``."""
    px, py = float(point[0]), float(point[1])
    a = polygon
    b = np.roll(polygon, -1, axis=0)
    is_left = (b[:, 0] - a[:, 0]) * (py - a[:, 1]) - (px - a[:, 0]) * (b[:, 1] - a[:, 1])
    up = (a[:, 1] <= py) & (b[:, 1] > py) & (is_left > 0)
    down = (a[:, 1] > py) & (b[:, 1] <= py) & (is_left < 0)
    return int(np.count_nonzero(up) - np.count_nonzero(down))


def classify_point(region_map: RegionMap, point) -> str:
    return POLYMER if winding_number(point, region_map.polygon) != 0 else AMBIENT


def is_simple(polygon: np.ndarray) -> bool:
    return bool(LinearRing(polygon).is_simple)


def _validate(params: SensorParams) -> None:
    p = params
    problems = []
    for name in ("stem_length", "arm_length", "minor_base", "major_base", "arm_width",
                 "emitter_distance", "focal_distance"):
        if not getattr(p, name) > 0:
            problems.append(f"{name} must be > 0 (got {getattr(p, name)})")
    if not p.arm_width < p.major_base:
        problems.append(f"arm_width ({p.arm_width}) must be < major_base ({p.major_base})")
    if not 0 < p.fork_half_angle < 90:
        problems.append(f"fork_half_angle must lie in (0, 90) deg (got {p.fork_half_angle})")
    if not p.n_polymer > p.n_ambient >= 1:
        problems.append(f"need n_polymer > n_ambient >= 1 (got {p.n_polymer}, {p.n_ambient})")
    if p.lens and not 0 < p.half_aperture <= p.minor_base / 2:
        problems.append(f"lens half aperture {p.half_aperture} must lie in (0, minor_base/2]")
    if p.side_segments < 1:
        problems.append("side_segments must be >= 1")
    if not problems:
        phi = math.radians(p.fork_half_angle)
        notch_y = p.stem_length + p.arm_width * math.sin(phi) - (
            (p.arm_width * math.cos(phi) - p.major_base / 2) / math.sin(phi)
        ) * math.cos(phi)
        if not notch_y > p.stem_length:
            problems.append(
                "inner arm edges meet below the fork line: increase fork_half_angle "
                "or reduce arm_width"
            )
        y = np.linspace(0.0, p.stem_length, 257)
        if np.any(_stem_side(p, y) <= 0):
            problems.append("smoothing_a bends the stem sides across the axis")
    if problems:
        raise ValidationError(problems)


def _stem_side(p: SensorParams, y):
    """Right stem side ``x(y)``: quadratic in y through both base corners."""
    lo, hi, L = p.minor_base / 2, p.major_base / 2, p.stem_length
    b = (hi - lo - p.smoothing_a * L * L) / L
    return lo + b * y + p.smoothing_a * y * y


def build_sensor(params: SensorParams | None = None, **overrides) -> SensorGeometry:
    """Assemble the Y outline, receivers, front face and emitter at zero rotation."""
    p = replace(params or SensorParams(), **overrides)
    _validate(p)
    phi = math.radians(p.fork_half_angle)
    along = np.array([math.sin(phi), math.cos(phi)])  # right arm direction
    inward = np.array([-math.cos(phi), math.sin(phi)])

    # right half: base corner, stem side, arm outer edge, end face, inner edge, notch
    y = p.stem_length * np.arange(p.side_segments + 1) / p.side_segments
    side = np.column_stack([_stem_side(p, y), y])
    side[-1] = (p.major_base / 2, p.stem_length)
    fork = side[-1]
    outer_end = fork + p.arm_length * along
    inner_end = outer_end + p.arm_width * inward
    inner_start = fork + p.arm_width * inward
    t = -inner_start[0] / along[0]
    notch = np.array([0.0, inner_start[1] + t * along[1]])

    right = np.vstack([side, outer_end, inner_end])
    right_kinds = [WALL] * (len(side) - 1) + [WALL, RECEIVER_RIGHT, WALL]
    left = right[::-1] * np.array([-1.0, 1.0])
    left_kinds = [WALL, RECEIVER_LEFT, WALL] + [WALL] * (len(side) - 1)
    polyline = np.vstack([right, notch, left])
    kinds = np.array(right_kinds + left_kinds)

    if p.lens:
        profile = solve_profile(p.lens_spec())
        base_z = profile.edge_sag
        frame = FrontFrame(np.array([0.0, -base_z]), np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    else:
        profile = None
        base_z = 0.0
        frame = FrontFrame(np.zeros(2), np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    emitter = frame.origin - p.emitter_distance * frame.ez
    return SensorGeometry(
        params=p,
        wall_polyline=polyline,
        wall_kinds=kinds,
        lens=profile,
        frame=frame,
        base_z=base_z,
        emitter_position=emitter,
        emitter_axis=frame.ez.copy(),
    )


def apply_pose(geometry: SensorGeometry, pose: Pose) -> SensorGeometry:
    """Rigidly rotate the front face and emitter about the pivot.

    Positive angles are counter-clockwise, i.e. they tilt the emitter axis
    towards the left arm.
    """
    if pose.theta_deg == 0:
        return geometry
    pivot = np.asarray(pose.pivot, dtype=float)
    rot = rotation(pose.theta_deg)
    return replace(
        geometry,
        frame=geometry.frame.rotated(rot, pivot),
        emitter_position=pivot + rot @ (geometry.emitter_position - pivot),
        emitter_axis=rot @ geometry.emitter_axis,
        theta_deg=geometry.theta_deg + pose.theta_deg,
    )


# -- scene description file ------------------------------------------------------

SCENE_KEYS = {
    "sensor": {
        "stem_length": float, "arm_length": float, "minor_base": float, "major_base": float,
        "arm_width": float, "smoothing_a": float, "fork_half_angle": float,
        "emitter_distance": float, "side_segments": int,
    },
    "media": {"n_ambient": float, "n_polymer": float},
    "lens": {"lens": str, "focal_distance": float, "half_aperture": float, "samples": int},
    "pose": {"theta_deg": float},
    "trace": {
        "rays": int, "aperture_deg": float, "max_bounces": int,
        "power_floor": float, "bulk_alpha": float,
    },
}

_PARAM_NAMES = {"half_aperture": "lens_half_aperture", "samples": "lens_samples"}


@dataclass(frozen=True)
class SceneFile:
    params: SensorParams
    theta_deg: float = 0.0
    trace: dict = field(default_factory=dict)


def parse_scene_text(text: str, source: str = "<scene>") -> SceneFile:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ParseError(f"{source}: {exc}") from None
    problems = []
    values = {}
    for section in cp.sections():
        if section not in SCENE_KEYS:
            problems.append(f"unknown section [{section}]")
            continue
        for key, raw in cp.items(section):
            conv = SCENE_KEYS[section].get(key)
            if conv is None:
                problems.append(f"unknown key '{key}' in [{section}]")
                continue
            try:
                values[(section, key)] = conv(raw)
            except ValueError:
                problems.append(f"[{section}] {key} = {raw!r} is not a valid {conv.__name__}")
    if problems:
        raise ParseError([f"{source}: {m}" for m in problems])
    kw = {}
    trace = {}
    theta = 0.0
    for (section, key), value in values.items():
        if section == "trace":
            trace[key] = value
        elif section == "pose":
            theta = value
        elif key == "lens":
            if value.lower() not in ("oval", "none"):
                raise ParseError(f"{source}: [lens] lens must be 'oval' or 'none', got {value!r}")
            kw["lens"] = value.lower() == "oval"
        else:
            kw[_PARAM_NAMES.get(key, key)] = value
    return SceneFile(SensorParams(**kw), theta, trace)


def load_scene_file(path) -> SceneFile:
    path = Path(path)
    return parse_scene_text(path.read_text(encoding="utf-8"), source=str(path))


def scene_text(scene: SceneFile) -> str:
    """Render a scene in the same ``key = value`` layout :func:`load_scene_file` reads."""
    p = asdict(scene.params)
    lines = ["[sensor]"]
    for key in SCENE_KEYS["sensor"]:
        lines.append(f"{key} = {p[key]!r}")
    lines += ["", "[media]", f"n_ambient = {p['n_ambient']!r}", f"n_polymer = {p['n_polymer']!r}"]
    lines += ["", "[lens]", f"lens = {'oval' if p['lens'] else 'none'}",
              f"focal_distance = {p['focal_distance']!r}"]
    if p["lens_half_aperture"] is not None:
        lines.append(f"half_aperture = {p['lens_half_aperture']!r}")
    lines.append(f"samples = {p['lens_samples']!r}")
    lines += ["", "[pose]", f"theta_deg = {scene.theta_deg!r}"]
    if scene.trace:
        lines += ["", "[trace]"] + [f"{k} = {v!r}" for k, v in scene.trace.items()]
    return "\n".join(lines) + "\n"


def default_scene_path() -> Path:
    return Path(__file__).with_name("data") / "default_scene.ini"
