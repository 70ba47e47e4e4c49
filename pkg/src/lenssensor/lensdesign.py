"""Cartesian-oval refracting surfaces.

A point emitter sits at distance ``s`` in front of the apex (ambient index
``n1``); the surface images it onto a point at depth ``s_prime`` inside the
lens material (index ``n2``).  Local coordinates: apex at the origin, ``z``
along the optical axis into the material, ``x`` lateral.  The surface is the
zero set of :func:`oval_residual`; ``z(x)`` is found by bisection on
``z in [0, 0.99 s_prime]``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import BracketError, ParseError, ValidationError

RESIDUAL_TOL = 1e-9  # mm
Z_TOL = 1e-13  # mm, bisection stops once the bracket is this narrow
MAX_ITER = 200
BRACKET_FRACTION = 0.99


@dataclass(frozen=True)
class LensSpec:
    n1: float = 1.0
    n2: float = 1.44
    s: float = 1.0  # emitter to apex, mm
    s_prime: float = 20.0  # apex to focus, mm
    half_aperture_x: float = 2.0  # mm
    sample_count: int = 2001

    def __post_init__(self):
        problems = []
        if not self.n1 >= 1:
            problems.append(f"n1 must be >= 1 (got {self.n1})")
        if not self.n2 > self.n1:
            problems.append(f"n2 must exceed n1 (got n1={self.n1}, n2={self.n2})")
        if not self.s > 0:
            problems.append(f"s must be > 0 (got {self.s})")
        if not self.s_prime > 0:
            problems.append(f"s_prime must be > 0 (got {self.s_prime})")
        if not self.half_aperture_x > 0:
            problems.append(f"half_aperture_x must be > 0 (got {self.half_aperture_x})")
        if int(self.sample_count) != self.sample_count or self.sample_count < 3 or self.sample_count % 2 == 0:
            problems.append(f"sample_count must be an odd integer >= 3 (got {self.sample_count})")
        if problems:
            raise ValidationError(problems)

    @property
    def optical_path(self) -> float:
        """Constant emitter-to-focus optical path, ``n1 s + n2 s'``."""
        return self.n1 * self.s + self.n2 * self.s_prime


@dataclass(frozen=True)
class LensProfile:
    spec: LensSpec
    x: np.ndarray
    z: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.x, self.z])

    @property
    def edge_sag(self) -> float:
        return float(self.z[-1])


def optical_path_length(x, z, spec: LensSpec):
    """Emitter-to-surface-to-focus optical path through ``(x, z)``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    return spec.n1 * np.sqrt((z + spec.s) ** 2 + x * x) + spec.n2 * np.sqrt(x * x + (spec.s_prime - z) ** 2)


def oval_residual(x, z, spec: LensSpec):
    """Optical path excess at ``(x, z)``; positive means the path is too long.

    Positive on the emitter side of the surface, negative on the material side.
    """
    return optical_path_length(x, z, spec) - spec.optical_path


def residual_gradient(x, z, spec: LensSpec):
    """``(d/dx, d/dz)`` of :func:`oval_residual`; points toward the emitter side."""
    d1 = math.hypot(z + spec.s, x)
    d2 = math.hypot(x, spec.s_prime - z)
    gx = spec.n1 * x / d1 + spec.n2 * x / d2
    gz = spec.n1 * (z + spec.s) / d1 - spec.n2 * (spec.s_prime - z) / d2
    return gx, gz


def solve_sag(x, spec: LensSpec, tol: float = RESIDUAL_TOL) -> np.ndarray:
    """Sag ``z(x)`` for each lateral coordinate, by vectorised bisection."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo = np.zeros_like(x)
    hi = np.full_like(x, BRACKET_FRACTION * spec.s_prime)
    f_lo = oval_residual(x, lo, spec)
    f_hi = oval_residual(x, hi, spec)
    bad = ~((f_lo >= 0) & (f_hi < 0))
    if np.any(bad):
        xb = x[np.argmax(bad)]
        raise BracketError(
            f"no sign change of the oval residual in z in [0, {hi[0]:g}] at x={xb:g} mm: "
            "aperture too wide for these indices/distances"
        )
    for _ in range(MAX_ITER):
        if np.all(hi - lo <= Z_TOL):
            break
        mid = 0.5 * (lo + hi)
        above = oval_residual(x, mid, spec) >= 0
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    # the apex residual is exactly zero at z = 0
    z = np.where(f_lo == 0, 0.0, 0.5 * (lo + hi))
    resid = np.abs(oval_residual(x, z, spec))
    if np.any(resid > tol):
        xb = x[np.argmax(resid)]
        raise BracketError(f"bisection did not reach |residual| <= {tol:g} at x={xb:g} mm")
    return z


def solve_profile(spec: LensSpec) -> LensProfile:
    """Sampled surface over ``[-half_aperture_x, +half_aperture_x]``.

    Only ``x >= 0`` is solved; the negative half is its exact mirror so the
    profile is symmetric bit for bit, and ``z(0) = 0`` exactly.
    """
    half = (spec.sample_count - 1) // 2
    x_pos = spec.half_aperture_x * np.arange(half + 1) / half
    z_pos = solve_sag(x_pos, spec)
    z_pos[0] = 0.0
    x = np.concatenate([-x_pos[:0:-1], x_pos])
    z = np.concatenate([z_pos[:0:-1], z_pos])
    return LensProfile(spec, x, z)


def export_profile(profile: LensProfile, path) -> None:
    """Write ``x_mm,z_mm`` rows at 9 significant digits after a ``#`` spec header."""
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            for key, value in asdict(profile.spec).items():
                value = value.item() if hasattr(value, "item") else value  # numpy scalars
                fh.write(f"# {key} = {value!r}\n")
            fh.write("x_mm,z_mm\n")
            for xi, zi in zip(profile.x, profile.z):
                fh.write(f"{xi:.9g},{zi:.9g}\n")
    except OSError as exc:
        raise OSError(f"cannot write lens profile to {path}: {exc.strerror or exc}") from exc


def import_profile(path) -> LensProfile:
    path = Path(path)
    meta = {}
    xs, zs = [], []
    with path.open(encoding="utf-8") as fh:
        header_seen = False
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                meta[key.strip()] = value.strip()
                continue
            if not header_seen:
                if line != "x_mm,z_mm":
                    raise ParseError(f"{path}: line {lineno}: expected header 'x_mm,z_mm'")
                header_seen = True
                continue
            try:
                xv, zv = (float(v) for v in line.split(","))
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: malformed row {line!r}") from None
            xs.append(xv)
            zs.append(zv)
    try:
        spec = LensSpec(
            n1=float(meta["n1"]),
            n2=float(meta["n2"]),
            s=float(meta["s"]),
            s_prime=float(meta["s_prime"]),
            half_aperture_x=float(meta["half_aperture_x"]),
            sample_count=int(meta["sample_count"]),
        )
    except KeyError as exc:
        raise ParseError(f"{path}: header lacks lens parameter {exc}") from None
    return LensProfile(spec, np.array(xs), np.array(zs))
