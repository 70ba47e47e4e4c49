"""Optical constants of a cured single layer, and photopolymer working curves.

A single printed layer is treated as an incoherent, plane-parallel,
partially absorbing slab.  Measured transmittance ``T`` and absorbance ``A``
give the reflectance ``R = 1 - T - A``; ``(R, T)`` is inverted in closed form
for the interface reflectance ``R_F`` and then for the refractive index.

Units: wavelengths in nm, thicknesses in mm, exposure energies in mJ/cm^2,
cure depths in um.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ParseError, ValidationError

SPECTRUM_HEADER = ("wavelength_nm", "T", "A")
WORKING_CURVE_HEADER = ("energy_mJ_cm2", "cure_depth_um")
CONSTANTS_HEADER = ("wavelength_nm", "R", "R_F", "n")

#: rows violating the simplex by at most this much are clamped, not rejected
SIMPLEX_SLACK = 1e-3
#: below this |R - R_F| the absorption term is taken as exactly zero
LOG_DEGENERACY = 1e-12

NM_PER_MM = 1e6


@dataclass(frozen=True)
class Spectrum:
    """Per-wavelength transmittance and absorbance of one slab."""

    wavelength_nm: np.ndarray
    T: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        wl = np.asarray(self.wavelength_nm, dtype=float).copy()
        T = np.asarray(self.T, dtype=float).copy()
        A = np.asarray(self.A, dtype=float).copy()
        if not (wl.ndim == T.ndim == A.ndim == 1) or not (len(wl) == len(T) == len(A)):
            raise ValidationError("wavelength, T and A must be 1-D arrays of equal length")
        if len(wl) == 0:
            raise ValidationError("spectrum has no samples")
        problems = []
        if not np.all(np.isfinite(wl)) or np.any(wl <= 0):
            problems.append("wavelengths must be finite and positive")
        if np.any(np.diff(wl) <= 0):
            problems.append("wavelengths must be strictly increasing")
        for i in range(len(wl)):
            t, a = T[i], A[i]
            excess = max(-t, t - 1.0, -a, a - 1.0, t + a - 1.0)
            if not (math.isfinite(t) and math.isfinite(a)) or excess > SIMPLEX_SLACK:
                problems.append(
                    f"sample {i} ({wl[i]:g} nm): T={t:g}, A={a:g} outside 0<=T,A, T+A<=1"
                )
            elif excess > 0:
                T[i] = min(max(t, 0.0), 1.0)
                A[i] = min(max(a, 0.0), 1.0 - T[i])
                warnings.warn(
                    f"clamped sample at {wl[i]:g} nm onto T+A<=1 (violation {excess:.2e})",
                    stacklevel=3,
                )
        if problems:
            raise ValidationError(problems)
        for name, arr in (("wavelength_nm", wl), ("T", T), ("A", A)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self):
        return len(self.wavelength_nm)

    @property
    def R(self) -> np.ndarray:
        return 1.0 - self.T - self.A


@dataclass(frozen=True)
class SlabSample:
    spectrum: Spectrum
    thickness_mm: float

    def __post_init__(self):
        if not self.thickness_mm > 0:
            raise ValidationError(f"thickness must be > 0 mm, got {self.thickness_mm}")


@dataclass(frozen=True)
class OpticalConstants:
    """Derived table; rows that failed inversion carry ``nan`` and an entry in ``errors``."""

    wavelength_nm: np.ndarray
    R: np.ndarray
    R_F: np.ndarray
    n: np.ndarray
    errors: tuple = ()

    def __len__(self):
        return len(self.wavelength_nm)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.n)


@dataclass(frozen=True)
class WorkingCurvePoint:
    energy: float  # mJ/cm^2
    cure_depth: float  # um

    def __post_init__(self):
        if not self.energy > 0:
            raise ValidationError(f"exposure energy must be > 0, got {self.energy}")
        if not self.cure_depth >= 0:
            raise ValidationError(f"cure depth must be >= 0, got {self.cure_depth}")


@dataclass(frozen=True)
class WorkingCurveFit:
    penetration_depth: float  # Dp, um
    critical_energy: float  # Ec, mJ/cm^2
    residual_rms: float  # um

    def cure_depth(self, energy):
        """Cure depth predicted by the fitted curve (um)."""
        return self.penetration_depth * np.log(np.asarray(energy, dtype=float) / self.critical_energy)


# -- slab optics ------------------------------------------------------------


def reflectance_from_TA(T: float, A: float) -> float:
    """Reflectance of the slab from transmittance and absorbance, ``R = 1 - T - A``."""
    if T < 0 or A < 0 or T > 1 or A > 1:
        raise DomainError(f"T={T}, A={A} must lie in [0, 1]")
    if T + A > 1:
        raise DomainError(f"T + A = {T + A} exceeds 1: inconsistent spectrum")
    return 1.0 - T - A


def interface_reflectance(R: float, T: float) -> float:
    """Single-interface reflectance ``R_F`` recovered from slab ``(R, T)``."""
    if not (0 <= R <= 1 and 0 <= T <= 1) or R + T > 1 + 1e-15:
        raise DomainError(f"(R={R}, T={T}) is not a valid reflectance/transmittance pair")
    b = 2.0 + T * T - (1.0 - R) ** 2
    disc = b * b - 4.0 * R * (2.0 - R)
    if disc < 0:
        raise DomainError(f"non-physical (R={R}, T={T}): discriminant {disc:.3e} < 0")
    rf = (b - math.sqrt(disc)) / (2.0 * (2.0 - R))
    # rounding can push an exact zero slightly negative
    return min(max(rf, 0.0), R)


def refractive_index(R: float, T: float, h_mm: float, wavelength_nm: float) -> float:
    """Real refractive index of a partially absorbing plane-parallel slab.

    ``h_mm`` is the geometrical thickness and ``wavelength_nm`` the vacuum
    wavelength; both are converted to mm before forming ``lambda/(4 pi h)``.
    """
    if not h_mm > 0:
        raise DomainError(f"thickness must be positive, got {h_mm}")
    if not T > 0:
        raise DomainError("T must be positive to invert the slab model")
    rf = interface_reflectance(R, T)
    diff = R - rf
    if abs(diff) < LOG_DEGENERACY:
        absorption = 0.0
    elif diff < 0:
        raise DomainError(f"R={R} below interface reflectance R_F={rf}")
    else:
        ratio = rf * T / diff
        if ratio <= 0:
            absorption = 0.0 if rf == 0 else math.inf
        else:
            scale = (wavelength_nm / NM_PER_MM) / (4.0 * math.pi * h_mm)
            absorption = (scale * math.log(ratio)) ** 2
    radicand = 4.0 * rf / (1.0 - rf) ** 2 - absorption
    if radicand < 0:
        raise DomainError(
            f"absorption term dominates (radicand {radicand:.3e} < 0): "
            "check thickness/wavelength units"
        )
    return (1.0 + rf) / (1.0 - rf) + math.sqrt(radicand)


def forward_slab_model(n: float, alpha_per_mm: float, h_mm: float, wavelength_nm: float | None = None):
    """Incoherent multiple-reflection slab: returns ``(T, R)``.

    With ``wavelength_nm`` given, the extinction coefficient
    ``k = alpha * lambda / (4 pi)`` enters the normal-incidence interface
    reflectance; without it ``k`` is neglected.
    """
    if n < 1 or alpha_per_mm < 0 or not h_mm > 0:
        raise ValidationError(f"invalid slab n={n}, alpha={alpha_per_mm}, h={h_mm}")
    k = 0.0 if wavelength_nm is None else alpha_per_mm * (wavelength_nm / NM_PER_MM) / (4.0 * math.pi)
    rf = ((n - 1.0) ** 2 + k * k) / ((n + 1.0) ** 2 + k * k)
    tau = math.exp(-alpha_per_mm * h_mm)
    denom = 1.0 - rf * rf * tau * tau
    T = (1.0 - rf) ** 2 * tau / denom
    R = rf + rf * tau * tau * (1.0 - rf) ** 2 / denom
    return T, R


def alpha_for_transmission(tau: float, h_mm: float) -> float:
    """Absorption coefficient (1/mm) giving single-pass transmission ``tau`` over ``h_mm``."""
    return -math.log(tau) / h_mm


def compute_constants(sample: SlabSample, strict: bool = False) -> OpticalConstants:
    """Invert every spectrum row into ``(R, R_F, n)``.

    Rows whose inversion fails keep their place with ``nan`` values and an
    ``(wavelength_nm, message)`` entry in ``errors``.  With ``strict=True``
    the collected failures are raised as one :class:`DomainError` instead.
    """
    spec = sample.spectrum
    count = len(spec)
    R = np.full(count, np.nan)
    RF = np.full(count, np.nan)
    n = np.full(count, np.nan)
    errors = []
    for i, (wl, t, a) in enumerate(zip(spec.wavelength_nm, spec.T, spec.A)):
        try:
            R[i] = reflectance_from_TA(float(t), float(a))
            RF[i] = interface_reflectance(R[i], float(t))
            n[i] = refractive_index(R[i], float(t), sample.thickness_mm, float(wl))
        except DomainError as exc:
            errors.append((float(wl), str(exc)))
    if strict and errors:
        raise DomainError("; ".join(f"{wl:g} nm: {msg}" for wl, msg in errors))
    return OpticalConstants(spec.wavelength_nm, R, RF, n, tuple(errors))


def index_at_wavelength(constants: OpticalConstants, wavelength_nm: float) -> float:
    """Piecewise-linear index between table nodes; no extrapolation."""
    ok = constants.valid
    wl = constants.wavelength_nm[ok]
    if len(wl) == 0:
        raise DomainError("constants table has no valid rows")
    if not wl[0] <= wavelength_nm <= wl[-1]:
        raise ValidationError(
            f"{wavelength_nm} nm outside table range [{wl[0]:g}, {wl[-1]:g}] nm"
        )
    return float(np.interp(wavelength_nm, wl, constants.n[ok]))


# -- working curve -------------------------------------------------------------


def fit_working_curve(points: Sequence[WorkingCurvePoint]) -> WorkingCurveFit:
    """Ordinary least squares of cure depth against ``ln E``.

    Slope is the penetration depth; the intercept gives the critical energy.
    Sums use ``math.fsum`` so the result does not depend on point order.
    """
    if len(points) < 2:
        raise ValidationError("working-curve fit needs at least 2 points")
    x = [math.log(p.energy) for p in points]
    y = [p.cure_depth for p in points]
    m = len(x)
    xm = math.fsum(x) / m
    ym = math.fsum(y) / m
    sxx = math.fsum((xi - xm) ** 2 for xi in x)
    if sxx == 0:
        raise DomainError("degenerate fit: all exposure energies are equal")
    sxy = math.fsum((xi - xm) * (yi - ym) for xi, yi in zip(x, y))
    dp = sxy / sxx
    if not dp > 0:
        raise DomainError(f"fitted penetration depth {dp:g} um is not positive")
    intercept = ym - dp * xm
    ec = math.exp(-intercept / dp)
    rms = math.sqrt(math.fsum((yi - (intercept + dp * xi)) ** 2 for xi, yi in zip(x, y)) / m)
    return WorkingCurveFit(dp, ec, rms)


# -- file formats --------------------------------------------------------------


def _read_table(path, header: Sequence[str]) -> list[list[float]]:
    path = Path(path)
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.lstrip().startswith("#"))
        first = next(reader, None)
        if first is None or tuple(c.strip() for c in first) != tuple(header):
            raise ParseError(f"{path}: expected header '{','.join(header)}', got {first!r}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(f"{path}: row {lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                rows.append([float(c) for c in rec])
            except ValueError:
                raise ParseError(f"{path}: row {lineno}: non-numeric field in {rec!r}") from None
    return rows


def read_spectrum(path) -> Spectrum:
    rows = _read_table(path, SPECTRUM_HEADER)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    data = np.array(rows)
    return Spectrum(data[:, 0], data[:, 1], data[:, 2])


def write_spectrum(spectrum: Spectrum, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(SPECTRUM_HEADER) + "\n")
        for wl, t, a in zip(spectrum.wavelength_nm, spectrum.T, spectrum.A):
            fh.write(f"{float(wl)!r},{float(t)!r},{float(a)!r}\n")


def read_working_curve(path) -> list[WorkingCurvePoint]:
    return [WorkingCurvePoint(e, d) for e, d in _read_table(path, WORKING_CURVE_HEADER)]


def write_working_curve(points: Iterable[WorkingCurvePoint], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(WORKING_CURVE_HEADER) + "\n")
        for p in points:
            fh.write(f"{float(p.energy)!r},{float(p.cure_depth)!r}\n")


def _g9(v: float) -> str:
    return "nan" if not math.isfinite(v) else f"{v:.9g}"


def write_constants(constants: OpticalConstants, path) -> None:
    """Export ``wavelength_nm,R,R_F,n`` at 9 significant digits."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(CONSTANTS_HEADER) + "\n")
        for row in zip(constants.wavelength_nm, constants.R, constants.R_F, constants.n):
            fh.write(",".join(_g9(float(v)) for v in row) + "\n")


def read_constants(path) -> OpticalConstants:
    data = np.array(_read_table(path, CONSTANTS_HEADER), dtype=float).reshape(-1, 4)
    return OpticalConstants(data[:, 0], data[:, 1], data[:, 2], data[:, 3])
