"""Refractive index of a thin printed layer from its T/A spectrum.

A single cured layer (25 um) is treated as an absorbing plane-parallel slab.
We synthesize a spectrum with a known dispersion, run the inversion and check
that the index comes back.  Then we fit a working curve for the same resin.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from lenssensor.material import (
    SlabSample,
    Spectrum,
    WorkingCurvePoint,
    alpha_for_transmission,
    compute_constants,
    fit_working_curve,
    forward_slab_model,
    index_at_wavelength,
)

OUT = Path(__file__).resolve().parent / "output"
OUT.mkdir(exist_ok=True)
h = 0.025  # mm

# a simple dispersion: higher index towards the blue, 1.44 near 860 nm
wl = np.arange(450.0, 901.0, 10.0)
n_true = 1.44 + 0.1 * (860.0 - wl) / 410.0
tau = 0.995 - 0.03 * np.exp(-(wl - 450.0) / 120.0)

T, A = [], []
for w, n, t in zip(wl, n_true, tau):
    Tw, Rw = forward_slab_model(n, alpha_for_transmission(t, h), h, w)
    T.append(Tw)
    A.append(1.0 - Tw - Rw)
spectrum = Spectrum(wl, T, A)
print(f"T ranges {min(T):.3f}..{max(T):.3f}, A {min(A):.4f}..{max(A):.4f}")

constants = compute_constants(SlabSample(spectrum, h))
print("max |n - n_true| =", np.max(np.abs(constants.n - n_true)))
for w in (450, 500, 860):
    print(f"n({w} nm) = {index_at_wavelength(constants, w):.4f}")

fig, ax = plt.subplots(figsize=(5, 3.5))
ax.plot(wl, constants.n, "o", ms=3, label="recovered")
ax.plot(wl, n_true, "-", lw=0.8, label="input")
ax.set_xlabel("wavelength (nm)")
ax.set_ylabel("n")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "refractive_index.svg")

# working curve: cure depth vs exposure energy at 13 mW/cm2
points = [WorkingCurvePoint(13.0 * s, d) for s, d in zip(range(2, 8), (171, 201, 233, 250, 272, 283))]
fit = fit_working_curve(points)
print(f"Dp = {fit.penetration_depth:.1f} um, Ec = {fit.critical_energy:.2f} mJ/cm2, "
      f"Dc(40) = {fit.cure_depth(40.0):.0f} um")
