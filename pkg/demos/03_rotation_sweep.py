"""Steering light between the two arms by rotating the lens.

Rotating the lens and emitter together moves the focal spot sideways.  At rest
the spot sits between the arms and both receivers see the same power; a few
degrees of rotation push it into one arm.  A flat face gives almost no contrast.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from lenssensor.experiment import compare_with_without_lens, emit_report
from lenssensor.plotting import plot_scene
from lenssensor.raytrace import FanParams, focal_spot, run_fan
from lenssensor.scene import Pose, apply_pose, build_sensor

OUT = Path(__file__).resolve().parent / "output"
OUT.mkdir(exist_ok=True)

sensor = build_sensor()
fig, axes = plt.subplots(1, 3, figsize=(12, 6), sharey=True)
for ax, theta in zip(axes, (-3.0, 0.0, 3.0)):
    g = apply_pose(sensor, Pose(theta))
    tally = run_fan(g, FanParams(count=41), keep_outcomes=True)
    plot_scene(g, tally.outcomes, ax=ax)
    spot = focal_spot(g)
    ax.plot(*spot.center, "r*")
    ax.set_title(f"{theta:+g} deg: L={tally.left_power:.2f}, R={tally.right_power:.2f}")
fig.tight_layout()
fig.savefig(OUT / "ray_paths.svg")

thetas = np.round(np.arange(-5.0, 5.01, 0.5), 10)
report = compare_with_without_lens(thetas=thetas)
for t, a, b in zip(report.theta_deg, report.d_with, report.d_without):
    print(f"{t:+5.1f} deg  D_lens={a:+.3f}  D_flat={b:+.3f}")
emit_report(report, OUT, "svg")
emit_report(report, OUT, "csv")
