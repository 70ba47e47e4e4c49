"""Six trapezoidal rotation cycles, read out as receiver voltages.

The stage turns to -3 deg, holds, returns, turns to +3 deg, holds and returns.
More light on a receiver means a lower voltage.  Dropping the first cycle and
the holds, the remaining five cycles are folded onto the rotation angle.
"""

from pathlib import Path

from lenssensor.experiment import Protocol, ReadoutModel, crop_and_fold, emit_report, synthesize_protocol
from lenssensor.scene import build_sensor

OUT = Path(__file__).resolve().parent / "output"

protocol = Protocol(amplitude=3.0, speed=15.0, hold=0.8, cycles=6, sample_rate=100.0)
trace = synthesize_protocol(build_sensor(), ReadoutModel(v_max=3.3, gain=3.0), protocol)
print(f"{len(trace)} samples over {trace.time_s[-1]:.1f} s")

folded = crop_and_fold(trace, discard_cycles=1)
for theta in (-3.0, 0.0, 3.0):
    row = folded.at(theta)
    print(f"{theta:+.0f} deg: V_L={row['left_mean']:.3f} V, V_R={row['right_mean']:.3f} V, "
          f"std {max(row['left_std'], row['right_std']):.1e}")

for result in (trace, folded):
    emit_report(result, OUT, "svg")
    emit_report(result, OUT, "csv")
