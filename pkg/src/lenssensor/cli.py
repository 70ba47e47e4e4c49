"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical/domain error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import experiment, lensdesign, material
from .errors import DomainError, ValidationError
from .raytrace import FanParams, TraceLimits
from .scene import SceneFile, build_sensor, default_scene_path, load_scene_file, scene_text

log = logging.getLogger("lenssensor")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_DOMAIN = 0, 1, 2, 3


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# -- subcommands ------------------------------------------------------------------------


def cmd_extract_index(args) -> int:
    spectrum = material.read_spectrum(args.spectrum)
    sample = material.SlabSample(spectrum, args.thickness)
    constants = material.compute_constants(sample)
    material.write_constants(constants, args.output)
    print(f"wrote {len(constants)} rows to {args.output}")
    if constants.errors:
        for wl, msg in constants.errors:
            print(f"  {wl:g} nm: {msg}", file=sys.stderr)
        print(f"{len(constants.errors)} row(s) could not be inverted", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_fit_workingcurve(args) -> int:
    points = material.read_working_curve(args.points)
    fit = material.fit_working_curve(points)
    print(f"Dp = {fit.penetration_depth:.6g} um")
    print(f"Ec = {fit.critical_energy:.6g} mJ/cm2")
    print(f"residual rms = {fit.residual_rms:.3g} um")
    if args.output:
        with Path(args.output).open("w", encoding="utf-8") as fh:
            fh.write("penetration_depth_um,critical_energy_mJ_cm2,residual_rms_um\n")
            fh.write(f"{fit.penetration_depth:.9g},{fit.critical_energy:.9g},{fit.residual_rms:.9g}\n")
    return EXIT_OK


def cmd_design_lens(args) -> int:
    spec = lensdesign.LensSpec(args.n1, args.n2, args.s, args.s_prime, args.aperture, args.samples)
    profile = lensdesign.solve_profile(spec)
    lensdesign.export_profile(profile, args.output)
    opl = lensdesign.optical_path_length(profile.x, profile.z, spec)
    dev = float(np.max(np.abs(opl - spec.optical_path)))
    print(f"wrote {len(profile.x)} points to {args.output}")
    print(f"edge sag z(+-{spec.half_aperture_x:g}) = {profile.edge_sag:.9g} mm")
    print(f"optical path {spec.optical_path:.9g} mm, max deviation {dev:.2e} mm")
    return EXIT_OK


TRACE_FLAGS = {"rays": "rays", "aperture": "aperture_deg", "max_bounces": "max_bounces",
               "power_floor": "power_floor", "bulk_alpha": "bulk_alpha"}


def _effective_scene(args) -> SceneFile:
    scene = load_scene_file(args.scene or default_scene_path())
    params = scene.params
    overrides = {}
    if args.n_polymer is not None:
        overrides["n_polymer"] = args.n_polymer
    if args.lens is not None:
        overrides["lens"] = args.lens == "oval"
    if args.focal_distance is not None:
        overrides["focal_distance"] = args.focal_distance
    if args.fork_half_angle is not None:
        overrides["fork_half_angle"] = args.fork_half_angle
    trace = dict(scene.trace)
    for flag, key in TRACE_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            trace[key] = value
    theta = scene.theta_deg if args.theta is None else args.theta
    return SceneFile(replace(params, **overrides), theta, trace)


def cmd_simulate(args) -> int:
    scene = _effective_scene(args)
    fan = FanParams(scene.trace.get("rays", 100), scene.trace.get("aperture_deg", 120.0))
    limits = TraceLimits(
        scene.trace.get("max_bounces", 200),
        scene.trace.get("power_floor", 1e-4),
        scene.trace.get("bulk_alpha", 0.0),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run = {"mode": args.mode}
    # a string default arrives converted but not wrapped by nargs
    groups = args.thetas if isinstance(args.thetas[0], list) else [args.thetas]
    thetas = [t for group in groups for t in group]
    if args.mode == "sweep":
        run["thetas_deg"] = thetas
        geometry = build_sensor(scene.params)
        result = experiment.rotation_sweep(geometry, thetas, fan, limits, args.threads)
        for fmt in ("csv", "svg"):
            experiment.emit_report(result, out, fmt)
        experiment.write_focal_csv(experiment.focal_sweep(geometry, thetas, fan), out / "focal_spot.csv")
        print("theta_deg  left_power  right_power  D=(R-L)/(R+L)")
        for t, l, r, d in zip(result.theta_deg, result.left_power, result.right_power, result.differential):
            print(f"{t:9.3g}  {l:10.6f}  {r:11.6f}  {d:+.6f}")
    elif args.mode == "compare":
        run["thetas_deg"] = thetas
        report = experiment.compare_with_without_lens(scene.params, thetas, fan, limits, args.threads)
        experiment.emit_report(report, out, "csv")
        experiment.emit_report(report, out, "svg")
        experiment.emit_report(report.with_lens, out, "csv", stem="sweep_with_lens")
        experiment.emit_report(report.without_lens, out, "csv", stem="sweep_without_lens")
        print("theta_deg  D_with_lens  D_without_lens  |ratio|")
        for t, a, b in zip(report.theta_deg, report.d_with, report.d_without):
            ratio = report.magnitude_ratio(t) if t != 0 else float("nan")
            print(f"{t:9.3g}  {a:+11.6f}  {b:+14.6f}  {ratio:7.3g}")
    else:
        protocol = experiment.Protocol(args.amplitude, args.speed, args.hold, args.cycles, args.sample_rate)
        readout = experiment.ReadoutModel(args.v_max, args.gain)
        run.update(protocol=asdict(protocol), readout=asdict(readout), discard_cycles=args.discard_cycles)
        geometry = build_sensor(scene.params)
        trace = experiment.synthesize_protocol(geometry, readout, protocol, fan, limits, args.threads)
        folded = experiment.crop_and_fold(trace, args.discard_cycles)
        for result in (trace, folded):
            for fmt in ("csv", "svg"):
                experiment.emit_report(result, out, fmt)
        print(f"{len(trace)} samples over {trace.time_s[-1]:g} s, {trace.cycle_count} cycles")
        amp = float(folded.theta_deg.max())
        for t in (-amp, 0.0, amp):
            row = folded.at(t)
            print(f"theta {t:+g} deg: left {row['left_mean']:.4f} V, right {row['right_mean']:.4f} V")
    (out / "effective_scene.ini").write_text(scene_text(scene), encoding="utf-8")
    (out / "run_config.json").write_text(json.dumps(run, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


# -- parser -----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lenssensor",
        description="Design and simulation of lens-integrated Y-shaped soft optical sensors.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more log output")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("extract-index", formatter_class=fmt,
                       help="refractive index table from a single-layer T/A spectrum")
    p.add_argument("spectrum", help="CSV with header wavelength_nm,T,A")
    p.add_argument("--thickness", type=float, default=0.025,
                   help="layer thickness in mm (one 25 um printed layer)")
    p.add_argument("-o", "--output", required=True, help="constants CSV (wavelength_nm,R,R_F,n)")
    p.set_defaults(func=cmd_extract_index)

    p = sub.add_parser("fit-workingcurve", formatter_class=fmt,
                       help="fit penetration depth and critical energy of a resin")
    p.add_argument("points", help="CSV with header energy_mJ_cm2,cure_depth_um")
    p.add_argument("-o", "--output", help="optional fit summary CSV")
    p.set_defaults(func=cmd_fit_workingcurve)

    p = sub.add_parser("design-lens", formatter_class=fmt, help="solve and export a Cartesian-oval profile")
    p.add_argument("--n1", type=float, default=1.0, help="ambient index (air)")
    p.add_argument("--n2", type=float, default=1.44, help="lens index (cured resin at 860 nm)")
    p.add_argument("--s", type=float, default=1.0, help="emitter-to-apex distance, mm")
    p.add_argument("--s-prime", type=float, default=20.0, help="apex-to-focus distance, mm")
    p.add_argument("--aperture", type=float, default=2.0, help="half aperture, mm (lens spans +-aperture)")
    p.add_argument("--samples", type=int, default=2001, help="odd number of profile points")
    p.add_argument("-o", "--output", required=True, help="profile CSV (x_mm,z_mm)")
    p.set_defaults(func=cmd_design_lens)

    p = sub.add_parser("simulate", formatter_class=fmt,
                       help="ray-trace rotation sweeps, the rotation protocol, or lens vs flat face")
    p.add_argument("--scene", help="scene description file (default: bundled default scene)")
    p.add_argument("--mode", choices=("sweep", "protocol", "compare"), default="sweep")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--thetas", type=_float_list, nargs="+", default="-3,0,3",
                   help="rotation angles for sweep/compare, deg; space separated (--thetas -3 0 3) "
                        "or comma separated (--thetas=-3,0,3)")
    p.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    g = p.add_argument_group("scene overrides (take precedence over the scene file)")
    g.add_argument("--n-polymer", type=float, help="polymer index")
    g.add_argument("--lens", choices=("oval", "none"), help="front face type")
    g.add_argument("--focal-distance", type=float, help="apex-to-focus distance, mm")
    g.add_argument("--fork-half-angle", type=float, help="arm half angle, deg")
    g.add_argument("--theta", type=float, help="static pose angle, deg (recorded only)")
    g.add_argument("--rays", type=int, help="rays in the emitter fan")
    g.add_argument("--aperture", type=float, help="fan aperture, deg")
    g.add_argument("--max-bounces", type=int, help="bounce limit per ray")
    g.add_argument("--power-floor", type=float, help="rays below this power are dropped")
    g.add_argument("--bulk-alpha", type=float, help="bulk attenuation inside the polymer, 1/mm")
    g = p.add_argument_group("protocol mode")
    g.add_argument("--amplitude", type=float, default=3.0, help="rotation amplitude, deg")
    g.add_argument("--speed", type=float, default=15.0, help="angular speed, deg/s")
    g.add_argument("--hold", type=float, default=0.8, help="hold time at full amplitude, s")
    g.add_argument("--cycles", type=int, default=6, help="number of cycles")
    g.add_argument("--sample-rate", type=float, default=100.0, help="sampling rate, Hz")
    g.add_argument("--discard-cycles", type=int, default=1, help="leading cycles left out of the fold")
    g.add_argument("--v-max", type=float, default=3.3, help="receiver voltage in the dark, V")
    g.add_argument("--gain", type=float, default=3.0, help="voltage drop per unit detected power, V")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DomainError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
