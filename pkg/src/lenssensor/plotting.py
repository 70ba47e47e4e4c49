"""Self-contained SVG figures for sweep, protocol and comparison results."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed salt and no date so repeated runs give byte-identical files
SVG_RC = {"svg.hashsalt": "lenssensor", "svg.fonttype": "path"}
COLORS = {"left": "tab:blue", "right": "tab:red"}


def _save(fig, path: Path) -> Path:
    with matplotlib.rc_context(SVG_RC):
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise OSError(f"cannot write figure {path}: {exc.strerror or exc}") from exc
        finally:
            plt.close(fig)
    return path


def plot_sweep(result, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(result.theta_deg, result.left_power, "o-", color=COLORS["left"], label="ReceiverL")
    ax.plot(result.theta_deg, result.right_power, "s-", color=COLORS["right"], label="ReceiverR")
    ax.set_xlabel("rotation angle (deg)")
    ax.set_ylabel("detected power (fraction of emitted)")
    ax.legend()
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_folded(folded, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for side, mean, std in (("left", folded.left_mean, folded.left_std),
                            ("right", folded.right_mean, folded.right_std)):
        ax.plot(folded.theta_deg, mean, color=COLORS[side], label=f"Receiver{side[0].upper()}", gid=f"mean_{side}")
        ax.fill_between(folded.theta_deg, mean - std, mean + std, color=COLORS[side], alpha=0.25, lw=0,
                        gid=f"band_{side}")
    ax.set_xlabel("rotation angle (deg)")
    ax.set_ylabel("voltage (V)")
    ax.set_title(f"mean of {folded.cycles_used} cycles, shaded: ± std")
    ax.legend()
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_protocol(trace, path) -> Path:
    fig, (ax_v, ax_t) = plt.subplots(2, 1, figsize=(7, 4.5), sharex=True)
    ax_v.plot(trace.time_s, trace.left_voltage, color=COLORS["left"], label="ReceiverL")
    ax_v.plot(trace.time_s, trace.right_voltage, color=COLORS["right"], label="ReceiverR")
    ax_v.set_ylabel("voltage (V)")
    ax_v.legend(loc="upper right")
    ax_t.plot(trace.time_s, trace.theta_deg, color="k")
    ax_t.set_ylabel("angle (deg)")
    ax_t.set_xlabel("time (s)")
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_comparison(report, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(report.theta_deg, report.d_with, "o-", color="k", label="with lens")
    ax.plot(report.theta_deg, report.d_without, "s--", color="0.5", label="flat face")
    ax.axhline(0, color="0.8", lw=0.8)
    ax.set_xlabel("rotation angle (deg)")
    ax.set_ylabel("(R - L) / (R + L)")
    ax.legend()
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_scene(geometry, outcomes=(), path=None, ax=None):
    """Outline, front face, receivers and (optionally) traced ray paths."""
    own = ax is None
    if own:
        fig, ax = plt.subplots(figsize=(6, 7))
    b = geometry.boundary()
    closed = np.vstack([b, b[:1]])
    ax.plot(closed[:, 0], closed[:, 1], color="k", lw=0.8)
    for side in ("left", "right"):
        seg = geometry.receiver(side)
        ax.plot(seg[:, 0], seg[:, 1], color=COLORS[side], lw=3)
    for o in outcomes:
        p = np.array(o.path)
        ax.plot(p[:, 0], p[:, 1], color="orange", lw=0.4, alpha=0.7)
    e = geometry.emitter_position
    ax.plot([e[0]], [e[1]], "k^")
    ax.set_aspect("equal")
    ax.set_xlabel("x (mm)")
    ax.set_ylabel("y (mm)")
    if own and path is not None:
        fig.tight_layout()
        return _save(fig, Path(path))
    return ax


def plot_result(result, path) -> Path:
    from .experiment import ComparisonReport, FoldedCurves, ProtocolTrace, SweepResult

    plotters = {
        SweepResult: plot_sweep,
        FoldedCurves: plot_folded,
        ProtocolTrace: plot_protocol,
        ComparisonReport: plot_comparison,
    }
    return plotters[type(result)](result, path)
