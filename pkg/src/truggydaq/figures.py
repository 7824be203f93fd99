"""Matplotlib figure rendering for the report paths.

Each helper writes one PNG next to the delimited output and returns the
written path.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .analysis import TEMP_NAMES, Series, _gps_xy  # noqa: E402


def _save(fig, out_dir, name):
    path = os.path.join(out_dir, name)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def render_path_figure(records, out_dir, name="path.png"):
    s = Series(records)
    fig, ax = plt.subplots(figsize=(6, 6))
    try:
        x, y, fix = _gps_xy(s)
        ax.plot(x[fix], y[fix], ".", ms=2, color="tab:blue")
    except Exception:
        ax.text(0.5, 0.5, "no GPS fix", ha="center", va="center")
    ax.set_xlabel("east [m]")
    ax.set_ylabel("north [m]")
    ax.set_title("GPS trajectory")
    ax.set_aspect("equal", adjustable="datalim")
    return _save(fig, out_dir, name)


def render_pitch_figure(records, out_dir, name="pitch.png"):
    s = Series(records)
    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(s.t_ms / 1000.0, s.pitch, lw=0.8)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("pitch [deg]")
    ax.set_title("Pitch angle")
    return _save(fig, out_dir, name)


def render_wheel_diff_figure(records, out_dir, name="wheel_diff.png"):
    s = Series(records)
    fig, ax = plt.subplots(figsize=(8, 3))
    t = s.t_ms / 1000.0
    ax.plot(t, s.diff_lr_norm, lw=0.8, label="left-right (norm)")
    ax.plot(t, s.diff_fr_norm, lw=0.8, label="front-rear (norm)")
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("normalized difference")
    ax.set_title("Wheel speed differences")
    ax.legend(loc="upper right", fontsize=8)
    return _save(fig, out_dir, name)


def render_temps_figure(records, out_dir, name="temps.png"):
    s = Series(records)
    fig, ax = plt.subplots(figsize=(8, 3))
    t = s.t_ms / 1000.0
    for c, label in enumerate(TEMP_NAMES):
        ax.plot(t, s.temps[:, c], lw=0.9, label="t_" + label)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("temperature [degC]")
    ax.set_title("Component temperatures")
    ax.legend(loc="upper left", fontsize=8)
    return _save(fig, out_dir, name)


def render_servo_figure(records, out_dir, name="servo.png"):
    s = Series(records)
    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(s.t_ms / 1000.0, s.servo, lw=0.8)
    ax.axhline(1540, color="r", lw=0.5, ls="--")
    ax.axhline(1460, color="r", lw=0.5, ls="--")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("servo PWM [us]")
    ax.set_title("Steering servo output")
    return _save(fig, out_dir, name)


def render_analysis_figures(records, out_dir):
    return [
        render_path_figure(records, out_dir),
        render_pitch_figure(records, out_dir),
        render_wheel_diff_figure(records, out_dir),
        render_temps_figure(records, out_dir),
        render_servo_figure(records, out_dir),
    ]


def render_compare_figure(summary_a, summary_b, out_dir, name="compare.png"):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    xs = range(len(TEMP_NAMES))
    w = 0.38
    ax1.bar([x - w / 2 for x in xs],
            [summary_a.temp_delta_c[k] for k in TEMP_NAMES], w,
            label=summary_a.scenario_name or "a")
    ax1.bar([x + w / 2 for x in xs],
            [summary_b.temp_delta_c[k] for k in TEMP_NAMES], w,
            label=summary_b.scenario_name or "b")
    ax1.set_xticks(list(xs))
    ax1.set_xticklabels(["t_" + k for k in TEMP_NAMES])
    ax1.set_ylabel("temperature rise [degC]")
    ax1.legend(fontsize=8)
    ax2.bar([0, 1], [summary_a.correction_count, summary_b.correction_count],
            color=["tab:blue", "tab:orange"])
    ax2.set_xticks([0, 1])
    ax2.set_xticklabels([summary_a.scenario_name or "a",
                         summary_b.scenario_name or "b"])
    ax2.set_ylabel("steering corrections")
    return _save(fig, out_dir, name)
