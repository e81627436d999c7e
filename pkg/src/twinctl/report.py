"""Report generation: CSV tables plus the SVG figures drawn from them.

A report is a pure function of its RunLog, so regenerating one from a stored
log reproduces the same bytes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

import matplotlib.pyplot as plt
import numpy as np

from . import plotting
from .errors import SchemaVersionError
from .protocols import stress_cycle_of, stress_drift
from .runlog import RunLog


@dataclass
class ReportBundle:
    directory: Path
    tables: Dict[str, Path] = field(default_factory=dict)
    plots: Dict[str, Path] = field(default_factory=dict)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(round(v, 10))
    return str(v)


def _table(bundle, name, rows: List[dict], columns=None):
    path = bundle.directory / f"{name}.csv"
    columns = columns or (list(rows[0]) if rows else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])
    bundle.tables[name] = path
    return rows


def _plot(bundle, name, fig):
    bundle.plots[name] = plotting.save(fig, bundle.directory / f"{name}.svg")


def _calibration(rl, b):
    pts = _table(b, "calibration_points", rl.derived["points"])
    m = rl.derived["model"]
    _table(b, "calibration_fit", [m], ["slope_a", "intercept_b", "r_squared", "n_points"])
    k = np.array([p["stiffness"] for p in pts])
    p = np.array([p["pressure"] for p in pts])
    fig, ax = plotting.figure()
    ax.plot(k, p, "o", color=plotting.COLORS[0], label="mean of trials")
    kk = np.linspace(k.min(), k.max(), 50)
    ax.plot(kk, m["slope_a"] * kk + m["intercept_b"], "-", color=plotting.COLORS[1],
            label=f"P = {m['slope_a']:.2f} K + {m['intercept_b']:.2f}, R² = {m['r_squared']:.4f}")
    ax.set_xlabel("Stiffness (N/mm)")
    ax.set_ylabel("Pressure (kPa)")
    ax.legend(frameon=False, loc="upper left")
    _plot(b, "calibration_fit", fig)


def _tuning(rl, b):
    summary = _table(b, "tuning_summary", rl.derived["summary"])
    _table(b, "tuning_trials", rl.derived["trials"])
    targets = [s["target"] for s in summary]
    x = np.arange(len(targets))
    fig, ax = plotting.figure()
    ax.bar(x - 0.18, targets, 0.36, color=plotting.COLORS[5], label="desired")
    ax.bar(x + 0.18, [s["mean_k"] for s in summary], 0.36, yerr=[s["sd_k"] for s in summary],
           color=plotting.COLORS[0], ecolor="black", capsize=3, label="measured")
    ax.set_xticks(x, [f"{t:g}" for t in targets])
    ax.set_xlabel("Target stiffness (N/mm)")
    ax.set_ylabel("Stiffness (N/mm)")
    ax.legend(frameon=False)
    _plot(b, "desired_vs_measured", fig)

    fig, ax = plotting.figure()
    ax.bar(x - 0.18, [s["mse"] for s in summary], 0.36, color=plotting.COLORS[0], label="MSE")
    ax.bar(x + 0.18, [s["rmse"] for s in summary], 0.36, color=plotting.COLORS[1], label="RMSE")
    ax.set_xticks(x, [f"{t:g}" for t in targets])
    ax.set_xlabel("Target stiffness (N/mm)")
    ax.set_ylabel("Error")
    ax.legend(frameon=False)
    _plot(b, "mse_rmse", fig)


def _grasp(rl, b):
    rows = _table(b, "grasp_pressure", rl.derived["grasp"])
    fig, ax = plotting.figure()
    for i, t in enumerate(sorted({r["target"] for r in rows})):
        sel = [r for r in rows if r["target"] == t]
        ax.errorbar([r["compression"] for r in sel], [r["mean_pressure"] for r in sel],
                    yerr=[r["sd_pressure"] for r in sel], fmt="o-", capsize=2,
                    color=plotting.COLORS[i % len(plotting.COLORS)], label=f"{t:g} N/mm")
    ax.set_xlabel("Gripper compression (mm)")
    ax.set_ylabel("Pressure (kPa)")
    ax.legend(frameon=False, loc="lower center", bbox_to_anchor=(0.5, 1.0), ncol=3)
    _plot(b, "grasp_pressure", fig)


def _stress(rl, b):
    per = int(rl.derived["steps_per_cycle"])
    prm = rl.spec["params"]
    first_n, last_n = int(prm["first_n"]), int(prm["last_n"])
    report = stress_drift(rl.samples, per, rl.derived["setpoint"], first_n, last_n)
    metrics = report.metrics()
    _table(b, "drift", [metrics])
    n_cycles = int(prm["cycles"])
    windows = {"first": range(0, first_n), "last": range(n_cycles - last_n, n_cycles)}
    trace = []
    for name, cyc in windows.items():
        for s in rl.samples:
            c = stress_cycle_of(s.step_index, per)
            if c in cyc:
                trace.append({"window": name, "cycle": c, "step": (s.step_index - 1) % per + 1,
                              "displacement": float(s.displacement), "force": float(s.force),
                              "pressure": float(s.pressure)})
    _table(b, "stress_trace", trace)
    for quantity, label in (("force", "Force (N)"), ("pressure", "Pressure (kPa)")):
        fig, ax = plotting.figure(width=5.0, height=2.6)
        for i, name in enumerate(windows):
            sel = [r for r in trace if r["window"] == name]
            x = [(r["cycle"] - sel[0]["cycle"]) * per + r["step"] for r in sel]
            ax.plot(x, [r[quantity] for r in sel], "-", color=plotting.COLORS[i],
                    label=f"{name} {len(windows[name])} cycles")
        ax.set_xlabel("Step")
        ax.set_ylabel(label)
        ax.legend(frameon=False, loc="lower center", bbox_to_anchor=(0.5, 1.0), ncol=2)
        _plot(b, f"stress_{quantity}", fig)


def _fruit(rl, b):
    _table(b, "batch_stats", rl.derived["batch_stats"], ["day", "mean_k", "std_k", "n"])
    samples = _table(b, "fruit_samples", rl.derived["samples"],
                     ["id", "day", "k", "force_at_depth", "damage_depth", "damage_force",
                      "axial_length", "radial_length", "mass"])
    days = sorted({s["day"] for s in samples})
    fig, axes = plt.subplots(1, len(days), figsize=(2.4 * len(days), 2.2), sharey=True,
                             squeeze=False)
    for ax, day in zip(axes[0], days):
        for i, meta in enumerate(m for m in samples if m["day"] == day):
            pts = [s for s in rl.samples if s.phase == f"fruit:{meta['id']}"]
            ax.plot([float(s.displacement) for s in pts], [float(s.force) for s in pts],
                    "-", color=plotting.COLORS[i % len(plotting.COLORS)], lw=1.0)
            if meta["damage_depth"] is not None:
                ax.plot(meta["damage_depth"], meta["damage_force"], "x", color="black")
        ax.set_title(f"Day {day}")
        ax.set_xlabel("Deformation (mm)")
    axes[0][0].set_ylabel("Force (N)")
    _plot(b, "fruit_curves", fig)


BUILDERS = {
    "calibration_sweep": _calibration,
    "tuning_validation": _tuning,
    "grasp_feedback": _grasp,
    "stress_test": _stress,
    "fruit_characterization": _fruit,
}


def build_report(runlog: RunLog, directory) -> ReportBundle:
    if runlog.kind not in BUILDERS:
        raise SchemaVersionError(f"no report layout for run kind {runlog.kind!r}")
    bundle = ReportBundle(Path(directory))
    bundle.directory.mkdir(parents=True, exist_ok=True)
    # Text and line styles are fixed when artists are created, not when saved.
    with plt.rc_context(plotting.RC):
        BUILDERS[runlog.kind](runlog, bundle)
    return bundle
