"""Experimental procedures as deterministic step sequences over a DeviceSet.

Each ``run_*`` function owns its devices for the duration of the run, logs
every recorded step into a fresh :class:`RunLog`, and stores the derived
metrics the reports are built from.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, asdict, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import analysis
from .calibration import (CalibrationModel, CalibrationPoint, fit_calibration, mse_rmse,
                          required_pressure, tuning_accuracy)
from .errors import (ActuationError, ActuationLimitError, ContactFailureError, DamagePrecededError,
                     ProtocolSpecError, QuantityError)
from .runlog import RunLog, config_digest
from .units import DisplacementMm, ForceN, FruitSample, PressureKpa, Sample

log = logging.getLogger(__name__)

KINDS = ("calibration_sweep", "tuning_validation", "grasp_feedback", "stress_test",
         "fruit_characterization")

DEFAULTS = {
    "calibration_sweep": dict(p_start=100.0, p_step=5.0, p_end=145.0, preload=0.2, indent=3.0),
    "tuning_validation": dict(targets=[2.0, 2.5, 3.0], preload=0.2, indent=3.0),
    "grasp_feedback": dict(targets=[2.0, 2.5, 3.0], firm_close=4.0, step=1.0, max_step_total=5.0),
    "stress_test": dict(target=3.0, step=0.5, max_depth=5.0, cycles=50, preload=0.2,
                        first_n=5, last_n=5),
    "fruit_characterization": dict(eval_depth=3.0),
}
# Contact comparisons ignore float error far below any load cell's resolution.
FORCE_EPS_N = 1e-9
DEFAULT_TRIALS = {"stress_test": 1, "fruit_characterization": 1}


@dataclass(frozen=True)
class ProtocolSpec:
    kind: str
    params: Dict = field(default_factory=dict)
    trials: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ProtocolSpecError(f"unknown protocol kind {self.kind!r}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ProtocolSpecError(f"trials must be an integer >= 1, got {self.trials!r}")
        unknown = set(self.params) - set(DEFAULTS[self.kind])
        if unknown:
            raise ProtocolSpecError(f"unknown {self.kind} parameter(s) {sorted(unknown)}")
        merged = dict(DEFAULTS[self.kind])
        merged.update(self.params)
        object.__setattr__(self, "params", merged)

    @classmethod
    def make(cls, kind, trials=None, seed=0, **params) -> "ProtocolSpec":
        if trials is None:
            trials = DEFAULT_TRIALS.get(kind, 5)
        return cls(kind, params, trials, seed)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "trials": self.trials,
                "seed": self.seed}


@dataclass(frozen=True)
class ProtocolSettings:
    """Rig control constants not fixed by any procedure."""

    contact_step_mm: float = 0.05
    contact_search_mm: float = 10.0
    pressure_tolerance_kpa: float = 0.2
    settle_band_kpa: float = 1e-9     # keep refining inside tolerance down to this
    max_refinements: int = 3
    control_timeout_s: float = 10.0
    control_gain_ml_per_kpa: float = 0.95
    settle_s: float = 0.5
    feed_mm_min: float = 5.0
    retract_feed_mm_min: float = 300.0
    dwell_s: float = 0.0
    vent_pressure_kpa: float = 100.0
    p_limit_kpa: float = 145.89
    extrapolation_margin: float = 0.02
    drop_fraction: float = 0.05

    def __post_init__(self):
        for name, v in asdict(self).items():
            if not math.isfinite(v) or v < 0:
                raise QuantityError(f"ProtocolSettings.{name} must be finite and >= 0")
        if self.contact_step_mm <= 0 or self.feed_mm_min <= 0 or self.retract_feed_mm_min <= 0:
            raise QuantityError("contact step and feeds must be > 0")
        if self.control_gain_ml_per_kpa <= 0:
            raise QuantityError("control gain must be > 0")

    @classmethod
    def from_mapping(cls, data) -> "ProtocolSettings":
        return cls(**data)


class _Runner:
    def __init__(self, devices, spec: ProtocolSpec, settings: ProtocolSettings, digest: str):
        self.dev = devices
        self.spec = spec
        self.cfg = settings
        self.log = RunLog(kind=spec.kind, spec=spec.to_dict(), backend=devices.backend,
                          device_config_digest=digest)
        self.step = 0

    @property
    def now(self):
        return self.dev.clock.now()

    def event(self, text):
        self.log.event(self.now, text)
        log.debug("%s", text)

    def sample(self, displacement, phase, trial, advance=True) -> Sample:
        force = self.dev.force.read_force()
        pressure = self.dev.pressure.read_pressure()
        s = Sample(self.now, self.step, DisplacementMm(max(displacement, 0.0)), ForceN(force),
                   PressureKpa(pressure), trial, phase)
        self.log.samples.append(s)
        if advance:
            self.step += 1
        return s

    def setpoint(self, model, k_target) -> float:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            p = float(required_pressure(model, k_target, self.cfg.extrapolation_margin))
        for w in caught:
            self.event(f"warning: {w.message}")
        self.event(f"setpoint K={k_target:g} N/mm -> P={p:.2f} kPa")
        return p

    def regulate(self, target) -> float:
        """Drive the chamber to ``target`` kPa with proportional volume steps."""
        target = float(target)
        if target > self.cfg.p_limit_kpa + 1e-9:
            raise ActuationLimitError(
                f"setpoint {target:.3f} kPa above limit {self.cfg.p_limit_kpa} kPa", bound="p_max")
        # The timeout bounds settling; it starts once the first (coarse) move
        # has completed, so slow pump travel alone cannot trip it.
        deadline = None
        refinements = 0
        while True:
            p = float(self.dev.pressure.read_pressure())
            err = target - p
            if abs(err) <= self.cfg.pressure_tolerance_kpa:
                if (abs(err) <= self.cfg.settle_band_kpa or refinements >= self.cfg.max_refinements
                        or (deadline is not None and self.now > deadline)):
                    return p
                refinements += 1
            elif deadline is not None and self.now > deadline:
                raise ActuationError(
                    f"pressure {p:.3f} kPa did not reach {target:.3f} +/- "
                    f"{self.cfg.pressure_tolerance_kpa} kPa within {self.cfg.control_timeout_s} s")
            self.dev.pump.move_volume(self.cfg.control_gain_ml_per_kpa * err)
            if deadline is None:
                deadline = self.now + self.cfg.control_timeout_s
            self.dev.clock.sleep(self.cfg.settle_s)

    def find_contact(self, preload) -> float:
        """Advance until the axial force reaches ``preload``; returns that force.
        The stage position there is the displacement datum."""
        start = self.dev.stage.position
        f = float(self.dev.force.read_force())
        while f < preload - FORCE_EPS_N:
            if self.dev.stage.position - start + self.cfg.contact_step_mm > self.cfg.contact_search_mm + 1e-9:
                raise ContactFailureError(
                    f"preload {preload} N not reached within {self.cfg.contact_search_mm} mm of travel")
            self.dev.stage.move_z_relative(self.cfg.contact_step_mm, self.cfg.feed_mm_min)
            f = float(self.dev.force.read_force())
        return f

    def dwell(self):
        if self.cfg.dwell_s:
            self.dev.clock.sleep(self.cfg.dwell_s)

    def indent_once(self, preload, indent, trial, target_p):
        """Rest reading, preload datum, indentation; returns (rest P, K, datum depth)."""
        rest = self.sample(0.0, "rest", trial)
        datum_pos = self.dev.stage.position
        self.find_contact(preload)
        datum = self.sample(0.0, "datum", trial)
        depth = self.dev.stage.position - datum_pos
        self.dev.stage.move_z_relative(indent, self.cfg.feed_mm_min)
        self.dwell()
        loaded = self.sample(indent, "indent", trial)
        self.dev.stage.home()
        k = (float(loaded.force) - float(datum.force)) / indent
        return float(rest.pressure), k, depth

    def reset(self, trial):
        self.dev.stage.home()
        self.dev.gripper.open_full()
        self.regulate(self.cfg.vent_pressure_kpa)
        self.event(f"reset after trial {trial}: vented to {self.cfg.vent_pressure_kpa:g} kPa, "
                   "stage homed, datum cleared")


def _positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ProtocolSpecError(f"{name} must be > 0, got {value!r}")
    return float(value)


def _digest(devices, digest):
    return digest or config_digest({"backend": devices.backend})


def sweep_levels(p_start, p_step, p_end) -> List[float]:
    n = int(math.floor((p_end - p_start) / p_step + 1e-9)) + 1
    return [round(p_start + i * p_step, 9) for i in range(n)]


def run_calibration_sweep(devices, spec: ProtocolSpec | None = None,
                          settings: ProtocolSettings | None = None, digest: str = ""):
    """Stepped pressurisation with a fixed-depth indentation at each level.

    Returns ``(runlog, points)`` where ``points`` holds one trial-averaged
    (rest pressure, stiffness) pair per level.
    """
    spec = spec or ProtocolSpec.make("calibration_sweep")
    cfg = settings or ProtocolSettings()
    prm = spec.params
    p_start, p_end = float(prm["p_start"]), float(prm["p_end"])
    p_step = _positive("p_step", prm["p_step"])
    preload = _positive("preload", prm["preload"])
    indent = _positive("indent", prm["indent"])
    if p_end < p_start:
        raise ProtocolSpecError("p_end must be >= p_start")
    if p_end > cfg.p_limit_kpa + 1e-9:
        raise ActuationLimitError(f"p_end {p_end} kPa above device limit {cfg.p_limit_kpa} kPa",
                                  bound="p_max")
    levels = sweep_levels(p_start, p_step, p_end)

    r = _Runner(devices, spec, cfg, _digest(devices, digest))
    devices.mount_tool("indenter")
    per_level = {lvl: ([], []) for lvl in levels}
    rows = []
    for trial in range(spec.trials):
        r.event(f"trial {trial} start")
        for lvl in levels:
            r.regulate(lvl)
            p_rest, k, depth = r.indent_once(preload, indent, trial, lvl)
            per_level[lvl][0].append(p_rest)
            per_level[lvl][1].append(k)
            rows.append({"trial": trial, "setpoint": lvl, "pressure": p_rest, "stiffness": k,
                         "datum_depth": depth})
        r.reset(trial)

    points, table = [], []
    for lvl in levels:
        ps, ks = per_level[lvl]
        points.append(CalibrationPoint(float(np.mean(ps)), float(np.mean(ks))))
        table.append({"setpoint": lvl, "pressure": float(np.mean(ps)),
                      "pressure_sd": float(np.std(ps, ddof=1)) if len(ps) > 1 else 0.0,
                      "stiffness": float(np.mean(ks)),
                      "stiffness_sd": float(np.std(ks, ddof=1)) if len(ks) > 1 else 0.0,
                      "n": len(ks)})
    model = fit_calibration(points)
    r.log.derived = {"levels": levels, "points": table, "trials": rows, "model": model.to_dict()}
    r.event(f"fit P = {model.slope_a:.4f} K + {model.intercept_b:.4f} (R^2 {model.r_squared:.5f})")
    return r.log, points


def run_tuning_validation(devices, model: CalibrationModel, spec: ProtocolSpec | None = None,
                          settings: ProtocolSettings | None = None, digest: str = "") -> RunLog:
    spec = spec or ProtocolSpec.make("tuning_validation")
    cfg = settings or ProtocolSettings()
    prm = spec.params
    preload = _positive("preload", prm["preload"])
    indent = _positive("indent", prm["indent"])
    targets = [_positive("target", float(k)) for k in prm["targets"]]
    if not targets:
        raise ProtocolSpecError("no target stiffness given")

    r = _Runner(devices, spec, cfg, _digest(devices, digest))
    setpoints = {k: r.setpoint(model, k) for k in targets}
    devices.mount_tool("indenter")
    summary, rows = [], []
    for k_target in targets:
        measured = []
        for trial in range(spec.trials):
            r.event(f"target {k_target:g} trial {trial} start")
            r.regulate(setpoints[k_target])
            p_rest, k, _ = r.indent_once(preload, indent, trial, setpoints[k_target])
            measured.append(k)
            rows.append({"target": k_target, "trial": trial, "pressure": p_rest, "measured": k,
                         "accuracy_pct": tuning_accuracy(k, k_target)})
            r.reset(trial)
        mse, rmse = mse_rmse([k_target] * len(measured), measured)
        mean_k = float(np.mean(measured))
        summary.append({
            "target": k_target, "setpoint": setpoints[k_target], "mean_k": mean_k,
            "sd_k": float(np.std(measured, ddof=1)) if len(measured) > 1 else 0.0,
            "accuracy_pct": tuning_accuracy(mean_k, k_target), "mse": mse, "rmse": rmse,
            "n": len(measured)})
    r.log.derived = {"model": model.to_dict(), "summary": summary, "trials": rows}
    return r.log


def run_grasp_feedback(devices, model: CalibrationModel, spec: ProtocolSpec | None = None,
                       settings: ProtocolSettings | None = None, digest: str = "") -> RunLog:
    spec = spec or ProtocolSpec.make("grasp_feedback")
    cfg = settings or ProtocolSettings()
    prm = spec.params
    step = _positive("step", prm["step"])
    total = _positive("max_step_total", prm["max_step_total"])
    firm = float(prm["firm_close"])
    if firm < 0:
        raise ProtocolSpecError("firm_close must be >= 0")
    n_steps = total / step
    if abs(n_steps - round(n_steps)) > 1e-9:
        raise ProtocolSpecError(f"max_step_total {total} is not a whole number of {step} mm steps")
    n_steps = int(round(n_steps))
    if devices.gripper.max_stroke < firm + total - 1e-9:
        raise ActuationLimitError(
            f"gripper stroke {devices.gripper.max_stroke} mm < firm close + steps "
            f"({firm + total} mm)", bound="stroke")
    targets = [_positive("target", float(k)) for k in prm["targets"]]

    r = _Runner(devices, spec, cfg, _digest(devices, digest))
    setpoints = {k: r.setpoint(model, k) for k in targets}
    table = []
    for k_target in targets:
        readings = np.zeros((spec.trials, n_steps + 1))
        for trial in range(spec.trials):
            r.event(f"grasp target {k_target:g} trial {trial} start")
            devices.stage.home()
            r.regulate(setpoints[k_target])
            devices.gripper.open_full()
            devices.gripper.close_by(firm)
            readings[trial, 0] = float(r.sample(0.0, f"grasp:{k_target:g}", trial).pressure)
            for i in range(1, n_steps + 1):
                devices.gripper.close_by(step)
                r.dwell()
                readings[trial, i] = float(r.sample(i * step, f"grasp:{k_target:g}", trial).pressure)
            devices.gripper.open_full()
            r.reset(trial)
        for i in range(n_steps + 1):
            col = readings[:, i]
            table.append({"target": k_target, "compression": round(i * step, 9),
                          "mean_pressure": float(col.mean()),
                          "sd_pressure": float(col.std(ddof=1)) if col.size > 1 else 0.0,
                          "n": int(col.size)})
    r.log.derived = {"model": model.to_dict(), "setpoints": {str(k): v for k, v in setpoints.items()},
                     "grasp": table}
    return r.log


def stress_cycle_of(step_index: int, steps_per_cycle: int) -> int:
    """Cycle a stress-test step belongs to; the datum step 0 is setup (-1)."""
    return -1 if step_index == 0 else (step_index - 1) // steps_per_cycle


def run_stress_test(devices, model: CalibrationModel, spec: ProtocolSpec | None = None,
                    settings: ProtocolSettings | None = None, digest: str = ""):
    """Repeated stepwise loading/unloading under the flat plate.

    Returns ``(runlog, drift_report)``.
    """
    spec = spec or ProtocolSpec.make("stress_test")
    cfg = settings or ProtocolSettings()
    prm = spec.params
    step = _positive("step", prm["step"])
    depth = _positive("max_depth", prm["max_depth"])
    preload = _positive("preload", prm["preload"])
    cycles = int(prm["cycles"])
    if cycles != prm["cycles"] or cycles < 1:
        raise ProtocolSpecError("cycles must be an integer >= 1")
    n = depth / step
    if abs(n - round(n)) > 1e-9:
        raise ProtocolSpecError(f"max_depth {depth} is not a whole number of {step} mm steps")
    n = int(round(n))
    first_n, last_n = int(prm["first_n"]), int(prm["last_n"])

    r = _Runner(devices, spec, cfg, _digest(devices, digest))
    target_p = r.setpoint(model, float(prm["target"]))
    devices.mount_tool("plate")
    devices.stage.home()
    r.regulate(target_p)
    r.find_contact(preload)
    # Hold the setpoint with the plate seated so the uncompressed phase reads the target.
    r.regulate(target_p)
    r.sample(0.0, "datum", 0)
    for c in range(cycles):
        devices.begin_cycle()
        for i in range(1, n + 1):
            devices.stage.move_z_relative(step, cfg.feed_mm_min)
            r.dwell()
            r.sample(i * step, "load", c)
        for i in range(n - 1, -1, -1):
            devices.stage.move_z_relative(-step, cfg.feed_mm_min)
            r.dwell()
            r.sample(i * step, "unload", c)
    devices.stage.home()

    report = stress_drift(r.log.samples, 2 * n, target_p, first_n, last_n)
    r.log.derived = {"model": model.to_dict(), "setpoint": target_p, "steps_per_cycle": 2 * n,
                     "drift": report.metrics(),
                     "peak_force_max": max(float(s.force) for s in r.log.samples)}
    r.event(f"drift: pressure peaks {report.pressure_peak_diff:.4f} kPa, "
            f"residuals {report.residual_pct_first:.3f}% / {report.residual_pct_last:.3f}%")
    return r.log, report


def stress_drift(samples: Sequence[Sample], steps_per_cycle: int, target_pressure,
                 first_n: int = 5, last_n: int = 5) -> analysis.DriftReport:
    cycles = [stress_cycle_of(s.step_index, steps_per_cycle) for s in samples]
    return analysis.drift_report([float(s.force) for s in samples],
                                 [float(s.pressure) for s in samples],
                                 cycles, target_pressure, first_n, last_n)


def run_fruit_characterization(dataset: Sequence[FruitSample], spec: ProtocolSpec | None = None,
                               digest: str = "", drop_fraction: float = analysis.DEFAULT_DROP_FRACTION):
    """Table-style per-day stiffness statistics from ingested indentation curves.

    Samples whose damage point precedes the evaluation depth are reported
    and skipped.  Returns ``(runlog, stats)``.
    """
    spec = spec or ProtocolSpec.make("fruit_characterization")
    eval_depth = _positive("eval_depth", spec.params["eval_depth"])
    rl = RunLog(kind=spec.kind, spec=spec.to_dict(), backend="ingest",
                device_config_digest=digest or config_digest({"backend": "ingest"}))
    t = 0.0
    step = 0
    per_sample, errors = [], []
    by_day: Dict[int, List[float]] = {}
    for idx, fs in enumerate(dataset):
        for d, f in fs.curve.points:
            # Curves are replayed at the 5 mm/min indentation rate.
            ts = t + d / 5.0 * 60.0
            rl.samples.append(Sample(ts, step, DisplacementMm(d), ForceN(f), PressureKpa(0.0),
                                     idx, f"fruit:{fs.id}"))
            step += 1
        t = rl.samples[-1].timestamp + 1.0
        damage = analysis.detect_damage_point(fs.curve, drop_fraction)
        row = {"id": fs.id, "day": fs.day, "axial_length": fs.axial_length,
               "radial_length": fs.radial_length, "mass": fs.mass,
               "damage_depth": damage[0] if damage else None,
               "damage_force": damage[1] if damage else None}
        try:
            est = analysis.estimate_stiffness(fs.curve, eval_depth, drop_fraction, sample_id=fs.id)
        except DamagePrecededError as exc:
            errors.append({"id": fs.id, "error": str(exc)})
            rl.event(t, f"error: {exc}")
            row.update(k=None, force_at_depth=None)
        else:
            by_day.setdefault(fs.day, []).append(float(est.k))
            row.update(k=float(est.k), force_at_depth=float(est.force_at_depth))
        per_sample.append(row)

    days = sorted({fs.day for fs in dataset})
    stats = []
    for day in days:
        if day not in by_day:
            rl.event(t, f"warning: day {day} has no evaluable samples; omitted")
            continue
        stats.append(analysis.summarize(day, by_day[day]))
    rl.derived = {
        "eval_depth": eval_depth,
        "drop_fraction": drop_fraction,
        "samples": per_sample,
        "errors": errors,
        "batch_stats": [{"day": s.day, "mean_k": s.mean_k, "std_k": s.std_k, "n": s.n}
                        for s in stats],
    }
    return rl, stats
