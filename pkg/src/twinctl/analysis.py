"""Post-run numerics: indentation stiffness, damage points, batch statistics,
local extrema and stress-test drift."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DamagePrecededError, QuantityError, RangeError, ShapeError
from .units import (DisplacementMm, ForceN, FruitSample, IndentationCurve, StiffnessNPerMm,
                    interpolate_force)

DEFAULT_DROP_FRACTION = 0.05


@dataclass(frozen=True)
class StiffnessEstimate:
    k: StiffnessNPerMm
    eval_depth: DisplacementMm
    force_at_depth: ForceN
    damage: Optional[Tuple[float, float]] = None


@dataclass(frozen=True)
class BatchStats:
    day: int
    mean_k: float
    std_k: float
    n: int

    @property
    def single(self) -> bool:
        """True when ``std_k`` is a placeholder 0 from a single sample."""
        return self.n == 1


@dataclass(frozen=True)
class DriftReport:
    force_peak_diff: float
    pressure_peak_diff: float
    residual_pct_first: float
    residual_pct_last: float
    peaks_first: List[float] = field(default_factory=list)
    peaks_last: List[float] = field(default_factory=list)
    pressure_peaks_first: List[float] = field(default_factory=list)
    pressure_peaks_last: List[float] = field(default_factory=list)
    minima_first: List[float] = field(default_factory=list)
    minima_last: List[float] = field(default_factory=list)

    def metrics(self) -> Dict[str, float]:
        return {
            "force_peak_diff": self.force_peak_diff,
            "pressure_peak_diff": self.pressure_peak_diff,
            "residual_pct_first": self.residual_pct_first,
            "residual_pct_last": self.residual_pct_last,
            "mean_force_peak_first": _mean(self.peaks_first),
            "mean_force_peak_last": _mean(self.peaks_last),
            "mean_pressure_peak_first": _mean(self.pressure_peaks_first),
            "mean_pressure_peak_last": _mean(self.pressure_peaks_last),
            "mean_pressure_min_first": _mean(self.minima_first),
            "mean_pressure_min_last": _mean(self.minima_last),
        }


def _mean(xs):
    return float(np.mean(xs)) if len(xs) else float("nan")


# -- extrema ---------------------------------------------------------------

def _as_signal(signal) -> np.ndarray:
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise ShapeError("signal must be one-dimensional")
    if x.size < 3:
        raise ShapeError(f"need at least 3 samples to find extrema, got {x.size}")
    if np.isnan(x).any():
        raise QuantityError("signal contains NaN")
    return x


def find_peaks(signal) -> List[int]:
    """Indices of strict local maxima.

    A flat run counts once, at its first index, when both neighbouring
    values that differ from it are lower.  Endpoints are never peaks.
    """
    x = _as_signal(signal)
    n = x.size
    peaks = []
    i = 1
    while i < n - 1:
        if x[i - 1] < x[i]:
            j = i
            while j + 1 < n and x[j + 1] == x[i]:
                j += 1
            if j + 1 < n and x[j + 1] < x[i]:
                peaks.append(i)
            i = j + 1
        else:
            i += 1
    return peaks


def find_minima(signal) -> List[int]:
    return find_peaks(-_as_signal(signal))


# -- indentation -----------------------------------------------------------

def detect_damage_point(curve: IndentationCurve,
                        drop_fraction: float = DEFAULT_DROP_FRACTION) -> Optional[Tuple[float, float]]:
    """First local force maximum followed by a relative decline of at least
    ``drop_fraction`` before the force climbs back above it."""
    if not 0 < drop_fraction < 1:
        raise QuantityError("drop_fraction must lie in (0, 1)")
    d, f = curve.displacements, curve.forces
    n = len(f)
    i = 0
    while i < n - 1:
        if i == 0 or f[i] > f[i - 1]:
            j = i
            while j + 1 < n and f[j + 1] == f[i]:
                j += 1
            if j + 1 < n and f[j + 1] < f[i]:
                peak = f[i]
                low = peak
                k = j + 1
                while k < n and f[k] <= peak:
                    low = min(low, f[k])
                    k += 1
                if peak > 0 and (peak - low) / peak >= drop_fraction:
                    return d[i], f[i]
            i = j + 1
        else:
            i += 1
    return None


def estimate_stiffness(curve: IndentationCurve, eval_depth,
                       drop_fraction: float = DEFAULT_DROP_FRACTION,
                       sample_id: Optional[str] = None) -> StiffnessEstimate:
    """Secant stiffness ``F(eval_depth) / eval_depth``."""
    depth = float(DisplacementMm(eval_depth))
    if depth <= 0:
        raise QuantityError("eval_depth must be > 0")
    damage = detect_damage_point(curve, drop_fraction)
    if damage is not None and damage[0] < depth:
        raise DamagePrecededError(
            f"{sample_id or 'curve'}: damage at {damage[0]:g} mm precedes "
            f"evaluation depth {depth:g} mm", sample_id=sample_id, damage=damage)
    force = interpolate_force(curve, depth)
    return StiffnessEstimate(StiffnessNPerMm(force / depth), DisplacementMm(depth), force, damage)


def summarize(day: int, ks: Sequence[float]) -> BatchStats:
    ks = np.asarray(ks, dtype=float)
    if ks.size == 0:
        raise ShapeError(f"day {day}: no stiffness values")
    std = float(np.std(ks, ddof=1)) if ks.size > 1 else 0.0
    return BatchStats(int(day), float(np.mean(ks)), std, int(ks.size))


def batch_stats(samples: Sequence[FruitSample], eval_depth,
                drop_fraction: float = DEFAULT_DROP_FRACTION) -> List[BatchStats]:
    """Per-day mean and sample (n-1) standard deviation of stiffness."""
    by_day: Dict[int, List[float]] = defaultdict(list)
    for s in samples:
        est = estimate_stiffness(s.curve, eval_depth, drop_fraction, sample_id=s.id)
        by_day[s.day].append(float(est.k))
    return [summarize(day, ks) for day, ks in sorted(by_day.items())]


# -- stress-test drift -----------------------------------------------------

def _padded(x, fill):
    return np.concatenate(([fill], x, [fill]))


def drift_report(force_trace, pressure_trace, cycles, target_pressure,
                 first_n: int = 5, last_n: int = 5) -> DriftReport:
    """Compare the first and last cycle windows of a cyclic loading trace.

    Args:
        force_trace, pressure_trace: per-sample readings.
        cycles: per-sample cycle index; negative marks setup samples, which
            bound the trace but belong to no window.
        target_pressure: uncompressed setpoint the residuals refer to.

    Trace ends count as extrema candidates, so a trace that starts or stops
    uncompressed still yields its boundary minima.
    """
    f = np.asarray(force_trace, dtype=float)
    p = np.asarray(pressure_trace, dtype=float)
    c = np.asarray(cycles, dtype=int)
    if not (f.shape == p.shape == c.shape) or f.ndim != 1:
        raise ShapeError("force, pressure and cycle traces must be equal-length 1-D")
    target = float(target_pressure)
    if not target > 0:
        raise QuantityError("target pressure must be > 0")
    n_cycles = int(c.max()) + 1 if c.size else 0
    if first_n < 1 or last_n < 1 or n_cycles < first_n + last_n:
        raise ShapeError(f"need >= {first_n + last_n} cycles, trace has {n_cycles}")

    f_peaks = np.array(find_peaks(_padded(f, -np.inf)), dtype=int) - 1
    p_peaks = np.array(find_peaks(_padded(p, -np.inf)), dtype=int) - 1
    p_mins = np.array(find_minima(_padded(p, np.inf)), dtype=int) - 1

    def window(idx, values, lo, hi):
        sel = [i for i in idx if lo <= c[i] < hi]
        return [float(values[i]) for i in sel]

    first = (0, first_n)
    last = (n_cycles - last_n, n_cycles)
    fpf, fpl = window(f_peaks, f, *first), window(f_peaks, f, *last)
    ppf, ppl = window(p_peaks, p, *first), window(p_peaks, p, *last)
    pmf, pml = window(p_mins, p, *first), window(p_mins, p, *last)
    for name, xs in (("force peaks", fpf), ("force peaks", fpl), ("pressure peaks", ppf),
                     ("pressure peaks", ppl), ("pressure minima", pmf), ("pressure minima", pml)):
        if not xs:
            raise ShapeError(f"no {name} found in a comparison window")
    return DriftReport(
        force_peak_diff=abs(_mean(fpf) - _mean(fpl)),
        pressure_peak_diff=abs(_mean(ppf) - _mean(ppl)),
        residual_pct_first=100.0 * abs(_mean(pmf) - target) / target,
        residual_pct_last=100.0 * abs(_mean(pml) - target) / target,
        peaks_first=fpf, peaks_last=fpl,
        pressure_peaks_first=ppf, pressure_peaks_last=ppl,
        minima_first=pmf, minima_last=pml,
    )
