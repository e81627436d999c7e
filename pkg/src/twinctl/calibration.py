"""Affine pressure-stiffness calibration: fit, inversion, and scoring."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import (DegenerateStateError, ExtrapolationError, ExtrapolationWarning,
                     InsufficientDataError, QuantityError, ShapeError, SingularFitError)
from .units import PressureKpa, StiffnessNPerMm

DEFAULT_MARGIN = 0.02


@dataclass(frozen=True)
class CalibrationPoint:
    pressure: PressureKpa
    stiffness: StiffnessNPerMm

    def __post_init__(self):
        object.__setattr__(self, "pressure", PressureKpa(self.pressure))
        object.__setattr__(self, "stiffness", StiffnessNPerMm(self.stiffness))
        if not self.pressure > 0:
            raise QuantityError("calibration pressure must be > 0")


@dataclass(frozen=True)
class CalibrationModel:
    """``P = slope_a * K + intercept_b`` with its fit diagnostics."""

    slope_a: float
    intercept_b: float
    r_squared: float
    k_domain: Tuple[float, float]
    p_domain: Tuple[float, float]
    n_points: int

    def __post_init__(self):
        if not self.slope_a > 0:
            raise QuantityError(f"calibration slope must be > 0, got {self.slope_a}")
        if not 0.0 <= self.r_squared <= 1.0:
            raise QuantityError(f"r_squared must lie in [0, 1], got {self.r_squared}")
        if self.n_points < 2:
            raise QuantityError("a calibration needs at least 2 points")
        for name in ("k_domain", "p_domain"):
            lo, hi = (float(x) for x in getattr(self, name))
            if lo > hi:
                raise QuantityError(f"{name} must be ordered")
            object.__setattr__(self, name, (lo, hi))

    def to_dict(self) -> dict:
        return {
            "slope_a": self.slope_a,
            "intercept_b": self.intercept_b,
            "r_squared": self.r_squared,
            "k_domain": list(self.k_domain),
            "p_domain": list(self.p_domain),
            "n_points": self.n_points,
        }

    @classmethod
    def from_dict(cls, d) -> "CalibrationModel":
        return cls(float(d["slope_a"]), float(d["intercept_b"]), float(d["r_squared"]),
                   tuple(d["k_domain"]), tuple(d["p_domain"]), int(d["n_points"]))


def reference_model() -> CalibrationModel:
    """The published first-order fit, with the domain of its 100-145 kPa sweep."""
    a, b = 44.84, 11.37
    return CalibrationModel(a, b, 0.9916, ((100.0 - b) / a, (145.0 - b) / a),
                            (100.0, 145.0), 10)


def fit_calibration(points: Sequence[CalibrationPoint], weights=None) -> CalibrationModel:
    """Weighted ordinary least squares of pressure on stiffness.

    Args:
        points: at least two points spanning two distinct stiffness values.
        weights: optional non-negative per-point weights (default all 1).
    """
    if len(points) < 2:
        raise InsufficientDataError(f"need >= 2 calibration points, got {len(points)}")
    k = np.array([float(p.stiffness) for p in points])
    p = np.array([float(p.pressure) for p in points])
    w = np.ones_like(k) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != k.shape or np.any(w < 0) or not np.any(w > 0):
        raise ShapeError("weights must be non-negative, one per point, not all zero")
    if np.ptp(k[w > 0]) == 0:
        raise SingularFitError("all calibration points share one stiffness value")

    sw = w.sum()
    km, pm = (w * k).sum() / sw, (w * p).sum() / sw
    dk, dp = k - km, p - pm
    sxx = (w * dk * dk).sum()
    slope = (w * dk * dp).sum() / sxx
    intercept = pm - slope * km
    ss_res = (w * (p - (slope * k + intercept)) ** 2).sum()
    ss_tot = (w * dp * dp).sum()
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    if not slope > 0:
        raise SingularFitError(f"fitted slope {slope:.4g} is not positive")
    sel = w > 0
    return CalibrationModel(
        slope_a=float(slope),
        intercept_b=float(intercept),
        r_squared=float(min(max(r2, 0.0), 1.0)),
        k_domain=(float(k[sel].min()), float(k[sel].max())),
        p_domain=(float(p[sel].min()), float(p[sel].max())),
        n_points=int(sel.sum()),
    )


def _check_domain(value, domain, margin, what):
    lo, hi = domain
    slack = margin * (hi - lo)
    if lo <= value <= hi:
        return
    if lo - slack <= value <= hi + slack:
        warnings.warn(f"{what} {value:g} outside calibrated domain [{lo:g}, {hi:g}]; "
                      f"extrapolating within the {margin:.0%} margin", ExtrapolationWarning,
                      stacklevel=3)
        return
    raise ExtrapolationError(
        f"{what} {value:g} outside calibrated domain [{lo:g}, {hi:g}] plus {margin:.0%} margin")


def required_pressure(model: CalibrationModel, k_target, margin: float = DEFAULT_MARGIN) -> PressureKpa:
    k = float(StiffnessNPerMm(k_target))
    _check_domain(k, model.k_domain, margin, "target stiffness")
    return PressureKpa(model.slope_a * k + model.intercept_b)


def predicted_stiffness(model: CalibrationModel, p, margin: float = DEFAULT_MARGIN) -> StiffnessNPerMm:
    p = float(PressureKpa(p))
    if p <= model.intercept_b:
        raise DegenerateStateError(
            f"pressure {p} kPa <= intercept {model.intercept_b} kPa: no positive stiffness")
    _check_domain(p, model.p_domain, margin, "pressure")
    return StiffnessNPerMm((p - model.intercept_b) / model.slope_a)


def tuning_accuracy(measured, desired) -> float:
    """Percent accuracy, ``100 * (1 - |measured - desired| / desired)``."""
    desired = float(desired)
    if not desired > 0:
        raise QuantityError("desired stiffness must be > 0")
    return 100.0 * (1.0 - abs(float(measured) - desired) / desired)


def mse_rmse(desired, measured) -> Tuple[float, float]:
    d = np.asarray(desired, dtype=float)
    m = np.asarray(measured, dtype=float)
    if d.ndim != 1 or d.shape != m.shape or d.size == 0:
        raise ShapeError(f"need equal non-empty 1-D sequences, got {d.shape} and {m.shape}")
    mse = float(np.mean((m - d) ** 2))
    return mse, math.sqrt(mse)
