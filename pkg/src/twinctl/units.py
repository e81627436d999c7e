"""Unit-carrying scalars and the sample records shared by every module.

Quantities are thin ``float`` subclasses: arithmetic on them yields plain
floats, construction validates.  Units are the lab units used throughout
(kPa, N, mm, N/mm, mL); nothing is converted implicitly.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .errors import QuantityError, RangeError


class _Quantity(float):
    unit = ""
    lower = None         # inclusive lower bound, or None
    strict_lower = None  # exclusive lower bound, or None

    def __new__(cls, value):
        try:
            v = float(value)
        except (TypeError, ValueError) as exc:
            raise QuantityError(f"{cls.__name__}: not a number: {value!r}") from exc
        if not math.isfinite(v):
            raise QuantityError(f"{cls.__name__} must be finite, got {v!r}")
        if cls.lower is not None and v < cls.lower:
            raise QuantityError(f"{cls.__name__} must be >= {cls.lower} {cls.unit}, got {v!r}")
        if cls.strict_lower is not None and v <= cls.strict_lower:
            raise QuantityError(f"{cls.__name__} must be > {cls.strict_lower} {cls.unit}, got {v!r}")
        return super().__new__(cls, v)

    def __repr__(self):
        return f"{type(self).__name__}({float(self)!r})"

    def __str__(self):
        return f"{float(self):g} {self.unit}"

    @property
    def value(self) -> float:
        return float(self)


class PressureKpa(_Quantity):
    """Absolute chamber pressure in kPa."""
    unit = "kPa"
    lower = 0.0


class ForceN(_Quantity):
    unit = "N"


class DisplacementMm(_Quantity):
    unit = "mm"
    lower = 0.0


class StiffnessNPerMm(_Quantity):
    unit = "N/mm"
    strict_lower = 0.0


class VolumeMl(_Quantity):
    """Signed volume; positive dispenses into the twin."""
    unit = "mL"


@dataclass(frozen=True)
class Sample:
    timestamp: float
    step_index: int
    displacement: DisplacementMm
    force: ForceN
    pressure: PressureKpa
    trial: int = 0
    phase: str = ""


@dataclass(frozen=True)
class IndentationCurve:
    """Ordered (displacement mm, force N) samples from one indentation run."""

    displacements: Tuple[float, ...]
    forces: Tuple[float, ...]

    def __post_init__(self):
        d = tuple(float(DisplacementMm(x)) for x in self.displacements)
        f = tuple(float(ForceN(x)) for x in self.forces)
        if len(d) != len(f):
            raise QuantityError("displacement and force columns differ in length")
        if len(d) < 2:
            raise QuantityError("an indentation curve needs at least 2 points")
        if any(b <= a for a, b in zip(d, d[1:])):
            raise QuantityError("curve displacements must be strictly increasing")
        object.__setattr__(self, "displacements", d)
        object.__setattr__(self, "forces", f)

    @classmethod
    def from_points(cls, points: Sequence[Tuple[float, float]]) -> "IndentationCurve":
        return cls(tuple(p[0] for p in points), tuple(p[1] for p in points))

    @property
    def points(self):
        return list(zip(self.displacements, self.forces))

    @property
    def domain(self) -> Tuple[float, float]:
        return self.displacements[0], self.displacements[-1]

    def __len__(self):
        return len(self.displacements)


@dataclass(frozen=True)
class FruitSample:
    id: str
    day: int
    curve: IndentationCurve
    axial_length: Optional[float] = None
    radial_length: Optional[float] = None
    mass: Optional[float] = None

    def __post_init__(self):
        for name in ("axial_length", "radial_length", "mass"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise QuantityError(f"{self.id}: {name} must be > 0, got {v!r}")


def interpolate_force(curve: IndentationCurve, d) -> ForceN:
    """Piecewise-linear force at displacement ``d``; exact at sample points."""
    d = float(d)
    lo, hi = curve.domain
    if not (lo <= d <= hi):
        raise RangeError(f"displacement {d} mm outside curve domain [{lo}, {hi}] mm",
                         domain=(lo, hi))
    xs, fs = curve.displacements, curve.forces
    i = bisect.bisect_left(xs, d)
    if xs[i] == d:
        return ForceN(fs[i])
    x0, x1, f0, f1 = xs[i - 1], xs[i], fs[i - 1], fs[i]
    t = (d - x0) / (x1 - x0)
    return ForceN(f0 + t * (f1 - f0))
