"""Counts-level model of the pressure sensor + ADC signal chain."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

from ..errors import CodecError, QuantityError
from ..units import PressureKpa

SENSOR_SPAN_KPA = (100.0, 400.0)


@dataclass(frozen=True)
class AdcTransfer:
    """``V = gain_v_per_kpa * P + offset_v``, sampled by a ``bits``-bit ADC
    spanning ``[0, v_ref]`` volts.  Defaults approximate an absolute
    100-400 kPa sensor on a 5 V supply read through a 6.144 V range."""

    bits: int = 16
    v_ref: float = 6.144
    gain_v_per_kpa: float = 0.012105
    offset_v: float = -0.0421
    p_range: Tuple[float, float] = SENSOR_SPAN_KPA

    def __post_init__(self):
        if self.bits not in (12, 16, 24):
            raise QuantityError(f"ADC bits must be 12, 16 or 24, got {self.bits}")
        if not self.gain_v_per_kpa > 0:
            raise QuantityError("gain_v_per_kpa must be > 0")
        if not self.v_ref > 0:
            raise QuantityError("v_ref must be > 0")
        lo, hi = (float(x) for x in self.p_range)
        if not lo < hi:
            raise QuantityError("p_range must be ordered low < high")
        if lo < SENSOR_SPAN_KPA[0] or hi > SENSOR_SPAN_KPA[1]:
            raise QuantityError(f"p_range {self.p_range} outside sensor span {SENSOR_SPAN_KPA}")
        object.__setattr__(self, "p_range", (lo, hi))
        for p in (lo, hi):
            v = self.gain_v_per_kpa * p + self.offset_v
            if not (-1e-12 <= v <= self.v_ref + 1e-12):
                raise QuantityError(f"{p} kPa maps to {v:.4f} V, outside ADC input [0, {self.v_ref}] V")

    @property
    def max_counts(self) -> int:
        return (1 << self.bits) - 1

    @property
    def lsb_kpa(self) -> float:
        return self.v_ref / self.max_counts / self.gain_v_per_kpa

    @classmethod
    def spanning(cls, bits=16, p_range=(100.0, 400.0)) -> "AdcTransfer":
        """Transfer whose full count range covers exactly ``p_range``."""
        lo, hi = p_range
        return cls(bits=bits, v_ref=1.0, gain_v_per_kpa=1.0 / (hi - lo),
                   offset_v=-lo / (hi - lo), p_range=p_range)


def decode_pressure(counts: int, t: AdcTransfer) -> Tuple[PressureKpa, bool]:
    """Counts to kPa, clamped to ``t.p_range``.  Returns ``(pressure, saturated)``."""
    if isinstance(counts, bool) or int(counts) != counts:
        raise CodecError(f"ADC counts must be an integer, got {counts!r}")
    counts = int(counts)
    if not 0 <= counts <= t.max_counts:
        raise CodecError(f"ADC counts {counts} outside [0, {t.max_counts}]")
    p = ((counts / t.max_counts) * t.v_ref - t.offset_v) / t.gain_v_per_kpa
    lo, hi = t.p_range
    if p < lo:
        return PressureKpa(lo), True
    if p > hi:
        return PressureKpa(hi), True
    return PressureKpa(p), False


def encode_pressure(p, t: AdcTransfer) -> int:
    p = float(p)
    lo, hi = t.p_range
    if not (math.isfinite(p) and lo <= p <= hi):
        raise CodecError(f"pressure {p} kPa outside transfer range [{lo}, {hi}]")
    v = t.gain_v_per_kpa * p + t.offset_v
    return min(max(int(round(v / t.v_ref * t.max_counts)), 0), t.max_counts)


def pump_steps_for_volume(vol, steps_per_ml: float) -> int:
    if not steps_per_ml > 0:
        raise QuantityError("steps_per_ml must be > 0")
    return int(round(float(vol) * steps_per_ml))
