"""Physics model of the pneumatic fiber-reinforced twin.

The plant's stiffness law is the inverse of the affine pressure-stiffness
calibration ``P = a*K + b``.  Compression displaces chamber volume and raises
pressure isothermally; indentation force is linear up to a damage depth and
plateaus beyond it.  State transitions return new ``TwinState`` values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace, asdict

import numpy as np

from .errors import ActuationLimitError, DegenerateStateError, ModelDomainError, QuantityError
from .units import DisplacementMm, ForceN, PressureKpa, StiffnessNPerMm

PLATE_DIAMETER_MM = 49.0
PLATE_AREA_MM2 = math.pi * (PLATE_DIAMETER_MM / 2) ** 2


@dataclass(frozen=True)
class TwinParams:
    slope_a: float = 44.84            # kPa per N/mm
    intercept_b: float = 11.37        # kPa
    p_min: float = 100.0
    p_max: float = 145.89
    chamber_volume_ml: float = 95.0
    compression_area_mm2: float = PLATE_AREA_MM2
    compliance_exponent: float = 1.0
    damage_depth_mm: float = 8.0
    drift_kpa_per_cycle: float = 0.0
    seating_shift_kpa: float = 0.0    # one-off baseline shift on the first cycle
    sensor_noise_sd_kpa: float = 0.0
    force_noise_sd_n: float = 0.0
    pressure_stiffening: bool = False

    def __post_init__(self):
        for name, v in asdict(self).items():
            if not isinstance(v, bool) and not math.isfinite(v):
                raise QuantityError(f"TwinParams.{name} must be finite")
        if self.slope_a <= 0:
            raise QuantityError("slope_a must be > 0")
        if not self.p_min < self.p_max:
            raise QuantityError("p_min must be < p_max")
        if self.chamber_volume_ml <= 0:
            raise QuantityError("chamber_volume_ml must be > 0")
        if self.compression_area_mm2 < 0:
            raise QuantityError("compression_area_mm2 must be >= 0")
        if self.damage_depth_mm <= 0:
            raise QuantityError("damage_depth_mm must be > 0")
        if self.sensor_noise_sd_kpa < 0 or self.force_noise_sd_n < 0:
            raise QuantityError("noise SDs must be >= 0")

    @classmethod
    def from_mapping(cls, data) -> "TwinParams":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise QuantityError(f"unknown twin parameter(s): {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class TwinState:
    params: TwinParams = field(default_factory=TwinParams)
    pressure: float = 100.0           # uncompressed (rest) pressure, kPa
    compression: float = 0.0
    cycle_count: int = 0
    rng_seed: int = 0

    def __post_init__(self):
        # Setpoint bounds are enforced by set_baseline_pressure; pump-driven
        # states may sit marginally outside them.
        PressureKpa(self.pressure)
        DisplacementMm(self.compression)
        if self.cycle_count < 0:
            raise QuantityError("cycle_count must be >= 0")


def stiffness_at(state: TwinState) -> StiffnessNPerMm:
    p = state.params
    if state.pressure <= p.intercept_b:
        raise DegenerateStateError(
            f"pressure {state.pressure} kPa <= intercept {p.intercept_b} kPa: no positive stiffness")
    return StiffnessNPerMm((state.pressure - p.intercept_b) / p.slope_a)


def compressed_pressure(state: TwinState, d, area_mm2=None) -> PressureKpa:
    """Chamber pressure with the twin compressed by ``d`` mm under a contact of
    ``area_mm2`` (defaults to the twin's configured compression area)."""
    d = float(DisplacementMm(d))
    area = state.params.compression_area_mm2 if area_mm2 is None else float(area_mm2)
    return chamber_pressure(state, area * d / 1000.0)


def chamber_pressure(state: TwinState, displaced_ml: float) -> PressureKpa:
    """Pressure with ``displaced_ml`` of chamber volume pushed in by contacts."""
    v0 = state.params.chamber_volume_ml
    if displaced_ml >= v0:
        raise ModelDomainError(
            f"displaced volume {displaced_ml:.4g} mL >= chamber volume {v0} mL")
    if displaced_ml == 0:
        return PressureKpa(state.pressure)
    ratio = v0 / (v0 - displaced_ml)
    return PressureKpa(state.pressure * ratio ** state.params.compliance_exponent)


def reaction_force(state: TwinState, d, rng: np.random.Generator | None = None,
                   area_mm2=None) -> ForceN:
    """Axial reaction force at compression ``d``.  Noise is added only when an
    ``rng`` is supplied and ``force_noise_sd_n`` is positive."""
    d = float(DisplacementMm(d))
    p = state.params
    d_eff = min(d, p.damage_depth_mm)
    if p.pressure_stiffening and d_eff > 0:
        stiff_state = replace(state, pressure=float(compressed_pressure(state, d_eff, area_mm2)))
        k = float(stiffness_at(stiff_state))
    else:
        k = float(stiffness_at(state))
    f = k * d_eff
    if rng is not None and p.force_noise_sd_n > 0:
        f += rng.normal(0.0, p.force_noise_sd_n)
    return ForceN(f)


def set_baseline_pressure(state: TwinState, p) -> TwinState:
    p = float(PressureKpa(p))
    if p < state.params.p_min:
        raise ActuationLimitError(
            f"pressure {p} kPa below p_min {state.params.p_min} kPa", bound="p_min")
    if p > state.params.p_max:
        raise ActuationLimitError(
            f"pressure {p} kPa above p_max {state.params.p_max} kPa", bound="p_max")
    return replace(state, pressure=p, compression=0.0)


def apply_cycle_drift(state: TwinState) -> TwinState:
    shift = state.params.drift_kpa_per_cycle
    if state.cycle_count == 0:
        shift += state.params.seating_shift_kpa
    return replace(state, pressure=state.pressure + shift, cycle_count=state.cycle_count + 1)
