"""Simulated backend: every port drives one shared ``SimBench`` plant.

The bench owns the twin state, the stage and gripper geometry and one seeded
RNG, so a run is a pure function of (twin params, configs, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace, asdict

import numpy as np

from ..errors import ActuationLimitError, QuantityError
from ..twin import (PLATE_AREA_MM2, TwinParams, TwinState, apply_cycle_drift, chamber_pressure,
                    reaction_force)
from ..units import ForceN, PressureKpa
from .adc import encode_pressure
from .base import (DeviceConfig, DeviceSet, ForceSensorPort, GripperPort, PressureSensorPort,
                   PumpPort, SimClock, StagePort)
from .adc import pump_steps_for_volume


@dataclass(frozen=True)
class SimConfig:
    quantize: bool = False            # ADC counts and whole pump steps
    initial_pressure_kpa: float = 100.0
    atmospheric_kpa: float = 100.0    # pressure of the air the syringe meters in
    overpressure_margin_kpa: float = 2.0
    stage_gap_mm: float = 1.0         # home-to-surface clearance
    indenter_area_mm2: float = math.pi * 5.0 ** 2
    plate_area_mm2: float = PLATE_AREA_MM2
    twin_width_mm: float = 46.0       # across the gripper jaws
    gripper_area_mm2: float = 300.0
    sample_period_s: float = 0.01
    pump_rate_ml_s: float = 1.0

    def __post_init__(self):
        for name, v in asdict(self).items():
            if not isinstance(v, bool) and (not math.isfinite(v) or v < 0):
                raise QuantityError(f"SimConfig.{name} must be finite and >= 0")
        if self.atmospheric_kpa <= 0 or self.sample_period_s <= 0 or self.pump_rate_ml_s <= 0:
            raise QuantityError("atmospheric_kpa, sample_period_s, pump_rate_ml_s must be > 0")

    @classmethod
    def from_mapping(cls, data) -> "SimConfig":
        return cls(**data)


class SimBench:
    """Mutable simulation cell around a ``TwinState``; exclusively owned by
    one protocol runner."""

    TOOLS = ("indenter", "plate")

    def __init__(self, params: TwinParams, sim: SimConfig, devices: DeviceConfig, seed: int = 0):
        self.sim = sim
        self.devices = devices
        self.state = TwinState(params=params, pressure=sim.initial_pressure_kpa, rng_seed=int(seed))
        self.rng = np.random.default_rng(int(seed))
        self.clock = SimClock()
        self.stage_position = 0.0
        self.gripper_aperture = devices.gripper_stroke_mm
        self.tool = "indenter"

    @property
    def params(self) -> TwinParams:
        return self.state.params

    def mount_tool(self, name: str):
        if name not in self.TOOLS:
            raise QuantityError(f"unknown tool {name!r}; expected one of {self.TOOLS}")
        self.tool = name

    def begin_cycle(self):
        self.state = apply_cycle_drift(self.state)

    @property
    def tool_area_mm2(self) -> float:
        return self.sim.plate_area_mm2 if self.tool == "plate" else self.sim.indenter_area_mm2

    # -- geometry -------------------------------------------------------------
    @property
    def stage_compression(self) -> float:
        return max(0.0, round(self.stage_position - self.sim.stage_gap_mm, 9))

    @property
    def gripper_compression(self) -> float:
        return max(0.0, round(self.sim.twin_width_mm - self.gripper_aperture, 9))

    def _sync(self):
        self.state = replace(self.state, compression=self.stage_compression)

    # -- physics --------------------------------------------------------------
    def true_pressure(self) -> PressureKpa:
        displaced = (self.stage_compression * self.tool_area_mm2
                     + self.gripper_compression * self.sim.gripper_area_mm2) / 1000.0
        return chamber_pressure(self.state, displaced)

    def true_force(self, noisy=True) -> ForceN:
        return reaction_force(self.state, self.stage_compression,
                              rng=self.rng if noisy else None, area_mm2=self.tool_area_mm2)

    def read_pressure(self) -> float:
        self.clock.advance(self.sim.sample_period_s)
        p = float(self.true_pressure())
        if self.params.sensor_noise_sd_kpa > 0:
            p += self.rng.normal(0.0, self.params.sensor_noise_sd_kpa)
        return p

    def read_force(self) -> ForceN:
        self.clock.advance(self.sim.sample_period_s)
        return self.true_force()

    def inject(self, ml: float):
        """Meter ``ml`` of atmospheric air into (or out of) the chamber."""
        p = self.state.pressure + self.sim.atmospheric_kpa * ml / self.params.chamber_volume_ml
        limit = self.params.p_max + self.sim.overpressure_margin_kpa
        if p > limit:
            raise ActuationLimitError(
                f"pump move would raise rest pressure to {p:.3f} kPa (> {limit:.3f} kPa)",
                bound="overpressure")
        if p <= 0:
            raise ActuationLimitError("pump move would evacuate the chamber", bound="vacuum")
        self.state = replace(self.state, pressure=p)
        self.clock.advance(abs(ml) / self.sim.pump_rate_ml_s)

    def move_stage(self, target: float, feed: float):
        self.clock.advance(abs(target - self.stage_position) / feed * 60.0)
        self.stage_position = target
        self._sync()

    def set_aperture(self, aperture: float):
        self.clock.advance(abs(aperture - self.gripper_aperture) / 50.0)
        self.gripper_aperture = aperture


class SimPump(PumpPort):
    def __init__(self, bench: SimBench):
        super().__init__(bench.devices.syringe_capacity_ml, bench.devices.steps_per_ml)
        self.bench = bench

    def _move(self, ml):
        if self.bench.sim.quantize:
            ml = pump_steps_for_volume(ml, self.steps_per_ml) / self.steps_per_ml
        if ml:
            self.bench.inject(ml)
        return ml


class SimPressureSensor(PressureSensorPort):
    def __init__(self, bench: SimBench):
        super().__init__(bench.devices.adc)
        self.bench = bench

    def _clamped(self, p):
        lo, hi = self.transfer.p_range
        return min(max(p, lo), hi)

    def read_counts(self) -> int:
        return encode_pressure(self._clamped(self.bench.read_pressure()), self.transfer)

    def read_pressure(self) -> PressureKpa:
        if self.bench.sim.quantize:
            return super().read_pressure()
        p = self.bench.read_pressure()
        lo, hi = self.transfer.p_range
        self.saturated = not lo <= p <= hi
        return PressureKpa(self._clamped(p))


class SimForceSensor(ForceSensorPort):
    def __init__(self, bench: SimBench):
        self.bench = bench

    def read_force(self) -> ForceN:
        return self.bench.read_force()


class SimStage(StagePort):
    def __init__(self, bench: SimBench):
        super().__init__(bench.devices.stage_travel_mm)
        self.bench = bench

    def _move_to(self, target, feed):
        self.bench.move_stage(target, feed)

    def _home(self):
        self.bench.move_stage(0.0, 1000.0)


class SimGripper(GripperPort):
    def __init__(self, bench: SimBench):
        super().__init__(bench.devices.gripper_stroke_mm)
        self.bench = bench

    def _open(self):
        self.bench.set_aperture(self.max_stroke)

    def _close_by(self, mm):
        self.bench.set_aperture(max(self.aperture - mm, 0.0))


def open_sim(params: TwinParams | None = None, sim: SimConfig | None = None,
             devices: DeviceConfig | None = None, seed: int = 0) -> DeviceSet:
    bench = SimBench(params or TwinParams(), sim or SimConfig(), devices or DeviceConfig(), seed)
    return DeviceSet(
        backend="sim",
        pump=SimPump(bench),
        pressure=SimPressureSensor(bench),
        force=SimForceSensor(bench),
        stage=SimStage(bench),
        gripper=SimGripper(bench),
        clock=bench.clock,
        bench=bench,
    )
