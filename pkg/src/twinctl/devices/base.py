"""Instrument port abstractions shared by the simulated and serial backends.

Each port tracks the state it is responsible for (dispensed volume, stage
depth, gripper aperture) and validates commands against its limits before
handing the actuation to the backend-specific ``_`` hook.
"""

from __future__ import annotations

import abc
import time
from dataclasses import dataclass, field, asdict
from typing import Optional

from ..errors import ActuationLimitError, QuantityError
from ..units import ForceN, PressureKpa, VolumeMl
from .adc import AdcTransfer, decode_pressure

_EPS = 1e-9


class SimClock:
    """Run-local deterministic clock; time only moves when told to."""

    def __init__(self, start: float = 0.0):
        self._t = float(start)

    def now(self) -> float:
        return self._t

    def advance(self, dt: float):
        if dt < 0:
            raise ValueError("cannot move a clock backwards")
        self._t += dt

    sleep = advance


class WallClock:
    """Monotonic seconds since construction."""

    def __init__(self):
        self._t0 = time.monotonic()
        self._last = 0.0

    def now(self) -> float:
        t = time.monotonic() - self._t0
        # Keep successive readings strictly increasing.
        if t <= self._last:
            t = self._last + 1e-6
        self._last = t
        return t

    def advance(self, dt: float):
        pass

    def sleep(self, dt: float):
        if dt > 0:
            time.sleep(dt)


@dataclass(frozen=True)
class DeviceConfig:
    pump_port: str = "/dev/ttyACM0"
    pressure_port: str = "/dev/ttyACM0"
    force_port: str = "/dev/ttyUSB1"
    stage_port: str = "/dev/ttyUSB0"
    gripper_port: str = "/dev/ttyUSB2"
    baud: int = 115200
    timeout_s: float = 0.5
    retries: int = 1
    steps_per_ml: float = 800.0
    syringe_capacity_ml: float = 60.0
    stage_travel_mm: float = 50.0
    gripper_stroke_mm: float = 50.0
    adc: AdcTransfer = field(default_factory=AdcTransfer)

    def __post_init__(self):
        if self.steps_per_ml <= 0:
            raise QuantityError("steps_per_ml must be > 0")
        if self.syringe_capacity_ml <= 0 or self.stage_travel_mm <= 0 or self.gripper_stroke_mm <= 0:
            raise QuantityError("capacity, travel and stroke must be > 0")
        if self.timeout_s <= 0 or self.retries < 0:
            raise QuantityError("timeout_s must be > 0 and retries >= 0")

    @classmethod
    def from_mapping(cls, data) -> "DeviceConfig":
        data = dict(data)
        adc = data.pop("adc", None)
        if adc is not None:
            adc = dict(adc)
            if "p_range" in adc:
                adc["p_range"] = tuple(adc["p_range"])
            data["adc"] = AdcTransfer(**adc)
        return cls(**data)

    def to_mapping(self) -> dict:
        d = asdict(self)
        d["adc"]["p_range"] = list(d["adc"]["p_range"])
        return d


class PumpPort(abc.ABC):
    """Metering syringe pump; positive volumes dispense into the twin.

    The syringe re-primes between strokes, so only a single move is bounded
    by its capacity; ``dispensed_ml`` is the running net total."""

    def __init__(self, capacity_ml: float, steps_per_ml: float):
        self.capacity_ml = float(capacity_ml)
        self.steps_per_ml = float(steps_per_ml)
        self.dispensed_ml = 0.0

    def move_volume(self, ml) -> float:
        ml = float(VolumeMl(ml))
        if abs(ml) > self.capacity_ml + _EPS:
            raise ActuationLimitError(
                f"moving {ml:.4f} mL exceeds syringe capacity {self.capacity_ml} mL",
                bound="capacity")
        moved = self._move(ml)
        self.dispensed_ml += moved
        return moved

    def zero(self):
        self._zero()
        self.dispensed_ml = 0.0

    @abc.abstractmethod
    def _move(self, ml: float) -> float:
        """Actuate and return the volume actually moved."""

    def _zero(self):
        pass


class PressureSensorPort(abc.ABC):
    def __init__(self, transfer: AdcTransfer):
        self.transfer = transfer
        self.saturated = False

    @abc.abstractmethod
    def read_counts(self) -> int:
        ...

    def read_pressure(self) -> PressureKpa:
        p, self.saturated = decode_pressure(self.read_counts(), self.transfer)
        return p


class ForceSensorPort(abc.ABC):
    @abc.abstractmethod
    def read_force(self) -> ForceN:
        """Axial (z) reaction force, N."""


class StagePort(abc.ABC):
    """Single-axis stage; ``position`` is depth in mm below home (toward the
    sample)."""

    def __init__(self, travel_mm: float):
        self.travel_mm = float(travel_mm)
        self.position = 0.0

    def move_z_relative(self, mm: float, feed: float):
        if not feed > 0:
            raise ActuationLimitError(f"feed must be > 0 mm/min, got {feed}", bound="feed")
        target = self.position + float(mm)
        if target < -_EPS or target > self.travel_mm + _EPS:
            raise ActuationLimitError(
                f"stage target {target:.4f} mm outside travel [0, {self.travel_mm}] mm",
                bound="travel")
        target = min(max(target, 0.0), self.travel_mm)
        self._move_to(target, float(feed))
        self.position = target

    def home(self):
        self._home()
        self.position = 0.0

    @abc.abstractmethod
    def _move_to(self, target: float, feed: float):
        ...

    @abc.abstractmethod
    def _home(self):
        ...


class GripperPort(abc.ABC):
    def __init__(self, max_stroke_mm: float):
        self.max_stroke = float(max_stroke_mm)
        self.aperture = self.max_stroke

    def open_full(self):
        self._open()
        self.aperture = self.max_stroke

    def close_by(self, mm: float):
        mm = float(mm)
        if mm < 0:
            raise ActuationLimitError("close_by distance must be >= 0", bound="direction")
        target = self.aperture - mm
        if target < -_EPS:
            raise ActuationLimitError(
                f"closing {mm} mm from aperture {self.aperture:.3f} mm passes the stroke limit",
                bound="stroke")
        self._close_by(mm)
        self.aperture = max(target, 0.0)

    @abc.abstractmethod
    def _open(self):
        ...

    @abc.abstractmethod
    def _close_by(self, mm: float):
        ...


@dataclass
class DeviceSet:
    """The instruments one protocol runner owns for the duration of a run."""

    backend: str
    pump: PumpPort
    pressure: PressureSensorPort
    force: ForceSensorPort
    stage: StagePort
    gripper: GripperPort
    clock: object
    bench: Optional[object] = None   # simulated plant, sim backend only

    def mount_tool(self, name: str):
        """Select the stage contact tool (``indenter`` or ``plate``).  Only the
        simulated plant cares; on hardware this is an operator step."""
        if self.bench is not None:
            self.bench.mount_tool(name)

    def begin_cycle(self):
        """Mark the start of a load cycle (the simulated plant drifts here)."""
        if self.bench is not None:
            self.bench.begin_cycle()

    def close(self):
        for port in (self.pump, self.pressure, self.force, self.stage, self.gripper):
            closer = getattr(port, "close", None)
            if closer is not None:
                closer()
