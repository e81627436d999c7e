"""Framework configuration: a YAML file with one block per subsystem.

Example::

    backend: sim
    output_dir: runs
    log_precision: 4
    seed: 0
    twin:
      drift_kpa_per_cycle: 0.0
    sim:
      quantize: false
    devices:
      steps_per_ml: 800
      adc: {bits: 16}
    protocol:
      pressure_tolerance_kpa: 0.2

Every key is optional.  ``TWINCTL_CONFIG`` names the file when no path is
given explicitly.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import yaml

from .devices import DeviceConfig, SimConfig, open_serial, open_sim
from .errors import ConfigError, TwinError
from .protocols import ProtocolSettings
from .twin import TwinParams

ENV_VAR = "TWINCTL_CONFIG"
BACKENDS = ("sim", "serial")


@dataclass(frozen=True)
class FrameworkConfig:
    backend: str = "sim"
    output_dir: str = "runs"
    log_precision: int = 4
    seed: int = 0
    twin: TwinParams = field(default_factory=TwinParams)
    sim: SimConfig = field(default_factory=SimConfig)
    devices: DeviceConfig = field(default_factory=DeviceConfig)
    protocol: ProtocolSettings = field(default_factory=ProtocolSettings)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if not 0 <= int(self.log_precision) <= 12:
            raise ConfigError("log_precision must be in [0, 12]")

    def to_mapping(self) -> dict:
        return {
            "backend": self.backend,
            "output_dir": self.output_dir,
            "log_precision": self.log_precision,
            "seed": self.seed,
            "twin": asdict(self.twin),
            "sim": asdict(self.sim),
            "devices": self.devices.to_mapping(),
            "protocol": asdict(self.protocol),
        }

    def open_devices(self, seed: Optional[int] = None, transport_factory=None):
        if self.backend == "sim":
            return open_sim(self.twin, self.sim, self.devices,
                            self.seed if seed is None else seed)
        if transport_factory is None:
            missing = sorted({p for p in (self.devices.pump_port, self.devices.pressure_port,
                                          self.devices.force_port, self.devices.stage_port,
                                          self.devices.gripper_port) if not os.path.exists(p)})
            if missing:
                raise ConfigError(f"serial port(s) not found: {', '.join(missing)}")
        return open_serial(self.devices, transport_factory)


def from_mapping(data) -> FrameworkConfig:
    data = dict(data or {})
    known = {"backend", "output_dir", "log_precision", "seed", "twin", "sim", "devices", "protocol"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    try:
        twin = TwinParams.from_mapping(data.pop("twin", None) or {})
        sim = SimConfig.from_mapping(data.pop("sim", None) or {})
        devices = DeviceConfig.from_mapping(data.pop("devices", None) or {})
        proto = dict(data.pop("protocol", None) or {})
        # The setpoint limit and controller gain follow the twin unless overridden.
        proto.setdefault("p_limit_kpa", twin.p_max)
        proto.setdefault("control_gain_ml_per_kpa", twin.chamber_volume_ml / sim.atmospheric_kpa)
        protocol = ProtocolSettings.from_mapping(proto)
        return FrameworkConfig(twin=twin, sim=sim, devices=devices, protocol=protocol, **data)
    except TypeError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    except TwinError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_config(path=None) -> FrameworkConfig:
    """Read ``path`` (or ``$TWINCTL_CONFIG``); built-in defaults when neither is set."""
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    if path is None:
        return from_mapping({})
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: not valid YAML: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    return from_mapping(data)


def with_overrides(cfg: FrameworkConfig, **kw) -> FrameworkConfig:
    kw = {k: v for k, v in kw.items() if v is not None}
    return replace(cfg, **kw) if kw else cfg
