"""Instrument ports with simulated and serial backends."""

from .adc import AdcTransfer, decode_pressure, encode_pressure, pump_steps_for_volume
from .base import (DeviceConfig, DeviceSet, ForceSensorPort, GripperPort, PressureSensorPort,
                   PumpPort, SimClock, StagePort, WallClock)
from .sim import SimBench, SimConfig, open_sim
from .serial import SerialLink, open_serial
from .wire import frame_command, frame_reply, parse_command, parse_reply

__all__ = [
    "AdcTransfer", "decode_pressure", "encode_pressure", "pump_steps_for_volume",
    "DeviceConfig", "DeviceSet", "ForceSensorPort", "GripperPort", "PressureSensorPort",
    "PumpPort", "SimClock", "StagePort", "WallClock",
    "SimBench", "SimConfig", "open_sim", "SerialLink", "open_serial",
    "frame_command", "frame_reply", "parse_command", "parse_reply",
]
