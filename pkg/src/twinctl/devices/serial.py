"""Serial-wire backend speaking the line protocol in :mod:`.wire`."""

from __future__ import annotations

import logging

from ..errors import DeviceReplyError, DeviceTimeoutError
from ..units import ForceN, PressureKpa
from . import wire
from .adc import pump_steps_for_volume
from .base import (DeviceConfig, DeviceSet, ForceSensorPort, GripperPort, PressureSensorPort,
                   PumpPort, StagePort, WallClock)

log = logging.getLogger(__name__)


class SerialLink:
    """Request/reply over one transport.  A transport needs ``write(bytes)``
    and ``readline() -> bytes`` returning ``b""`` on timeout."""

    def __init__(self, transport, retries: int = 1, name: str = ""):
        self.transport = transport
        self.retries = retries
        self.name = name

    def transact(self, cmd, expect=None):
        frame = wire.frame_command(cmd)
        for attempt in range(self.retries + 1):
            self.transport.write(frame)
            raw = self.transport.readline()
            if raw:
                break
            log.warning("%s: timeout waiting for reply to %r (attempt %d)",
                        self.name, frame, attempt + 1)
        else:
            raise DeviceTimeoutError(f"{self.name}: no reply to {frame!r} after "
                                     f"{self.retries + 1} attempt(s)")
        reply = wire.parse_reply(raw)
        if isinstance(reply, wire.ErrorReply):
            raise DeviceReplyError(f"{self.name}: device error {reply.code:03d} {reply.message}")
        if expect is not None and not isinstance(reply, expect):
            raise DeviceReplyError(f"{self.name}: expected {expect.__name__}, got {reply!r}")
        return reply

    def close(self):
        closer = getattr(self.transport, "close", None)
        if closer is not None:
            closer()


class SerialPump(PumpPort):
    def __init__(self, link: SerialLink, config: DeviceConfig):
        super().__init__(config.syringe_capacity_ml, config.steps_per_ml)
        self.link = link

    def _move(self, ml):
        steps = pump_steps_for_volume(ml, self.steps_per_ml)
        remaining = steps
        while remaining:
            chunk = max(-99999, min(99999, remaining))
            self.link.transact(wire.PumpMove(chunk), wire.Ack)
            remaining -= chunk
        return steps / self.steps_per_ml

    def _zero(self):
        self.link.transact(wire.PumpZero(), wire.Ack)


class SerialPressureSensor(PressureSensorPort):
    def __init__(self, link: SerialLink, config: DeviceConfig):
        super().__init__(config.adc)
        self.link = link

    def read_counts(self) -> int:
        return self.link.transact(wire.AdcQuery(), wire.CountsReply).counts

    def read_reported(self) -> PressureKpa:
        """Pressure as decoded by the controller firmware itself."""
        return PressureKpa(self.link.transact(wire.PressureQuery(), wire.PressureReply).kpa)


class SerialForceSensor(ForceSensorPort):
    def __init__(self, link: SerialLink):
        self.link = link

    def read_force(self) -> ForceN:
        return ForceN(self.link.transact(wire.ForceQuery(), wire.ForceReply).newtons)


class SerialStage(StagePort):
    """G-code stage; depth maps to negative machine Z."""

    def __init__(self, link: SerialLink, config: DeviceConfig):
        super().__init__(config.stage_travel_mm)
        self.link = link

    def _move_to(self, target, feed):
        self.link.transact(wire.StageMove(-target, max(1, round(feed))), wire.Ack)

    def _home(self):
        self.link.transact(wire.StageHome(), wire.Ack)


class SerialGripper(GripperPort):
    def __init__(self, link: SerialLink, config: DeviceConfig):
        super().__init__(config.gripper_stroke_mm)
        self.link = link

    def _open(self):
        self.link.transact(wire.GripperOpen(), wire.Ack)

    def _close_by(self, mm):
        self.link.transact(wire.GripperClose(mm), wire.Ack)


def open_pyserial(port: str, baud: int, timeout_s: float):
    try:
        import serial
    except ImportError as exc:  # pragma: no cover - depends on optional extra
        raise DeviceReplyError("the serial backend needs pyserial (pip install pyserial)") from exc
    return serial.Serial(port, baudrate=baud, bytesize=serial.EIGHTBITS,
                         parity=serial.PARITY_NONE, stopbits=serial.STOPBITS_ONE,
                         timeout=timeout_s)


def open_serial(config: DeviceConfig, transport_factory=None, clock=None) -> DeviceSet:
    """Open every port named in ``config``.  Ports sharing a path share one
    link.  ``transport_factory(path)`` overrides pyserial (used by tests)."""
    if transport_factory is None:
        def transport_factory(path):
            return open_pyserial(path, config.baud, config.timeout_s)
    links = {}

    def link(path):
        if path not in links:
            links[path] = SerialLink(transport_factory(path), config.retries, name=path)
        return links[path]

    devices = DeviceSet(
        backend="serial",
        pump=SerialPump(link(config.pump_port), config),
        pressure=SerialPressureSensor(link(config.pressure_port), config),
        force=SerialForceSensor(link(config.force_port)),
        stage=SerialStage(link(config.stage_port), config),
        gripper=SerialGripper(link(config.gripper_port), config),
        clock=clock or WallClock(),
    )
    devices.links = links
    return devices
