"""Controller firmware emulator: answers wire frames from a ``SimBench``.

Lets the serial backend run end-to-end without hardware.
"""

from __future__ import annotations

from collections import deque

from ..errors import TwinError
from . import wire
from .adc import encode_pressure


class FirmwareEmulator:
    def __init__(self, bench):
        self.bench = bench
        self.dispensed_steps = 0

    def handle(self, cmd):
        b = self.bench
        try:
            if isinstance(cmd, wire.PumpMove):
                b.inject(cmd.steps / b.devices.steps_per_ml)
                self.dispensed_steps += cmd.steps
                return wire.Ack()
            if isinstance(cmd, wire.PumpZero):
                self.dispensed_steps = 0
                return wire.Ack()
            if isinstance(cmd, wire.AdcQuery):
                lo, hi = b.devices.adc.p_range
                p = min(max(b.read_pressure(), lo), hi)
                return wire.CountsReply(encode_pressure(p, b.devices.adc))
            if isinstance(cmd, wire.PressureQuery):
                return wire.PressureReply(b.read_pressure())
            if isinstance(cmd, wire.ForceQuery):
                return wire.ForceReply(float(b.read_force()))
            if isinstance(cmd, wire.GripperOpen):
                b.set_aperture(b.devices.gripper_stroke_mm)
                return wire.Ack()
            if isinstance(cmd, wire.GripperClose):
                if cmd.mm > b.gripper_aperture + 1e-9:
                    return wire.ErrorReply(20, "gripper stroke limit")
                b.set_aperture(b.gripper_aperture - cmd.mm)
                return wire.Ack()
            if isinstance(cmd, wire.StageMove):
                depth = -cmd.z
                if not 0 <= depth <= b.devices.stage_travel_mm:
                    return wire.ErrorReply(30, "soft limit")
                b.move_stage(depth, cmd.feed or 1000.0)
                return wire.Ack()
            if isinstance(cmd, wire.StageHome):
                b.move_stage(0.0, 1000.0)
                return wire.Ack()
        except TwinError as exc:
            return wire.ErrorReply(90, str(exc)[:50].encode("ascii", "replace").decode())
        return wire.ErrorReply(1, "unsupported")


class LoopbackTransport:
    """In-memory transport wired to an emulator.  ``drop`` lists 1-based
    request numbers whose replies are swallowed, emulating a timeout."""

    def __init__(self, emulator: FirmwareEmulator, drop=()):
        self.emulator = emulator
        self.drop = set(drop)
        self.requests = 0
        self.written = []
        self._pending = deque()

    def write(self, data: bytes):
        self.requests += 1
        self.written.append(bytes(data))
        try:
            cmd = wire.parse_command(bytes(data))
            reply = self.emulator.handle(cmd)
        except wire.FrameError as exc:
            reply = wire.ErrorReply(2, "bad frame")
        if self.requests not in self.drop:
            self._pending.append(wire.frame_reply(reply))

    def readline(self) -> bytes:
        return self._pending.popleft() if self._pending else b""
