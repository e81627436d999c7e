"""Line protocol between the host and the rig controllers.

Frames are newline-terminated ASCII with fixed-width numeric fields::

    PMP +00800      pump move, signed stepper steps
    PMZ             zero the pump's dispensed-volume counter
    PRS?            query decoded pressure        -> OK P=123.47
    ADC?            query raw ADC counts          -> OK C=32113
    FRC?            query axial force             -> OK F=+9.0000
    GRP C004.0      close gripper by 4.0 mm
    GRP O           open gripper fully
    G1 Z-3.000 F5   stage feed move (absolute Z, mm; feed mm/min)
    G0 Z-0.000      stage rapid move
    G28             home stage

Replies are ``OK``, ``OK <key>=<value>`` or ``ERR NNN <text>``.  Command
values are normalised to the wire resolution on construction, so
``parse_command(frame_command(c)) == c`` for every valid command.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from typing import Union

from ..errors import FrameError

MAX_FRAME = 64
TERMINATOR = b"\n"


def _check_range(name, v, lo, hi):
    if not lo <= v <= hi:
        raise FrameError(f"{name}={v} outside [{lo}, {hi}]", offset=0)


@dataclass(frozen=True)
class PumpMove:
    steps: int

    def __post_init__(self):
        if isinstance(self.steps, bool) or int(self.steps) != self.steps:
            raise FrameError(f"pump steps must be integral, got {self.steps!r}")
        object.__setattr__(self, "steps", int(self.steps))
        _check_range("steps", self.steps, -99999, 99999)


@dataclass(frozen=True)
class PumpZero:
    pass


@dataclass(frozen=True)
class PressureQuery:
    pass


@dataclass(frozen=True)
class AdcQuery:
    pass


@dataclass(frozen=True)
class ForceQuery:
    pass


@dataclass(frozen=True)
class GripperClose:
    mm: float

    def __post_init__(self):
        object.__setattr__(self, "mm", round(float(self.mm), 1))
        _check_range("mm", self.mm, 0.0, 999.9)


@dataclass(frozen=True)
class GripperOpen:
    pass


@dataclass(frozen=True)
class StageMove:
    z: float
    feed: int = 0
    rapid: bool = False

    def __post_init__(self):
        object.__setattr__(self, "z", round(float(self.z), 3) + 0.0)
        _check_range("z", self.z, -999.999, 999.999)
        if self.rapid:
            object.__setattr__(self, "feed", 0)
        else:
            if int(self.feed) != self.feed:
                raise FrameError(f"feed must be integral mm/min, got {self.feed!r}")
            object.__setattr__(self, "feed", int(self.feed))
            _check_range("feed", self.feed, 1, 99999)


@dataclass(frozen=True)
class StageHome:
    pass


Command = Union[PumpMove, PumpZero, PressureQuery, AdcQuery, ForceQuery,
                GripperClose, GripperOpen, StageMove, StageHome]


@dataclass(frozen=True)
class Ack:
    pass


@dataclass(frozen=True)
class PressureReply:
    kpa: float

    def __post_init__(self):
        object.__setattr__(self, "kpa", round(float(self.kpa), 2))
        _check_range("kpa", self.kpa, 0.0, 9999.99)


@dataclass(frozen=True)
class CountsReply:
    counts: int

    def __post_init__(self):
        object.__setattr__(self, "counts", int(self.counts))
        _check_range("counts", self.counts, 0, (1 << 24) - 1)


@dataclass(frozen=True)
class ForceReply:
    newtons: float

    def __post_init__(self):
        object.__setattr__(self, "newtons", round(float(self.newtons), 4) + 0.0)
        _check_range("newtons", self.newtons, -9999.9999, 9999.9999)


@dataclass(frozen=True)
class ErrorReply:
    code: int
    message: str = ""

    def __post_init__(self):
        _check_range("code", self.code, 0, 999)
        object.__setattr__(self, "message", self.message.strip())
        if "\n" in self.message or not self.message.isascii():
            raise FrameError("error message must be single-line ASCII")


Reply = Union[Ack, PressureReply, CountsReply, ForceReply, ErrorReply]


def _finish(text: str) -> bytes:
    data = text.encode("ascii") + TERMINATOR
    if len(data) > MAX_FRAME:
        raise FrameError(f"frame of {len(data)} bytes exceeds {MAX_FRAME}", offset=MAX_FRAME)
    return data


def frame_command(cmd: Command) -> bytes:
    if isinstance(cmd, PumpMove):
        return _finish(f"PMP {cmd.steps:+06d}")
    if isinstance(cmd, PumpZero):
        return _finish("PMZ")
    if isinstance(cmd, PressureQuery):
        return _finish("PRS?")
    if isinstance(cmd, AdcQuery):
        return _finish("ADC?")
    if isinstance(cmd, ForceQuery):
        return _finish("FRC?")
    if isinstance(cmd, GripperClose):
        return _finish(f"GRP C{cmd.mm:05.1f}")
    if isinstance(cmd, GripperOpen):
        return _finish("GRP O")
    if isinstance(cmd, StageMove):
        if cmd.rapid:
            return _finish(f"G0 Z{cmd.z:+.3f}")
        return _finish(f"G1 Z{cmd.z:+.3f} F{cmd.feed}")
    if isinstance(cmd, StageHome):
        return _finish("G28")
    raise FrameError(f"not a command: {cmd!r}")


def frame_reply(reply: Reply) -> bytes:
    if isinstance(reply, Ack):
        return _finish("OK")
    if isinstance(reply, PressureReply):
        return _finish(f"OK P={reply.kpa:.2f}")
    if isinstance(reply, CountsReply):
        return _finish(f"OK C={reply.counts}")
    if isinstance(reply, ForceReply):
        return _finish(f"OK F={reply.newtons:+.4f}")
    if isinstance(reply, ErrorReply):
        return _finish(f"ERR {reply.code:03d} {reply.message}".rstrip())
    raise FrameError(f"not a reply: {reply!r}")


def _line(data: bytes) -> str:
    if len(data) > MAX_FRAME:
        raise FrameError(f"frame of {len(data)} bytes exceeds {MAX_FRAME}", offset=MAX_FRAME)
    if not data.endswith(TERMINATOR):
        raise FrameError("missing newline terminator", offset=len(data))
    body = data[:-1]
    for i, b in enumerate(body):
        if b < 0x20 or b > 0x7E:
            raise FrameError(f"invalid byte 0x{b:02x}", offset=i)
    return body.decode("ascii")


_COMMAND_PATTERNS = [
    ("PMP ", re.compile(r"PMP ([+-]\d{5})"), lambda m: PumpMove(int(m[1]))),
    ("PMZ", re.compile(r"PMZ"), lambda m: PumpZero()),
    ("PRS?", re.compile(r"PRS\?"), lambda m: PressureQuery()),
    ("ADC?", re.compile(r"ADC\?"), lambda m: AdcQuery()),
    ("FRC?", re.compile(r"FRC\?"), lambda m: ForceQuery()),
    ("GRP C", re.compile(r"GRP C(\d{3}\.\d)"), lambda m: GripperClose(float(m[1]))),
    ("GRP O", re.compile(r"GRP O"), lambda m: GripperOpen()),
    ("G1 Z", re.compile(r"G1 Z([+-]\d{1,3}\.\d{3}) F(\d{1,5})"),
     lambda m: StageMove(float(m[1]), int(m[2]))),
    ("G0 Z", re.compile(r"G0 Z([+-]\d{1,3}\.\d{3})"), lambda m: StageMove(float(m[1]), rapid=True)),
    ("G28", re.compile(r"G28"), lambda m: StageHome()),
]

_REPLY_PATTERNS = [
    ("OK", re.compile(r"(?:OK|ok)"), lambda m: Ack()),
    ("OK P=", re.compile(r"OK P=(\d{1,4}\.\d{2})"), lambda m: PressureReply(float(m[1]))),
    ("OK C=", re.compile(r"OK C=(\d{1,8})"), lambda m: CountsReply(int(m[1]))),
    ("OK F=", re.compile(r"OK F=([+-]\d{1,4}\.\d{4})"), lambda m: ForceReply(float(m[1]))),
    ("ERR ", re.compile(r"ERR (\d{3})(?: (.*))?"), lambda m: ErrorReply(int(m[1]), m[2] or "")),
]


def _parse(data: bytes, patterns, what):
    text = _line(data)
    for _, pattern, build in patterns:
        m = pattern.fullmatch(text)
        if m:
            return build(m)
    # Offset = first byte past the longest literal keyword prefix matched.
    offset = max(len(os.path.commonprefix([text, head])) for head, _, _ in patterns)
    raise FrameError(f"unrecognised {what} {text!r}", offset=offset)


def parse_command(data: bytes) -> Command:
    return _parse(data, _COMMAND_PATTERNS, "command")


def parse_reply(data: bytes) -> Reply:
    return _parse(data, _REPLY_PATTERNS, "reply")
