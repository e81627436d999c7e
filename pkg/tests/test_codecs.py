import numpy as np
import pytest
from hypothesis import given, strategies as st

from twinctl.devices import wire
from twinctl.devices.adc import (AdcTransfer, decode_pressure, encode_pressure,
                                 pump_steps_for_volume)
from twinctl.errors import CodecError, FrameError, QuantityError

SPAN = AdcTransfer.spanning(16, (100.0, 400.0))


def test_identity_transfer_endpoints():
    t = AdcTransfer(bits=16, v_ref=1.0, gain_v_per_kpa=1 / 400, offset_v=0.0, p_range=(100, 400))
    assert decode_pressure(0, t) == (100.0, True)
    p, sat = decode_pressure(t.max_counts, t)
    assert p == pytest.approx(400.0) and not sat


def test_round_trip_145_89():
    p, _ = decode_pressure(encode_pressure(145.89, SPAN), SPAN)
    assert SPAN.lsb_kpa == pytest.approx(300 / 65535)
    assert abs(p - 145.89) <= SPAN.lsb_kpa / 2 + 1e-12


def test_encode_endpoints_and_midpoint():
    assert encode_pressure(100.0, SPAN) == 0
    assert encode_pressure(400.0, SPAN) == SPAN.max_counts
    assert abs(encode_pressure(250.0, SPAN) - SPAN.max_counts / 2) <= 0.5


@pytest.mark.parametrize("bits", [12, 16, 24])
@given(frac=st.floats(0, 1))
def test_half_lsb(bits, frac):
    for t in (AdcTransfer.spanning(bits), AdcTransfer(bits=bits)):
        lo, hi = t.p_range
        p = lo + frac * (hi - lo)
        got, _ = decode_pressure(encode_pressure(p, t), t)
        assert abs(got - p) <= t.lsb_kpa / 2 * (1 + 1e-9)


def test_codec_errors():
    with pytest.raises(CodecError):
        decode_pressure(-1, SPAN)
    with pytest.raises(CodecError):
        decode_pressure(1 << 16, SPAN)
    with pytest.raises(CodecError):
        decode_pressure(1.5, SPAN)
    with pytest.raises(CodecError):
        encode_pressure(99.0, SPAN)
    with pytest.raises(QuantityError):
        AdcTransfer(bits=10)
    with pytest.raises(QuantityError):
        AdcTransfer(p_range=(50, 400))


def test_pump_steps():
    assert pump_steps_for_volume(1, 800) == 800
    assert pump_steps_for_volume(-0.5, 800) == -400
    assert pump_steps_for_volume(0.00124, 800) == 1
    with pytest.raises(QuantityError):
        pump_steps_for_volume(1, 0)


# -- wire ---------------------------------------------------------------------

def test_frame_examples():
    assert wire.frame_command(wire.PumpMove(800)) == b"PMP +00800\n"
    assert wire.frame_command(wire.PumpMove(-5)) == b"PMP -00005\n"
    assert wire.frame_command(wire.GripperClose(4)) == b"GRP C004.0\n"
    assert wire.frame_command(wire.StageMove(-3, 5)) == b"G1 Z-3.000 F5\n"
    assert wire.frame_command(wire.StageMove(0.0, rapid=True)) == b"G0 Z+0.000\n"
    assert wire.frame_command(wire.StageHome()) == b"G28\n"
    assert wire.parse_reply(b"OK P=123.47\n") == wire.PressureReply(123.47)
    assert wire.parse_reply(b"OK\n") == wire.Ack()
    assert wire.parse_reply(b"ERR 030 soft limit\n") == wire.ErrorReply(30, "soft limit")


commands = st.one_of(
    st.integers(-99999, 99999).map(wire.PumpMove),
    st.just(wire.PumpZero()), st.just(wire.PressureQuery()), st.just(wire.AdcQuery()),
    st.just(wire.ForceQuery()), st.just(wire.GripperOpen()), st.just(wire.StageHome()),
    st.floats(0, 999.9).map(wire.GripperClose),
    st.builds(wire.StageMove, st.floats(-999.999, 999.999), st.integers(1, 99999)),
    st.floats(-999.999, 999.999).map(lambda z: wire.StageMove(z, rapid=True)),
)
replies = st.one_of(
    st.just(wire.Ack()),
    st.floats(0, 9999.99).map(wire.PressureReply),
    st.integers(0, (1 << 24) - 1).map(wire.CountsReply),
    st.floats(-9999.9999, 9999.9999).map(wire.ForceReply),
    st.builds(wire.ErrorReply, st.integers(0, 999),
              st.text(st.characters(min_codepoint=32, max_codepoint=126), max_size=40)),
)


@given(commands)
def test_command_round_trip(cmd):
    data = wire.frame_command(cmd)
    assert len(data) <= wire.MAX_FRAME
    assert wire.parse_command(data) == cmd


@given(replies)
def test_reply_round_trip(rep):
    assert wire.parse_reply(wire.frame_reply(rep)) == rep


@pytest.mark.parametrize("data,offset", [
    (b"PMP +0080x\n", 4),
    (b"PXP\n", 1),
    (b"GRP C4.0\n", 5),
    (b"G1 Z-3.000\n", 4),
    (b"PMP +00800", 10),
    (b"PM\x01P\n", 2),
    (b"G28" + b" " * 70 + b"\n", 64),
])
def test_malformed_command_offsets(data, offset):
    with pytest.raises(FrameError) as ei:
        wire.parse_command(data)
    assert ei.value.offset == offset


def test_malformed_reply():
    with pytest.raises(FrameError):
        wire.parse_reply(b"OK P=12.3\n")
    with pytest.raises(FrameError):
        wire.parse_reply(b"NOPE\n")


def test_command_value_validation():
    with pytest.raises(FrameError):
        wire.PumpMove(100000)
    with pytest.raises(FrameError):
        wire.PumpMove(1.5)
    with pytest.raises(FrameError):
        wire.StageMove(0.0, 0)
    with pytest.raises(FrameError):
        wire.ErrorReply(1, "two\nlines")
