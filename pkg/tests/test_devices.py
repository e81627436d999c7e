import pytest

from twinctl.devices import DeviceConfig, SimConfig, open_serial, open_sim, wire
from twinctl.devices.emulator import FirmwareEmulator, LoopbackTransport
from twinctl.devices.serial import SerialLink
from twinctl.devices.sim import SimBench
from twinctl.errors import (ActuationLimitError, DeviceReplyError, DeviceTimeoutError,
                            QuantityError)
from twinctl.twin import TwinParams


def serial_rig(seed=0, drop=(), **sim_kw):
    cfg = DeviceConfig()
    bench = SimBench(TwinParams(), SimConfig(**sim_kw), cfg, seed)
    transports = {}

    def factory(path):
        transports[path] = LoopbackTransport(FirmwareEmulator(bench), drop)
        return transports[path]

    dev = open_serial(cfg, transport_factory=factory, clock=bench.clock)
    dev.bench = bench
    return dev, bench, transports


def test_sim_pump_meters_atmospheric_air(sim):
    sim.pump.move_volume(0.95)
    assert sim.pressure.read_pressure() == pytest.approx(101.0)
    assert sim.pump.dispensed_ml == pytest.approx(0.95)
    sim.pump.move_volume(-0.95)
    assert sim.pump.dispensed_ml == pytest.approx(0.0)


def test_pump_capacity_per_move(sim):
    with pytest.raises(ActuationLimitError) as ei:
        sim.pump.move_volume(60.5)
    assert ei.value.bound == "capacity"
    with pytest.raises(ActuationLimitError):
        sim.pump.move_volume(50.0)  # ~152.6 kPa: past the overpressure guard


def test_stage_limits_and_cumulative_position(sim):
    moves = [0.05] * 37 + [1.25, -0.3, 2.0] + [-0.05] * 11
    for m in moves:
        sim.stage.move_z_relative(m, 5.0)
    assert abs(sim.stage.position - sum(moves)) <= 1e-9
    assert abs(sim.bench.stage_position - sim.stage.position) <= 1e-9
    with pytest.raises(ActuationLimitError) as ei:
        sim.stage.move_z_relative(100.0, 5.0)
    assert ei.value.bound == "travel"
    with pytest.raises(ActuationLimitError):
        sim.stage.move_z_relative(1.0, 0.0)
    sim.stage.home()
    assert sim.stage.position == 0.0


def test_gripper_stroke(sim):
    sim.gripper.close_by(4.0)
    assert sim.gripper.aperture == pytest.approx(46.0)
    assert sim.bench.gripper_compression == 0.0
    sim.gripper.close_by(1.0)
    assert sim.bench.gripper_compression == pytest.approx(1.0)
    with pytest.raises(ActuationLimitError):
        sim.gripper.close_by(60.0)
    with pytest.raises(ActuationLimitError):
        sim.gripper.close_by(-1.0)
    sim.gripper.open_full()
    assert sim.gripper.aperture == 50.0


def test_force_reads_after_contact(sim):
    assert sim.force.read_force() == 0.0
    sim.stage.move_z_relative(1.0 + 2.0, 5.0)   # 1 mm gap then 2 mm into the twin
    k = (100.0 - 11.37) / 44.84
    assert sim.force.read_force() == pytest.approx(2 * k)


def test_sim_reads_reproducible():
    p = TwinParams(sensor_noise_sd_kpa=0.1, force_noise_sd_n=0.05)
    a, b = open_sim(p, seed=3), open_sim(p, seed=3)
    ra = [(a.pressure.read_pressure(), a.force.read_force()) for _ in range(20)]
    rb = [(b.pressure.read_pressure(), b.force.read_force()) for _ in range(20)]
    assert ra == rb
    c = open_sim(p, seed=4)
    assert [c.pressure.read_pressure() for _ in range(20)] != [x[0] for x in ra]


def test_quantized_sim_reads_whole_counts():
    dev = open_sim(sim=SimConfig(quantize=True))
    counts = dev.pressure.read_counts()
    assert isinstance(counts, int)
    assert abs(dev.pressure.read_pressure() - 100.0) <= dev.pressure.transfer.lsb_kpa / 2 + 1e-12


def test_sim_clock_monotonic(sim):
    t0 = sim.clock.now()
    sim.pressure.read_pressure()
    sim.stage.move_z_relative(1.0, 5.0)
    assert sim.clock.now() > t0


def test_unknown_tool(sim):
    with pytest.raises(QuantityError):
        sim.mount_tool("spoon")


# -- serial backend against the emulator ----------------------------------------

def test_serial_stack_frames():
    dev, bench, tr = serial_rig()
    dev.pump.move_volume(1.0)
    dev.stage.move_z_relative(2.0, 5.0)
    dev.gripper.close_by(4.0)
    assert tr["/dev/ttyACM0"].written[0] == b"PMP +00800\n"
    assert tr["/dev/ttyUSB0"].written[-1] == b"G1 Z-2.000 F5\n"
    assert tr["/dev/ttyUSB2"].written[-1] == b"GRP C004.0\n"
    assert bench.stage_position == 2.0
    expected = 100.0 + 100.0 * 1.0 / 95.0
    assert bench.state.pressure == pytest.approx(expected)
    true = float(bench.true_pressure())   # 1 mm of indenter compression past the gap
    assert true > expected
    assert abs(dev.pressure.read_pressure() - true) <= dev.pressure.transfer.lsb_kpa / 2 + 1e-9
    assert dev.pressure.read_reported() == pytest.approx(true, abs=0.005)


def test_serial_pump_chunks_large_moves():
    dev, _, tr = serial_rig()
    dev.pump.capacity_ml = 200
    dev.bench.sim = SimConfig(overpressure_margin_kpa=1000)
    dev.pump.move_volume(150.0)   # 120000 steps
    assert tr["/dev/ttyACM0"].written == [b"PMP +99999\n", b"PMP +20001\n"]


def test_serial_retry_then_timeout():
    dev, _, tr = serial_rig(drop=(1,))
    dev.force.read_force()
    assert tr["/dev/ttyUSB1"].written == [b"FRC?\n", b"FRC?\n"]
    dev, _, _ = serial_rig(drop=(1, 2))
    with pytest.raises(DeviceTimeoutError):
        dev.force.read_force()


def test_serial_device_error_reply():
    dev, _, _ = serial_rig()
    link = dev.gripper.link
    with pytest.raises(DeviceReplyError, match="020"):
        link.transact(wire.GripperClose(80.0), wire.Ack)


def test_serial_unexpected_reply_type():
    class Fixed:
        def write(self, data):
            pass

        def readline(self):
            return b"OK\n"

    with pytest.raises(DeviceReplyError):
        SerialLink(Fixed()).transact(wire.ForceQuery(), wire.ForceReply)


def test_shared_port_shares_link():
    dev, _, _ = serial_rig()
    assert dev.pump.link is dev.pressure.link
    assert dev.stage.link is not dev.pump.link


def test_device_config_mapping_round_trip():
    cfg = DeviceConfig(steps_per_ml=400)
    assert DeviceConfig.from_mapping(cfg.to_mapping()) == cfg
