import csv

import pytest

from twinctl import presets
from twinctl.calibration import reference_model
from twinctl.devices import open_sim
from twinctl.errors import SchemaVersionError
from twinctl.protocols import (ProtocolSpec, run_calibration_sweep, run_fruit_characterization,
                               run_grasp_feedback, run_stress_test, run_tuning_validation)
from twinctl.report import build_report
from twinctl.runlog import RunLog


def logs():
    m = reference_model()
    yield run_calibration_sweep(open_sim(), ProtocolSpec.make("calibration_sweep", 1))[0]
    yield run_tuning_validation(open_sim(), m, ProtocolSpec.make("tuning_validation", 2))
    yield run_grasp_feedback(open_sim(), m, ProtocolSpec.make("grasp_feedback", 2))
    yield run_stress_test(open_sim(), m, ProtocolSpec.make("stress_test", cycles=10))[0]
    yield run_fruit_characterization(presets.ripeness_dataset())[0]


EXPECTED = {
    "calibration_sweep": ({"calibration_points", "calibration_fit"}, {"calibration_fit"}),
    "tuning_validation": ({"tuning_summary", "tuning_trials"}, {"desired_vs_measured", "mse_rmse"}),
    "grasp_feedback": ({"grasp_pressure"}, {"grasp_pressure"}),
    "stress_test": ({"drift", "stress_trace"}, {"stress_force", "stress_pressure"}),
    "fruit_characterization": ({"batch_stats", "fruit_samples"}, {"fruit_curves"}),
}


@pytest.mark.parametrize("rl", list(logs()), ids=lambda r: r.kind)
def test_bundle_contents_and_byte_identity(rl, tmp_path):
    stored = RunLog.from_text(rl.to_text())
    a = build_report(stored, tmp_path / "a")
    b = build_report(RunLog.from_text(rl.to_text()), tmp_path / "b")
    tables, plots = EXPECTED[rl.kind]
    assert set(a.tables) == tables and set(a.plots) == plots
    for name in list(a.tables) + list(a.plots):
        pa = a.tables.get(name) if name in a.tables else a.plots[name]
        pb = b.tables.get(name) if name in b.tables else b.plots[name]
        assert pa.read_bytes() == pb.read_bytes(), name
    for path in a.plots.values():
        head = path.read_bytes()[:200]
        assert b"<svg" in path.read_bytes() and b"<?xml" in head
    for path in a.tables.values():
        rows = list(csv.reader(path.open()))
        assert len(rows) >= 2


def test_tuning_tables_match_derived(tmp_path):
    rl = run_tuning_validation(open_sim(), reference_model(), ProtocolSpec.make("tuning_validation", 3))
    b = build_report(RunLog.from_text(rl.to_text()), tmp_path)
    rows = list(csv.DictReader(b.tables["tuning_summary"].open()))
    assert [float(r["setpoint"]) for r in rows] == pytest.approx([101.05, 123.47, 145.89])
    assert len(list(csv.DictReader(b.tables["tuning_trials"].open()))) == 9


def test_unknown_kind(tmp_path):
    with pytest.raises(SchemaVersionError):
        build_report(RunLog("mystery", {}, "sim", "sha256:0"), tmp_path)
