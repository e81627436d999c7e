from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twinctl.errors import ActuationLimitError, DegenerateStateError, ModelDomainError, QuantityError
from twinctl.twin import (PLATE_AREA_MM2, TwinParams, TwinState, apply_cycle_drift,
                          chamber_pressure, compressed_pressure, reaction_force,
                          set_baseline_pressure, stiffness_at)


def state(p=100.0, **kw):
    return TwinState(TwinParams(**kw), pressure=p)


@pytest.mark.parametrize("p,k", [(145.89, 3.0), (101.05, 2.0), (123.47, 2.5)])
def test_stiffness_law(p, k):
    assert stiffness_at(state(p)) == pytest.approx(k, abs=1e-12)


def test_stiffness_degenerate():
    with pytest.raises(DegenerateStateError):
        stiffness_at(state(11.37))


@given(st.floats(100.0, 145.89))
def test_stiffness_round_trip(p):
    s = state(p)
    assert s.params.slope_a * stiffness_at(s) + s.params.intercept_b == pytest.approx(p, abs=1e-9)


def test_reaction_force_examples():
    assert reaction_force(state(145.89), 3) == pytest.approx(9.0)
    assert reaction_force(state(123.0), 0) == 0
    assert reaction_force(state(101.05, damage_depth_mm=4.0), 5) == pytest.approx(8.0)


@given(st.floats(0, 20), st.floats(0, 20))
def test_reaction_force_monotone(d1, d2):
    s = state(130.0, damage_depth_mm=6.0)
    lo, hi = sorted((d1, d2))
    assert reaction_force(s, lo) <= reaction_force(s, hi)
    if hi < 6.0:
        assert reaction_force(s, hi) == pytest.approx(float(stiffness_at(s)) * hi, abs=1e-9)


def test_compressed_pressure_examples():
    s = TwinState(TwinParams(chamber_volume_ml=100.0, compression_area_mm2=1000.0), pressure=100.0)
    assert compressed_pressure(s, 0) == 100.0
    assert compressed_pressure(s, 10) == pytest.approx(100 * 100 / 90)
    with pytest.raises(ModelDomainError):
        compressed_pressure(s, 100)
    with pytest.raises(ModelDomainError):
        chamber_pressure(s, 120.0)


@given(st.floats(0, 40), st.floats(0, 40))
def test_compressed_pressure_strictly_increasing(d1, d2):
    s = state(123.47)
    lo, hi = sorted((d1, d2))
    if hi - lo < 1e-6:  # below double resolution of P
        return
    assert compressed_pressure(s, lo) < compressed_pressure(s, hi)


def test_compliance_exponent():
    s = TwinState(TwinParams(chamber_volume_ml=100.0, compression_area_mm2=1000.0,
                             compliance_exponent=1.4), pressure=100.0)
    assert compressed_pressure(s, 10) == pytest.approx(100 * (100 / 90) ** 1.4)


def test_set_baseline_pressure():
    s = replace(state(120.0), compression=2.0)
    assert set_baseline_pressure(s, 100).pressure == 100
    out = set_baseline_pressure(s, 145.89)
    assert out.pressure == 145.89 and out.compression == 0
    with pytest.raises(ActuationLimitError) as ei:
        set_baseline_pressure(s, 146.89)
    assert ei.value.bound == "p_max"
    with pytest.raises(ActuationLimitError) as ei:
        set_baseline_pressure(s, 99)
    assert ei.value.bound == "p_min"


def test_cycle_drift():
    s = state(145.0)
    assert apply_cycle_drift(s).pressure == 145.0
    assert apply_cycle_drift(s).cycle_count == 1
    d = state(100.0, drift_kpa_per_cycle=0.0172)
    for _ in range(50):
        d = apply_cycle_drift(d)
    assert d.cycle_count == 50
    assert d.pressure - 100.0 == pytest.approx(0.86, abs=1e-9)


def test_seating_shift_applies_once():
    d = state(145.0, drift_kpa_per_cycle=-0.01, seating_shift_kpa=-0.5)
    d = apply_cycle_drift(d)
    assert d.pressure == pytest.approx(144.49)
    d = apply_cycle_drift(d)
    assert d.pressure == pytest.approx(144.48)


def test_noise_reproducible():
    s = state(130.0, force_noise_sd_n=0.05)
    a = [reaction_force(s, 2.0, np.random.default_rng(7)) for _ in range(3)]
    b = [reaction_force(s, 2.0, np.random.default_rng(7)) for _ in range(3)]
    assert a == b
    assert reaction_force(s, 2.0) == pytest.approx(float(stiffness_at(s)) * 2)


@pytest.mark.parametrize("kw", [dict(slope_a=0), dict(p_min=150), dict(chamber_volume_ml=0),
                                dict(damage_depth_mm=0), dict(sensor_noise_sd_kpa=-1),
                                dict(intercept_b=float("nan"))])
def test_params_invariants(kw):
    with pytest.raises(QuantityError):
        TwinParams(**kw)


def test_params_from_mapping():
    assert TwinParams.from_mapping({"slope_a": 40}).slope_a == 40
    with pytest.raises(QuantityError):
        TwinParams.from_mapping({"nope": 1})


def test_plate_area():
    assert PLATE_AREA_MM2 == pytest.approx(1885.74, abs=0.01)
