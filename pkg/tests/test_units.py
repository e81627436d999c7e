import math

import pytest
from hypothesis import given, strategies as st

from twinctl.errors import QuantityError, RangeError
from twinctl.units import (DisplacementMm, ForceN, FruitSample, IndentationCurve, PressureKpa,
                           StiffnessNPerMm, VolumeMl, interpolate_force)


@pytest.mark.parametrize("cls", [PressureKpa, ForceN, DisplacementMm, StiffnessNPerMm, VolumeMl])
@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf, "abc", None])
def test_quantities_reject_non_finite(cls, bad):
    with pytest.raises(QuantityError):
        cls(bad)


def test_bounds():
    assert PressureKpa(0) == 0
    with pytest.raises(QuantityError):
        PressureKpa(-0.01)
    with pytest.raises(QuantityError):
        DisplacementMm(-1)
    with pytest.raises(QuantityError):
        StiffnessNPerMm(0)
    assert ForceN(-2.5) == -2.5
    assert VolumeMl(-3) == -3


def test_arithmetic_yields_plain_float():
    s = PressureKpa(100) + PressureKpa(5)
    assert type(s) is float and s == 105
    assert str(PressureKpa(101.05)) == "101.05 kPa"


@pytest.mark.parametrize("points,d,expected", [
    ([(0, 0), (3, 6)], 3, 6.0),
    ([(0, 0), (3, 6)], 1.5, 3.0),
    ([(0, 0), (2, 4), (4, 12)], 3, 8.0),
])
def test_interpolate_examples(points, d, expected):
    assert interpolate_force(IndentationCurve.from_points(points), d) == pytest.approx(expected, abs=1e-12)


def test_interpolate_out_of_domain_names_domain():
    c = IndentationCurve.from_points([(0.5, 1), (3, 6)])
    with pytest.raises(RangeError) as ei:
        interpolate_force(c, 3.01)
    assert ei.value.domain == (0.5, 3.0)
    with pytest.raises(RangeError):
        interpolate_force(c, 0.0)


curves = st.lists(st.tuples(st.floats(0, 100), st.floats(-50, 50)), min_size=2, max_size=30,
                  unique_by=lambda p: p[0]).map(lambda pts: IndentationCurve.from_points(sorted(pts)))


@given(curves)
def test_interpolate_exact_at_samples(c):
    for d, f in c.points:
        assert interpolate_force(c, d) == f


@given(curves, st.floats(0, 1))
def test_interpolate_bracketed(c, t):
    lo, hi = c.domain
    d = lo + t * (hi - lo)
    f = interpolate_force(c, d)
    i = max(j for j, x in enumerate(c.displacements) if x <= d)
    j = min(i + 1, len(c) - 1)
    a, b = sorted((c.forces[i], c.forces[j]))
    assert a - 1e-9 <= f <= b + 1e-9


@pytest.mark.parametrize("pts", [[(0, 0)], [(1, 0), (1, 2)], [(2, 0), (1, 1)], [(-1, 0), (1, 1)]])
def test_curve_invariants(pts):
    with pytest.raises(QuantityError):
        IndentationCurve.from_points(pts)


def test_curve_length_mismatch():
    with pytest.raises(QuantityError):
        IndentationCurve((0, 1, 2), (0, 1))


def test_fruit_sample_metadata():
    c = IndentationCurve.from_points([(0, 0), (1, 1)])
    assert FruitSample("a", 1, c).mass is None
    with pytest.raises(QuantityError):
        FruitSample("a", 1, c, mass=0)
