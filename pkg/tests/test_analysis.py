import numpy as np
import pytest
from hypothesis import given, strategies as st

from twinctl.analysis import (batch_stats, detect_damage_point, drift_report, estimate_stiffness,
                              find_minima, find_peaks, summarize)
from twinctl.errors import DamagePrecededError, ShapeError
from twinctl.units import FruitSample, IndentationCurve


def brute_peaks(x):
    """Oracle: scan outward from every index for the nearest differing values."""
    out = []
    n = len(x)
    for i in range(1, n - 1):
        if x[i - 1] == x[i]:
            continue                      # not the first index of its run
        left = x[i - 1]
        right = None
        for j in range(i + 1, n):
            if x[j] != x[i]:
                right = x[j]
                break
        if right is not None and left < x[i] and right < x[i]:
            out.append(i)
    return out


signals = st.lists(st.integers(-3, 3), min_size=3, max_size=200)


@given(signals)
def test_peaks_match_oracle(x):
    assert find_peaks(x) == brute_peaks(x)
    assert find_minima(x) == brute_peaks([-v for v in x])


@given(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=100))
def test_minima_duality(x):
    assert find_peaks(x) == find_minima([-v for v in x])


@given(signals)
def test_constant_padding_keeps_interior_peaks(x):
    if x[0] == x[1] or x[-1] == x[-2]:
        return
    low = min(x) - 1
    padded = [low, low] + x + [low]
    interior = [i - 2 for i in find_peaks(padded) if 0 < i - 2 < len(x) - 1]
    assert interior == find_peaks(x)


@pytest.mark.parametrize("x,peaks,minima", [
    ([0, 1, 0, 2, 0], [1, 3], [2]),
    ([0, 1, 2, 3], [], []),
    ([1, 0, 1], [], [1]),
    ([0, 2, 2, 2, 1], [1], []),
    ([0, 2, 2, 3, 1], [3], []),
    ([0, 1, 1], [], []),
])
def test_peak_examples(x, peaks, minima):
    assert find_peaks(x) == peaks
    assert find_minima(x) == minima


def test_peaks_short_signal():
    with pytest.raises(ShapeError):
        find_peaks([1, 2])


def curve(pairs):
    return IndentationCurve.from_points(pairs)


def test_damage_examples():
    assert detect_damage_point(curve([(d, 2 * d) for d in range(6)])) is None
    c = curve([(0, 0), (1, 3), (2, 6), (3, 8), (4, 10), (5, 9)])
    assert detect_damage_point(c, 0.05) == (4, 10)
    assert detect_damage_point(curve([(0, 0), (1, 5), (2, 5), (3, 5)])) is None


def test_damage_needs_full_drop_before_recovery():
    c = curve([(0, 0), (1, 10), (2, 9.8), (3, 11), (4, 9)])
    assert detect_damage_point(c, 0.05) == (3, 11)
    assert detect_damage_point(c, 0.01) == (1, 10)


def test_damage_plateau_then_drop_reports_plateau_start():
    c = curve([(0, 0), (1, 10), (2, 10), (3, 8)])
    assert detect_damage_point(c) == (1, 10)


def test_estimate_stiffness():
    lin = curve([(d / 10, 5.41 * d / 10) for d in range(51)])
    assert estimate_stiffness(lin, 3.0).k == pytest.approx(5.41, abs=1e-9)
    assert estimate_stiffness(curve([(0, 0), (5, 10)]), 3).k == pytest.approx(2.0)
    dmg = curve([(0, 0), (1, 2), (2, 4), (2.5, 5), (3, 4.5), (4, 5.5)])
    with pytest.raises(DamagePrecededError) as ei:
        estimate_stiffness(dmg, 3.0, sample_id="k7")
    assert ei.value.sample_id == "k7" and ei.value.damage == (2.5, 5)


@given(st.floats(0.5, 10), st.floats(0.01, 5))
def test_estimate_linear_any_depth(k, depth):
    c = curve([(0, 0), (5, 5 * k)])
    assert estimate_stiffness(c, depth).k == pytest.approx(k, rel=1e-9)


@given(st.lists(st.floats(0.5, 10), min_size=2, max_size=30))
def test_summarize_two_pass(ks):
    s = summarize(1, ks)
    mean = sum(ks) / len(ks)
    var = sum((k - mean) ** 2 for k in ks) / (len(ks) - 1)
    assert s.mean_k == pytest.approx(mean, abs=1e-12)
    assert s.std_k == pytest.approx(var ** 0.5, abs=1e-12)


def test_batch_stats_grouping_and_single():
    def fs(i, day, k):
        return FruitSample(f"s{i}", day, curve([(0, 0), (5, 5 * k)]))
    stats = batch_stats([fs(0, 5, 2), fs(1, 1, 4), fs(2, 5, 3)], 3)
    assert [s.day for s in stats] == [1, 5]
    assert stats[0].single and stats[0].std_k == 0
    assert stats[1].mean_k == pytest.approx(2.5)
    assert stats[1].std_k == pytest.approx(np.std([2, 3], ddof=1))


def periodic(n_cycles, per=20, base=145.89, amp=16.0):
    f, p, c = [], [], []
    for cy in range(n_cycles):
        for i in range(per):
            phase = i + 1 if i < per // 2 else per - i - 1
            f.append(1.5 * phase)
            p.append(base + amp * phase / (per // 2))
            c.append(cy)
    return [0.0] + f, [base] + p, [-1] + c


def test_drift_periodic_is_zero():
    f, p, c = periodic(12)
    r = drift_report(f, p, c, 145.89)
    assert (r.force_peak_diff, r.pressure_peak_diff, r.residual_pct_first, r.residual_pct_last) == (0, 0, 0, 0)
    assert len(r.peaks_first) == 5 and len(r.minima_last) == 5


def test_drift_known_offset():
    f, p, c = periodic(10)
    p = [x - 0.1 * max(cy, 0) for x, cy in zip(p, c)]
    r = drift_report(f, p, c, 145.89)
    assert r.pressure_peak_diff == pytest.approx(0.5)
    assert r.residual_pct_first == pytest.approx(100 * 0.2 / 145.89)
    assert r.residual_pct_last == pytest.approx(100 * 0.7 / 145.89)


def test_drift_insufficient_cycles():
    f, p, c = periodic(9)
    with pytest.raises(ShapeError):
        drift_report(f, p, c, 145.89)
