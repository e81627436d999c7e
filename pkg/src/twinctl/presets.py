"""Named plant configurations and the synthetic fruit dataset."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .twin import TwinParams
from .units import FruitSample, IndentationCurve

STRESS_TARGET_KPA = 145.89
DRIFT_KPA_PER_CYCLE = -0.0172
# With drift applied at the start of every cycle, the first five cycles sit
# on average 3 drift steps off the setpoint; the seating shift supplies the
# rest of a 0.56 % first-window residual.
SEATING_SHIFT_KPA = -(0.0056 * STRESS_TARGET_KPA + 3 * DRIFT_KPA_PER_CYCLE)

# (day, mean N/mm, SD N/mm, number of samples failing before 5 mm)
DAY_STIFFNESS = ((1, 5.41, 1.36, 1), (5, 3.94, 1.32, 1), (9, 3.89, 1.07, 4))


def ideal_params(**kw) -> TwinParams:
    return TwinParams(**kw)


def stress_drift_params(**kw) -> TwinParams:
    """Plant that leaks slowly over repeated loading."""
    base = dict(drift_kpa_per_cycle=DRIFT_KPA_PER_CYCLE, seating_shift_kpa=SEATING_SHIFT_KPA)
    base.update(kw)
    return TwinParams(**base)


def perturbed_params(fraction: float, **kw) -> TwinParams:
    """Plant whose pressure-stiffness slope deviates by ``fraction``."""
    p = TwinParams(**kw)
    return replace(p, slope_a=p.slope_a * (1.0 + fraction))


def values_with_moments(mean: float, sd: float, n: int = 6) -> np.ndarray:
    """``n`` values whose mean and sample SD are exactly ``mean`` and ``sd``."""
    z = np.linspace(-1.0, 1.0, n) + 0.15 * np.sin(np.arange(n) * 2.0)
    z = (z - z.mean()) / z.std(ddof=1)
    return mean + sd * z


def ripeness_dataset(max_depth: float = 5.0, step: float = 0.1) -> list:
    """Six linear indentation curves per testing day with the listed
    stiffness moments.  Damaged samples peak somewhere past 3 mm and lose
    15 % of their force."""
    samples = []
    d = np.round(np.arange(0.0, max_depth + step / 2, step), 10)
    for day, mean, sd, n_damaged in DAY_STIFFNESS:
        ks = values_with_moments(mean, sd)
        for i, k in enumerate(ks):
            f = k * d
            if i < n_damaged:
                dmg = 3.5 + 0.3 * i
                j = int(np.searchsorted(d, dmg))
                f = f.copy()
                f[j + 1:] = f[j] * 0.85
            samples.append(FruitSample(
                id=f"d{day}-{i + 1}", day=day, curve=IndentationCurve(tuple(d), tuple(f)),
                axial_length=70.0 - 0.5 * i, radial_length=50.0 - 0.3 * i, mass=95.0 - day))
    return samples
