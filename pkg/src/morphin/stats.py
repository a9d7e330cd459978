"""Aggregate statistics over trial populations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


@dataclass(frozen=True)
class WelchResult:
    t_statistic: float
    p_value: float
    dof: float


def mean_and_half_spread(values, confidence: float = 0.95) -> tuple[float | None, float | None]:
    """Mean and the CI half-width expressed as a percentage of the mean.

    Returns ``(None, None)`` for an empty sample and a spread of ``None``
    when it is undefined (single sample or zero mean).
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return None, None
    mean = float(x.mean())
    if x.size < 2 or mean == 0:
        return mean, None
    sem = float(x.std(ddof=1)) / math.sqrt(x.size)
    half = float(sps.t.ppf(0.5 + confidence / 2, x.size - 1)) * sem
    return mean, 100.0 * half / abs(mean)


def welch_ttest(a, b) -> WelchResult | None:
    """Unequal-variance two-sample t-test; None with fewer than two samples per side."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        return None
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    if va + vb == 0:
        # both samples constant: identical means are indistinguishable, different means are certain
        if a.mean() == b.mean():
            return WelchResult(0.0, 1.0, float(a.size + b.size - 2))
        return WelchResult(math.copysign(math.inf, a.mean() - b.mean()), 0.0, float(a.size + b.size - 2))
    res = sps.ttest_ind(a, b, equal_var=False)
    dof = (va + vb) ** 2 / (va**2 / (a.size - 1) + vb**2 / (b.size - 1))
    return WelchResult(float(res.statistic), float(res.pvalue), float(dof))
