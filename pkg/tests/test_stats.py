import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from morphin.harness import TrialRecord, summarize
from morphin.stats import mean_and_half_spread, welch_ttest


def welch_oracle(a, b):
    """Closed-form Welch test with the Student-t tail from mpmath's incomplete beta."""
    mpmath.mp.dps = 50
    a = [mpmath.mpf(float(x)) for x in a]
    b = [mpmath.mpf(float(x)) for x in b]
    na, nb = len(a), len(b)
    ma, mb = sum(a) / na, sum(b) / nb
    va = sum((x - ma) ** 2 for x in a) / (na - 1) / na
    vb = sum((x - mb) ** 2 for x in b) / (nb - 1) / nb
    t = (ma - mb) / mpmath.sqrt(va + vb)
    dof = (va + vb) ** 2 / (va**2 / (na - 1) + vb**2 / (nb - 1))
    p = mpmath.betainc(dof / 2, mpmath.mpf(1) / 2, 0, dof / (dof + t**2), regularized=True)
    return t, p, dof


def test_well_separated_samples_are_significant():
    rng = np.random.default_rng(11)
    a = rng.normal(40_000, 500, 30)
    b = rng.normal(23_000, 500, 30)
    res = welch_ttest(a, b)
    t, p, dof = welch_oracle(a, b)
    assert res.p_value < 1e-10
    assert math.isclose(res.t_statistic, float(t), rel_tol=1e-9)
    assert math.isclose(res.dof, float(dof), rel_tol=1e-9)
    # scipy may underflow to 0 far out in the tail; compare where it is representable
    if res.p_value > 0:
        assert math.isclose(math.log(res.p_value), float(mpmath.log(p)), rel_tol=1e-3)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=15),
    st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=15),
)
def test_welch_matches_closed_form(a, b):
    assume(np.ptp(a) > 1e-3 and np.ptp(b) > 1e-3)
    res = welch_ttest(a, b)
    t, p, dof = welch_oracle(a, b)
    assert 0.0 <= res.p_value <= 1.0
    assert math.isclose(res.t_statistic, float(t), rel_tol=1e-6, abs_tol=1e-9)
    assert math.isclose(res.p_value, float(p), rel_tol=1e-6, abs_tol=1e-12)


def test_identical_populations():
    x = [100.0, 120.0, 90.0, 110.0]
    res = welch_ttest(x, list(x))
    assert res.t_statistic == 0.0 and res.p_value == pytest.approx(1.0)
    assert welch_ttest([5.0, 5.0], [5.0, 5.0]).p_value == 1.0
    assert welch_ttest([5.0, 5.0], [6.0, 6.0]).p_value == 0.0


def test_too_few_samples_is_absent():
    assert welch_ttest([1.0], [1.0, 2.0]) is None


def test_half_spread_against_table_quantile():
    x = np.arange(10, dtype=float)  # mean 4.5, sd sqrt(110/12)
    mean, spread = mean_and_half_spread(x)
    t975_9 = 2.2621571627409915
    half = t975_9 * math.sqrt(110 / 12 / 10)
    assert mean == 4.5
    assert spread == pytest.approx(100 * half / 4.5, rel=1e-9)
    assert mean_and_half_spread([]) == (None, None)
    assert mean_and_half_spread([3.0]) == (3.0, None)


def _record(agent, trial, steps):
    return TrialRecord(agent=agent, trial=trial, seed=0, steps_taken=list(steps))


def test_summarize_identical_populations_gives_unit_ratio():
    recs = [_record("morphin", i, [10 + i, 20]) for i in range(5)]
    twins = [_record("baseline", i, [10 + i, 20]) for i in range(5)]
    s = summarize(recs, twins)
    assert s["efficiency_ratio"] == 1.0
    assert s["welch"]["p_value"] == pytest.approx(1.0)


def test_summarize_requires_equal_trial_counts():
    with pytest.raises(ValueError):
        summarize([_record("morphin", 0, [1])], [])
