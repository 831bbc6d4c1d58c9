from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from delayed_psgd import schedules as sc
from delayed_psgd.schedules import DecaySchedule, StepSizeSchedule


def test_eta_examples():
    assert sc.eta(StepSizeSchedule.power(1, 0.5), 3) == pytest.approx(0.5)
    assert sc.eta(StepSizeSchedule.constant(0.01), 999) == 0.01
    assert sc.eta(StepSizeSchedule.power(2, 1), 0) == 2.0


def test_p_examples():
    assert sc.p(StepSizeSchedule.power(1, 0.5), 0.5, 7) == pytest.approx(1 / np.sqrt(5))
    s = StepSizeSchedule.power(3, 0.7)
    assert sc.p(s, "1/3", 0) == s(0)
    assert sc.p(StepSizeSchedule.constant(0.2), 0.9, 12345) == 0.2


def test_ratio_limits():
    assert sc.ratio_limit_estimate(StepSizeSchedule.power(1, 0.5), 0.25, 10**6) == pytest.approx(2.0, rel=1e-5)
    assert sc.ratio_limit_estimate(StepSizeSchedule.power(1, 1), 0.5, 10**6) == pytest.approx(2.0, rel=1e-5)
    assert sc.ratio_limit_estimate(StepSizeSchedule.constant(0.3), 0.5, 100) == 1.0


def test_kappa_validation():
    assert sc.as_kappa("1/2") == Fraction(1, 2)
    for bad in (0, 1, 1.5, -0.2, "3/2"):
        with pytest.raises(ValueError, match="0 < kappa < 1"):
            sc.as_kappa(bad)


def test_exact_ceiling_with_fractions():
    # 0.7 * 10 is 7.000000000000001 in floats; the Fraction path stays exact
    assert sc.ceil_kappa_t(Fraction(7, 10), 10) == 7
    np.testing.assert_array_equal(sc.ceil_kappa_t(Fraction(1, 3), np.array([0, 1, 3, 4])), [0, 1, 1, 2])


def test_invalid_schedules():
    with pytest.raises(ValueError):
        StepSizeSchedule.power(1.0, 1.5)
    with pytest.raises(ValueError):
        StepSizeSchedule.constant(0.0)
    with pytest.raises(ValueError):
        StepSizeSchedule.custom([1.0, 2.0])  # not non-increasing


def test_decay_schedule():
    u = DecaySchedule.power(0.1, 0.5)
    assert u(3) == pytest.approx(0.05)
    assert u.scaled(10.0)(3) == pytest.approx(0.5)
    assert DecaySchedule.zero()(5) == 0.0


@given(eta0=st.floats(1e-3, 10), alpha=st.floats(0.01, 1.0), t=st.integers(0, 10**6))
def test_power_schedule_positive_nonincreasing(eta0, alpha, t):
    s = StepSizeSchedule.power(eta0, alpha)
    assert 0 < s(t + 1) <= s(t)


@given(num=st.integers(1, 99), t=st.integers(0, 10**6))
def test_ceil_kappa_bounds(num, t):
    k = Fraction(num, 100)
    c = sc.ceil_kappa_t(k, t)
    assert k * t <= c < k * t + 1 and c <= t
