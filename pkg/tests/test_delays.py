from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from delayed_psgd import delays as dl
from delayed_psgd.delays import BufferState, DelayModel
from delayed_psgd.schedules import ceil_kappa_t

MODELS = [
    DelayModel("zero", "1/2"),
    DelayModel("fixed", "1/2", D=3),
    DelayModel("uniform-scaled", "1/2", D_max=10),
    DelayModel("geometric-scaled", 0.3, mean=5.0),
    DelayModel("geometric-scaled", "2/3", mean=2.0, cap_by_kappa=True),
]


@pytest.mark.parametrize("m", MODELS, ids=lambda m: m.kind)
def test_t_zero_only_feasible(m, rng):
    assert dl.sample_tau(m, 0, 0, rng) == 0


def test_uniform_window_frequencies(rng):
    m = DelayModel("uniform-scaled", "1/2", D_max=10)
    k, pk = dl.delay_pmf(m, 10)
    np.testing.assert_array_equal(10 - k, [10, 9, 8, 7, 6, 5])
    np.testing.assert_allclose(pk, 1 / 6)
    taus = dl.sample_taus(m, 10, rng, 600_000)
    assert set(np.unique(taus)) == {5, 6, 7, 8, 9, 10}
    freq = np.bincount(taus - 5) / taus.size
    assert np.all(np.abs(freq - 1 / 6) <= 4 * np.sqrt((1 / 6) * (5 / 6) / taus.size))


def test_fixed_delay(rng):
    assert dl.sample_tau(DelayModel("fixed", 0.5, D=3), 0, 100, rng) == 97


def test_second_moment_examples():
    # uniform over {0, 1, 2}: (0 + 1 + 4) / 3
    assert dl.exact_delay_second_moment(DelayModel("uniform-scaled", "1/2", D_max=2), 50) == pytest.approx(5 / 3)
    assert dl.exact_delay_second_moment(DelayModel("zero", 0.5), 1234) == 0.0
    for t in (6, 7, 100):
        assert dl.exact_delay_second_moment(DelayModel("fixed", 0.5, D=3), t) == 9.0


def test_default_C_certifies_every_t():
    for m in MODELS:
        worst = max(dl.exact_delay_second_moment(m, t) for t in range(3000))
        assert worst <= m.C * (1 + 1e-12)


def test_geometric_pmf_matches_samples(rng):
    for m in MODELS[3:]:
        k, pk = dl.delay_pmf(m, 40)
        assert pk.sum() == pytest.approx(1.0)
        taus = dl.sample_taus(m, 40, rng, 400_000)
        freq = np.bincount(40 - taus, minlength=k.size)[: k.size] / taus.size
        assert np.all(np.abs(freq - pk) <= 4 * np.sqrt(pk * (1 - pk) / taus.size) + 1e-12)


def test_buffer_examples():
    b = BufferState(1)
    assert dl.buffered_tau(b, 0, 3) == -1
    b.push(0, 2, 4)
    b.push(0, 5, 7)
    assert dl.buffered_tau(b, 0, 7) == 5
    with pytest.raises(ValueError):
        dl.buffered_tau(b, 0, 6)
    with pytest.raises(ValueError):
        b.push(0, 9, 9)


def test_zero_transit_gives_previous_tick():
    b = BufferState(1, Fraction(1, 2))
    for t in range(20):
        b.push(0, t, t + 1)
        assert dl.buffered_tau(b, 0, t) == t - 1


def test_deadline_enforced_under_long_transit():
    b = BufferState(1, Fraction(1, 2))
    for t in range(200):
        b.push(0, t, t + 1000)
        tau = dl.buffered_tau(b, 0, t)
        if t >= 2:
            assert ceil_kappa_t(Fraction(1, 2), t) <= tau <= t - 1


def test_invalid_models():
    with pytest.raises(ValueError):
        DelayModel("fixed", 0.5, D=-1)
    with pytest.raises(ValueError, match="0 < kappa < 1"):
        DelayModel("zero", 1.5)
    with pytest.raises(ValueError):
        DelayModel("uniform-scaled", 0.5, D_max=2, second_moment_C=0.0)


@pytest.mark.parametrize("m", MODELS, ids=lambda m: m.kind)
@given(t=st.integers(0, 10**7), seed=st.integers(0, 2**32 - 1))
def test_hard_bound(m, t, seed):
    taus = dl.sample_taus(m, t, np.random.default_rng(seed), 16)
    assert np.all(taus >= ceil_kappa_t(m.kappa, t)) and np.all(taus <= t)
