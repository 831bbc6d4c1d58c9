import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from delayed_psgd import analysis, sets
from delayed_psgd.sets import FeasibleSet

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def vec(d):
    return arrays(np.float64, d, elements=finite)


def test_ball_radial_scaling():
    np.testing.assert_allclose(sets.project(FeasibleSet.l2_ball([0, 0], 1.0), [3, 4]), [0.6, 0.8])


def test_box_clamp():
    fs = FeasibleSet.box([-1, -1], [1, 1])
    np.testing.assert_array_equal(sets.project(fs, [2, -0.5]), [1, -0.5])


def test_simplex_vertex():
    np.testing.assert_allclose(sets.project(FeasibleSet.simplex(3), [2, 0, 0]), [1, 0, 0])


def test_contains_examples():
    assert sets.contains(FeasibleSet.l2_ball([0, 0], 1.0), [0.6, 0.8], 1e-12)
    assert not sets.contains(FeasibleSet.simplex(3), [0.5, 0.5, 0.1], 1e-9)
    assert sets.contains(FeasibleSet.box([0, 0], [1, 1]), [0.5, 0.5], 0.0)


def test_half_infinite_box():
    fs = FeasibleSet.box([0.0, -np.inf], [np.inf, 1.0])
    np.testing.assert_array_equal(sets.project(fs, [-3.0, 7.0]), [0.0, 1.0])
    assert not fs.is_bounded


@pytest.mark.parametrize(
    "bad",
    [
        lambda: FeasibleSet.box([1.0], [0.0]),
        lambda: FeasibleSet.l2_ball([0.0], 0.0),
        lambda: FeasibleSet.simplex(0),
    ],
)
def test_invalid_sets(bad):
    with pytest.raises(ValueError):
        bad()


def test_project_rejects_bad_input():
    fs = FeasibleSet.box([0, 0], [1, 1])
    with pytest.raises(ValueError):
        sets.project(fs, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        sets.project(fs, [np.nan, 0.0])


def test_sample_is_feasible(rng):
    for fs in [FeasibleSet.box([-1, 0], [1, 3]), FeasibleSet.l2_ball([1, 1], 2.0), FeasibleSet.simplex(2)]:
        assert np.all(sets.contains(fs, sets.sample(fs, rng, 500)))
    with pytest.raises(ValueError):
        sets.sample(FeasibleSet.whole_space(2), rng, 3)


def test_extreme_points():
    assert sets.extreme_points(FeasibleSet.box([0, 0, 0], [1, 1, 1])).shape == (8, 3)
    np.testing.assert_array_equal(sets.extreme_points(FeasibleSet.simplex(3)), np.eye(3))


def test_to_dict_roundtrip_equality():
    a = FeasibleSet.box([0.0, -np.inf], [1.0, np.inf])
    assert a.to_dict()["lower"] == [0.0, "-inf"]
    assert a == FeasibleSet.box([0.0, -np.inf], [1.0, np.inf])
    assert hash(a) == hash(FeasibleSet.box([0.0, -np.inf], [1.0, np.inf]))


SETS = [
    FeasibleSet.whole_space(3),
    FeasibleSet.box([-1, -2, 0], [1, 0, 5]),
    FeasibleSet.l2_ball([0.5, -0.5, 1.0], 1.3),
    FeasibleSet.simplex(3),
]


@pytest.mark.parametrize("fs", SETS, ids=lambda f: f.kind)
@given(y=vec(3), w=vec(3))
def test_projection_properties(fs, y, w):
    py, pw = sets.project(fs, y), sets.project(fs, w)
    assert sets.contains(fs, py)
    np.testing.assert_allclose(sets.project(fs, py), py, atol=1e-12)
    assert np.linalg.norm(py - pw) <= np.linalg.norm(y - w) + 1e-9
    # variational inequality against the other projected point
    assert np.dot(y - py, pw - py) <= 1e-9 * max(1.0, np.linalg.norm(y - py))


@given(y=vec(4))
def test_simplex_matches_enumeration(y):
    fs = FeasibleSet.simplex(4)
    np.testing.assert_allclose(sets.project(fs, y), analysis.brute_force_project(fs, y), atol=1e-8)


@given(y=vec(3))
def test_ball_distance(y):
    fs = FeasibleSet.l2_ball([0, 0, 0], 2.0)
    assert sets.distance(fs, y) == pytest.approx(max(0.0, np.linalg.norm(y) - 2.0), abs=1e-9)


def test_batched_projection_matches_rows(rng):
    Y = rng.standard_normal((50, 3)) * 4
    for fs in SETS:
        np.testing.assert_allclose(sets.project(fs, Y), np.stack([sets.project(fs, y) for y in Y]), atol=1e-15)
