import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablemcd.depth import (
    DirectionSet,
    default_directions,
    depth_rank_subset,
    project_directions,
    projection_depths,
    sample_directions,
)


def depth_oracle(query, reference, directions):
    # direct evaluation of 1 / (1 + max_u |u'x - med| / MAD)
    out = []
    for x in np.atleast_2d(query):
        worst = 0.0
        for u in directions:
            v = reference @ u
            med = np.median(v)
            mad = np.median(np.abs(v - med))
            num = abs(x @ u - med)
            if mad > 0:
                worst = max(worst, num / mad)
            elif num > 0:
                worst = np.inf
        out.append(1.0 / (1.0 + worst))
    return np.array(out)


def test_default_directions():
    assert default_directions(2) == 1000
    assert default_directions(100) == 1000
    assert default_directions(250) == 2500


def test_sample_directions_unit_norm_and_seeded():
    d = sample_directions(1000, 5, seed=3)
    assert d.k == 1000 and d.q == 5
    np.testing.assert_allclose(np.linalg.norm(d.directions, axis=1), 1.0, atol=1e-12)
    assert np.linalg.norm(d.directions.mean(axis=0)) < 0.1
    np.testing.assert_array_equal(d.directions, sample_directions(1000, 5, seed=3).directions)
    assert not np.array_equal(d.directions, sample_directions(1000, 5, seed=4).directions)


def test_one_dimensional_directions_are_signs():
    d = sample_directions(50, 1, seed=0)
    assert set(np.unique(d.directions)) <= {-1.0, 1.0}
    with pytest.raises(ValueError):
        sample_directions(0, 2)


def test_symmetric_reference_center_has_depth_one():
    ref = np.array([[-2.0, 1.0], [-1.0, -3.0], [0.0, 0.0], [1.0, 3.0], [2.0, -1.0]])
    d = projection_depths(np.zeros(2), ref, sample_directions(200, 2, 1))
    assert d[0] == pytest.approx(1.0)


def test_one_dimensional_example():
    dirs = DirectionSet(np.array([[1.0], [-1.0]]))
    d = projection_depths([[4.0]], np.arange(5.0)[:, None], dirs)
    assert d[0] == pytest.approx(1 / 3)


def test_even_reference_uses_mean_of_middle_values():
    dirs = DirectionSet(np.array([[1.0]]))
    ref = np.array([0.0, 1.0, 3.0, 10.0])[:, None]
    # med = 2, deviations (2, 1, 1, 8) -> MAD = 1.5
    d = projection_depths([[5.0]], ref, dirs)
    assert d[0] == pytest.approx(1 / (1 + 3 / 1.5))


def test_zero_mad_semantics():
    ref = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0], [1.0, 4.0]])
    dirs = DirectionSet(np.array([[1.0, 0.0], [0.0, 1.0]]))
    d = projection_depths(np.array([[1.0, 2.0], [1.5, 2.0], [1.0, 3.0]]), ref, dirs)
    assert d[0] == 1.0
    assert d[1] == 0.0
    assert d[2] == pytest.approx(1 / 2)


def test_matches_loop_oracle(rng):
    ref = rng.standard_normal((31, 3))
    query = rng.standard_normal((12, 3)) * 2
    dirs = sample_directions(300, 3, 5)
    np.testing.assert_allclose(projection_depths(query, ref, dirs), depth_oracle(query, ref, dirs.directions), rtol=1e-12)


def test_decreasing_along_ray_and_dense_oracle(rng):
    ref = rng.standard_normal((50, 2))
    v = np.array([0.6, 0.8])
    ts = np.array([3.0, 4.0, 6.0, 9.0])
    dirs = sample_directions(2000, 2, 11)
    d = projection_depths(ts[:, None] * v, ref, dirs)
    assert np.all(np.diff(d) < 0)
    dense = projection_depths(ts[:, None] * v, ref, sample_directions(100_000, 2, 12))
    # the sampled maximum never exceeds the dense one by more than its resolution
    assert np.all(d >= dense - 1e-12)
    np.testing.assert_allclose(d, dense, rtol=0.02)


def test_nested_direction_sets_never_increase_depth(rng):
    ref = rng.standard_normal((40, 3))
    query = rng.standard_normal((15, 3))
    big = sample_directions(400, 3, 2)
    small = DirectionSet(big.directions[:100])
    assert np.all(projection_depths(query, ref, big) <= projection_depths(query, ref, small))


def test_rigid_invariance(rng):
    ref = rng.standard_normal((25, 3))
    query = rng.standard_normal((6, 3))
    dirs = sample_directions(200, 3, 9)
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    rot = projection_depths(query @ Q.T, ref @ Q.T, DirectionSet(dirs.directions @ Q.T))
    np.testing.assert_allclose(rot, projection_depths(query, ref, dirs), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.integers(1, 4), st.integers(0, 2**31))
def test_depth_range(m, q, seed):
    r = np.random.default_rng(seed)
    ref = np.round(r.standard_normal((m, q)), 1)
    query = np.round(r.standard_normal((5, q)) * 3, 1)
    d = projection_depths(query, ref, sample_directions(50, q, seed))
    assert np.all((d >= 0) & (d <= 1))


def test_depth_rank_subset(rng):
    Z = rng.standard_normal((30, 2))
    dirs = sample_directions(500, 2, 0)
    np.testing.assert_array_equal(depth_rank_subset(Z, 30, dirs), np.arange(30))
    Z[13] = [40.0, 40.0]
    assert 13 not in depth_rank_subset(Z, 29, dirs)
    d = projection_depths(Z, Z, dirs)
    oracle = np.sort(sorted(range(30), key=lambda i: (-d[i], i))[:20])
    np.testing.assert_array_equal(depth_rank_subset(Z, 20, dirs), oracle)


def test_dimension_checks(rng):
    dirs = sample_directions(10, 2, 0)
    with pytest.raises(ValueError):
        project_directions(rng.standard_normal((4, 3)), dirs)
    with pytest.raises(ValueError):
        projection_depths(np.zeros((1, 2)), np.zeros((1, 2)), dirs)
