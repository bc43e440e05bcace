import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablemcd.exceptions import DegenerateCorrectionError, PairFailure
from stablemcd.stability import (
    DEFAULT_H_GRID,
    InstabilityCell,
    InstabilityPath,
    bootstrap_pair_distance,
    clustering_distance,
    clustering_distance_pairwise,
    corrected_clustering_distance,
    corrected_probability_distance,
    correction_c,
    correction_c_prime,
    grid_search,
    h_from_fraction,
    instability,
    pair_seed_sequence,
    probability_distance,
    resample_indices,
)

maps = st.integers(1, 60).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 1), min_size=n, max_size=n),
                        st.lists(st.integers(0, 1), min_size=n, max_size=n))
)


def test_probability_distance_examples():
    a = np.array([0, 1, 1, 0, 0, 1, 0, 0, 1, 1])
    assert probability_distance(a, a) == 0.0
    assert probability_distance(a, 1 - a) == 1.0
    b = a.copy()
    b[[0, 4, 7]] ^= 1
    assert probability_distance(a, b) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        probability_distance([0, 1], [0, 1, 1])
    with pytest.raises(ValueError):
        probability_distance([0, 2], [0, 1])


def test_clustering_distance_examples():
    a = np.array([0, 1, 0, 1])
    assert clustering_distance(a, a) == 0.0
    assert clustering_distance(a, [0, 0, 0, 0][:2] + [1, 1]) == pytest.approx(0.5)


@settings(max_examples=300, deadline=None)
@given(maps)
def test_distance_identity_and_symmetries(pair):
    a, b = (np.array(x) for x in pair)
    d = clustering_distance(a, b)
    assert d == pytest.approx(clustering_distance_pairwise(a, b), abs=1e-12)
    assert d == clustering_distance(b, a)
    assert d == pytest.approx(clustering_distance(1 - a, 1 - b), abs=1e-15)
    assert 0.0 <= d <= 0.5
    assert 0.0 <= probability_distance(a, b) <= 1.0


def test_corrections():
    assert correction_c(100, 50) == pytest.approx(0.5)
    for n in range(4, 120):
        for h in range(1, n):
            assert abs(correction_c(n, h) - (1 - correction_c_prime(n, h))) <= 3 / n
    assert abs(correction_c(200, 150) - (1 - correction_c_prime(200, 150))) < 0.01


def test_corrected_distances():
    n, h = 40, 30
    a = np.zeros(n, dtype=int)
    a[h:] = 1
    assert corrected_clustering_distance(a, a, h) == -1.0
    assert corrected_probability_distance(a, a, h) == 0.0
    # at p = c the corrected probability distance is 1
    b = a.copy()
    flips = int(round(correction_c(n, h) * n))
    b[:flips] ^= 1
    assert corrected_probability_distance(a, b, h) == pytest.approx(flips / n / correction_c(n, h))
    with pytest.raises(DegenerateCorrectionError):
        corrected_clustering_distance(a, a, n)
    with pytest.raises(DegenerateCorrectionError):
        corrected_probability_distance(a, a, 0)
    with pytest.raises(DegenerateCorrectionError):
        corrected_clustering_distance([0, 1], [1, 0], 1)


def test_corrected_distance_null_point():
    # maps whose clustering distance equals 2c'(1 - c') score 0
    n, h = 10, 5
    cp = correction_c_prime(n, h)
    target = 2 * cp * (1 - cp)
    a = np.array([0] * 5 + [1] * 5)
    for k in range(n + 1):
        b = a.copy()
        b[:k] ^= 1
        if abs(clustering_distance(a, b) - target) < 1e-15:
            assert corrected_clustering_distance(a, b, h) == pytest.approx(0.0, abs=1e-12)


def test_random_subsets_average_to_one(rng):
    n, h = 400, 300
    vals = []
    for _ in range(400):
        a = np.ones(n, dtype=int)
        b = np.ones(n, dtype=int)
        a[rng.choice(n, h, replace=False)] = 0
        b[rng.choice(n, h, replace=False)] = 0
        vals.append(corrected_probability_distance(a, b, h))
    assert np.mean(vals) == pytest.approx(1.0, abs=0.02)


def test_h_from_fraction():
    assert [h_from_fraction(f, 120) for f in DEFAULT_H_GRID] == [60, 66, 72, 78, 84, 90, 96, 102, 108, 114]
    assert h_from_fraction(0.7, 10) == 7
    assert h_from_fraction(0.15 * 2, 100) == 30
    with pytest.raises(ValueError):
        h_from_fraction(1.0, 10)


def test_resample_indices_seeded():
    ss = pair_seed_sequence(5, 3)
    a = resample_indices(50, ss, 0)
    np.testing.assert_array_equal(a, resample_indices(50, pair_seed_sequence(5, 3), 0))
    assert not np.array_equal(a, resample_indices(50, ss, 1))
    assert a.size == 50 and np.all(np.diff(a) >= 0) and a.max() < 50


@pytest.fixture(scope="module")
def clusters():
    r = np.random.default_rng(11)
    X = r.standard_normal((100, 2))
    X[80:] += np.array([12.0, -9.0])
    return X


def test_pair_distance_deterministic(clusters):
    d1 = bootstrap_pair_distance(clusters, 80, 2, pair_seed=pair_seed_sequence(0, 4))
    d2 = bootstrap_pair_distance(clusters, 80, 2, pair_seed=pair_seed_sequence(0, 4))
    assert d1 == d2
    assert -1.0 <= d1


def test_stable_at_correct_h(clusters):
    path = grid_search(clusters, h_grid=(0.5, 0.8), q_grid=(2,), B=50, master_seed=1)
    s_half, s_right = (c.s_hat for c in path.path(2))
    assert s_right < -0.8
    assert s_right < s_half
    assert path.argmin == (80, 2)


def test_instability_cell_against_pairs(clusters):
    cell = instability(clusters, 80, 2, B=3, master_seed=9)
    pairs = [bootstrap_pair_distance(clusters, 80, 2, pair_seed=pair_seed_sequence(9, b)) for b in range(3)]
    np.testing.assert_array_equal(cell.distances, pairs)
    assert cell.s_hat == pytest.approx(np.mean(pairs), abs=1e-12)
    assert cell.std_err == pytest.approx(np.std(pairs, ddof=1) / math.sqrt(3))
    one = instability(clusters, 80, 2, B=1, master_seed=9)
    assert one.s_hat == pairs[0] and one.std_err == 0.0 and one.n_pairs == 1


def test_single_cell_grid_matches_instability(clusters):
    path = grid_search(clusters, h_grid=(0.8,), q_grid=(2,), B=4, master_seed=3)
    cell = instability(clusters, 80, 2, B=4, master_seed=3)
    np.testing.assert_array_equal(path.cells[0].distances, cell.distances)


def test_grid_recycling_matches_direct_cells(clusters):
    path = grid_search(clusters, h_grid=(0.6, 0.8, 0.9), q_grid=(1, 2), B=3, master_seed=2)
    for c in path.cells:
        direct = [bootstrap_pair_distance(clusters, c.h, c.q, pair_seed=pair_seed_sequence(2, b)) for b in range(3)]
        np.testing.assert_array_equal(c.distances, direct)


def test_workers_do_not_change_results(clusters):
    a = grid_search(clusters, h_grid=(0.7, 0.8), q_grid=(1, 2), B=4, master_seed=8, workers=1)
    b = grid_search(clusters, h_grid=(0.7, 0.8), q_grid=(1, 2), B=4, master_seed=8, workers=2)
    for ca, cb in zip(a.cells, b.cells):
        np.testing.assert_array_equal(ca.distances, cb.distances)


def test_argmin_tie_rule():
    def cell(h, q, s):
        return InstabilityCell(h, q, np.array([s]), h / 100)

    path = InstabilityPath([cell(60, 2, -1.0), cell(80, 2, -1.0), cell(80, 1, -1.0), cell(90, 2, -0.5)], 1, 0, 100)
    assert path.argmin == (80, 1)
    assert path.argmin_cell.h == 80
    assert [c.h for c in path.path(2)] == [60, 80, 90]
    with pytest.raises(KeyError):
        path.cell(70, 2)
    empty = InstabilityPath([InstabilityCell(50, 2, np.array([np.nan]), 0.5)], 1, 0, 100)
    assert empty.argmin is None


def test_failures_abort_or_skip():
    # rank-one data: every q = 2 fit is singular
    X = np.zeros((30, 3))
    X[:, 0] = np.arange(30.0)
    with pytest.raises(PairFailure, match="q=2"):
        grid_search(X, h_grid=(0.8,), q_grid=(2,), B=2)
    path = grid_search(X, h_grid=(0.8,), q_grid=(1, 2), B=2, on_error="skip")
    bad = path.cell(24, 2)
    assert bad.failed_pairs == [0, 1] and math.isnan(bad.s_hat) and bad.n_pairs == 0
    assert path.argmin == (24, 1)


def test_grid_validation(clusters):
    with pytest.raises(ValueError):
        grid_search(clusters, h_grid=(1.2,))
    with pytest.raises(ValueError):
        grid_search(clusters, q_grid=(3,))
    with pytest.raises(ValueError):
        grid_search(clusters, B=0)
    with pytest.raises(ValueError):
        grid_search(clusters, h_grid=(0.01,), q_grid=(2,))


def test_univariate_route():
    r = np.random.default_rng(3)
    x = np.concatenate([r.standard_normal(80), r.standard_normal(20) + 30])
    path = grid_search(x[:, None], h_grid=(0.5, 0.8), q_grid=(1,), B=10, master_seed=0)
    assert path.cell(80, 1).s_hat < -0.8
