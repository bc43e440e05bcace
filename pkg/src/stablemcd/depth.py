"""Projection depth approximated over random unit directions."""

from dataclasses import dataclass

import numpy as np

from . import _backend
from .mcd import check_data, top_k_indices


def default_directions(q):
    """Default direction count ``max(1000, 10 q)``."""
    return max(1000, 10 * int(q))


@dataclass(frozen=True, eq=False)
class DirectionSet:
    directions: np.ndarray
    seed: object = None

    @property
    def k(self):
        return self.directions.shape[0]

    @property
    def q(self):
        return self.directions.shape[1]


def sample_directions(k, q, seed=None):
    """Draw ``k`` directions uniformly on the unit sphere in ``q`` dimensions.

    Directions are normalized standard normal draws. ``seed`` is anything
    accepted by :func:`numpy.random.default_rng`.
    """
    if k < 1 or q < 1:
        raise ValueError(f"need k >= 1 and q >= 1, got k={k}, q={q}")
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((k, q))
    norms = np.linalg.norm(u, axis=1)
    while np.any(norms == 0.0):
        bad = norms == 0.0
        u[bad] = rng.standard_normal((int(bad.sum()), q))
        norms = np.linalg.norm(u, axis=1)
    return DirectionSet(u / norms[:, None], seed)


def project_directions(X, dirs):
    """Projections of the rows of ``X`` on every direction, shape (k, n)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != dirs.q:
        raise ValueError(f"data has {X.shape[1]} columns but directions live in {dirs.q} dimensions")
    return np.ascontiguousarray(dirs.directions @ X.T)


def depths_from_projections(query_t, ref_t):
    """Depths ``1 / (1 + O)`` from precomputed projections.

    ``query_t`` is (k, n) and ``ref_t`` is (k, m). Useful when the same
    projections are reused against several reference subsets.
    """
    if ref_t.shape[1] < 2:
        raise ValueError("reference needs at least two rows")
    out = _backend.outlyingness(query_t, ref_t)
    return 1.0 / (1.0 + out)


def projection_depths(query, reference, dirs):
    """Projection depth of each query row with respect to ``reference``.

    For every direction ``u`` the robust z-score ``|u'x - med| / MAD`` is
    taken over the projected reference (unscaled MAD); outlyingness is its
    maximum over directions and the depth is ``1 / (1 + outlyingness)``.
    A direction with zero MAD contributes 0 when the query sits exactly on
    the median and infinite outlyingness (depth 0) otherwise.

    Parameters
    ----------
    query : array-like of shape (n, q)
    reference : array-like of shape (m, q)
    dirs : DirectionSet

    Returns
    -------
    ndarray of shape (n,)
    """
    # a 1-D query is a single point, a 1-D reference a univariate sample
    query = np.atleast_2d(np.asarray(query, dtype=np.float64))
    reference = check_data(reference, "reference")
    if query.shape[1] != reference.shape[1]:
        raise ValueError("query and reference must have the same number of columns")
    return depths_from_projections(project_directions(query, dirs), project_directions(reference, dirs))


def depth_rank_subset(Z, h, dirs):
    """Indices of the ``h`` deepest rows of ``Z`` measured against ``Z`` itself.

    Ties go to the lower row index.
    """
    Z = check_data(Z, "Z")
    n = Z.shape[0]
    if not 0 < h <= n:
        raise ValueError(f"h must satisfy 0 < h <= n={n}, got {h}")
    if h == n:
        return np.arange(n)
    proj = project_directions(Z, dirs)
    return top_k_indices(depths_from_projections(proj, proj), h)
