"""Subset location/scatter, Mahalanobis distances and concentration steps.

Scatter matrices use divisor ``h`` throughout. Inverses and log-determinants
come from a Cholesky factorization the first time they are needed and are
then carried along through rank-one updates while a concentration run moves
points in and out of the subset.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import linalg

from . import _backend
from .exceptions import RankDeficientScatterError

# Eigenvalues at or below this fraction of the largest count as zero.
RANK_RTOL = 1e-12


def check_data(X, name="X"):
    """Return ``X`` as a finite 2-D float array with at least two rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {X.shape}")
    if X.shape[0] < 2 or X.shape[1] < 1:
        raise ValueError(f"{name} needs n >= 2 rows and p >= 1 columns, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    return X


def check_subset(H, n):
    """Validate an index set and return it sorted as an ``intp`` array."""
    H = np.asarray(H, dtype=np.intp).ravel()
    if H.size == 0:
        raise ValueError("subset is empty")
    H = np.sort(H)
    if H[0] < 0 or H[-1] >= n:
        raise ValueError(f"subset indices must lie in [0, {n})")
    if np.any(np.diff(H) == 0):
        raise ValueError("subset contains duplicate indices")
    return H


def top_k_indices(scores, k, largest=True):
    """Indices of the ``k`` largest (or smallest) scores, ties by row index.

    The result is sorted ascending.
    """
    scores = np.asarray(scores)
    key = -scores if largest else scores
    order = np.argsort(key, kind="stable")
    return np.sort(order[:k])


@dataclass(eq=False)
class LocationScatter:
    """Mean and scatter of an ``h``-subset.

    ``sigma_inv`` and ``log_det`` are filled on first access. ``refreshed``
    records that an incremental update fell back to a dense factorization.
    """

    mu: np.ndarray
    sigma: np.ndarray
    h: int
    _sigma_inv: np.ndarray = field(default=None, repr=False)
    _log_det: float = field(default=None, repr=False)
    refreshed: bool = False

    @property
    def p(self):
        return self.mu.shape[0]

    @property
    def sigma_inv(self):
        if self._sigma_inv is None:
            self._factorize()
        return self._sigma_inv

    @property
    def log_det(self):
        if self._log_det is None:
            self._factorize()
        return self._log_det

    @property
    def det(self):
        return float(np.exp(self.log_det))

    def is_invertible(self):
        if self._sigma_inv is not None:
            return True
        try:
            self._factorize()
        except RankDeficientScatterError:
            return False
        return True

    def copy(self):
        return LocationScatter(
            self.mu.copy(),
            self.sigma.copy(),
            self.h,
            None if self._sigma_inv is None else self._sigma_inv.copy(),
            self._log_det,
            self.refreshed,
        )

    def _factorize(self):
        p = self.p
        try:
            chol = linalg.cholesky(self.sigma, lower=True, check_finite=False)
        except linalg.LinAlgError:
            chol = None
        if chol is not None:
            d = np.diag(chol) ** 2
            if d.min() <= RANK_RTOL * d.max():
                chol = None
        if chol is None:
            eig = np.linalg.eigvalsh(self.sigma)
            top = max(eig.max(), 0.0)
            deficient = int(np.sum(eig <= RANK_RTOL * top)) if top > 0 else p
            raise RankDeficientScatterError(max(deficient, 1), p)
        self._sigma_inv = linalg.cho_solve((chol, True), np.eye(p), check_finite=False)
        self._sigma_inv = 0.5 * (self._sigma_inv + self._sigma_inv.T)
        self._log_det = float(2.0 * np.sum(np.log(np.diag(chol))))


def subset_estimate(X, H):
    """Mean and divisor-``h`` covariance of the rows of ``X`` indexed by ``H``.

    Parameters
    ----------
    X : array-like of shape (n, p)
    H : array-like of int
        Distinct row indices.

    Returns
    -------
    LocationScatter
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    H = check_subset(H, X.shape[0])
    rows = X[H]
    mu = rows.mean(axis=0)
    dev = rows - mu
    sigma = dev.T @ dev / H.size
    sigma = 0.5 * (sigma + sigma.T)
    return LocationScatter(mu, sigma, int(H.size))


def mahalanobis_sq(x, est):
    """Squared Mahalanobis distance of one vector from ``est``."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != est.p:
        raise ValueError(f"vector has length {x.shape[0]}, estimate has dimension {est.p}")
    d = x - est.mu
    return max(float(d @ est.sigma_inv @ d), 0.0)


def mahalanobis_sq_rows(X, est):
    """Squared Mahalanobis distances of every row of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != est.p:
        raise ValueError(f"data has {X.shape[1]} columns, estimate has dimension {est.p}")
    d = X - est.mu
    out = np.einsum("ij,ij->i", d @ est.sigma_inv, d)
    np.maximum(out, 0.0, out=out)
    return out


def _inverse_or_raise(est):
    try:
        return est.sigma_inv
    except RankDeficientScatterError as exc:
        raise RankDeficientScatterError(
            exc.deficient, exc.dim, "reduce the number of components q or increase h"
        ) from None


def c_step(Z, est, h):
    """One concentration step: the ``h`` rows closest to ``est``.

    Ties in distance are broken by ascending row index.
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[:, None]
    n = Z.shape[0]
    if not 0 < h <= n:
        raise ValueError(f"h must satisfy 0 < h <= n={n}, got {h}")
    if h == n:
        return np.arange(n)
    _inverse_or_raise(est)
    return top_k_indices(mahalanobis_sq_rows(Z, est), h, largest=False)


class ConcentrationResult(NamedTuple):
    subset: np.ndarray
    estimate: LocationScatter
    iterations: int
    converged: bool
    log_dets: list


def concentrate(Z, H0, max_iter=100, incremental=True):
    """Iterate C-steps from ``H0`` until the subset stops changing.

    Parameters
    ----------
    Z : array-like of shape (n, q)
    H0 : array-like of int
        Starting subset; its size fixes ``h``.
    max_iter : int
        Cap on the number of C-steps.
    incremental : bool
        Move between consecutive subsets with rank-one updates instead of
        refitting. Small swap sets only; large ones are refit.

    Returns
    -------
    ConcentrationResult
        ``log_dets[t]`` is the log-determinant of the subset entering step
        ``t + 1``; the last entry belongs to the returned subset.
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[:, None]
    n = Z.shape[0]
    H = check_subset(H0, n)
    h = H.size
    est = subset_estimate(Z, H)
    _inverse_or_raise(est)
    log_dets = [est.log_det]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        H_new = c_step(Z, est, h)
        if np.array_equal(H_new, H):
            converged = True
            break
        adds = np.setdiff1d(H_new, H, assume_unique=True)
        if incremental and adds.size <= max(1, h // 4):
            removes = np.setdiff1d(H, H_new, assume_unique=True)
            est = _swap(Z, est, adds, removes, H_new)
        else:
            est = subset_estimate(Z, H_new)
        _inverse_or_raise(est)
        H = H_new
        log_dets.append(est.log_det)
    return ConcentrationResult(H, est, iterations, converged, log_dets)


def _swap(Z, est, adds, removes, H_new):
    new = est.copy()
    delta, ok = _backend.apply_swaps_inplace(
        new.mu, new.sigma, new._sigma_inv, float(new.h), Z[adds], Z[removes]
    )
    if not ok:
        fresh = subset_estimate(Z, H_new)
        fresh.refreshed = True
        return fresh
    new._log_det = est.log_det + delta
    return new


def _incremental(est, y, inplace_op, size_after):
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != est.p:
        raise ValueError(f"vector has length {y.shape[0]}, estimate has dimension {est.p}")
    log_det = est.log_det  # forces the factorization
    new = est.copy()
    delta, ok = inplace_op(new.mu, new.sigma, new._sigma_inv, float(est.h), y)
    new.h = size_after
    if ok:
        new._log_det = log_det + delta
        return new
    # dense refresh from the Welford-updated scatter
    new.sigma = 0.5 * (new.sigma + new.sigma.T)
    new._sigma_inv = None
    new._log_det = None
    new.refreshed = True
    new._factorize()
    return new


def rank_one_update(est, y):
    """Estimate for the subset with ``y`` added, in O(p^2).

    Mean and scatter follow the Welford recursion, the inverse follows
    Sherman-Morrison and the log-determinant the matrix determinant lemma.
    """
    return _incremental(est, y, _backend.rank_one_update_inplace, est.h + 1)


def rank_one_downdate(est, y):
    """Estimate for the subset with member ``y`` removed, in O(p^2)."""
    if est.h - 1 < 3:
        raise ValueError(f"downdate would leave {est.h - 1} points; at least 3 are required")
    return _incremental(est, y, _backend.rank_one_downdate_inplace, est.h - 1)


def univariate_mcd_exact(x, h):
    """Exact univariate MCD: the ``h`` contiguous sorted values of least variance.

    Runs in O(n log n). Among windows of equal variance the one starting
    lowest in sorted order wins.

    Returns
    -------
    ndarray of int
        Sorted original indices of the chosen window.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    n = x.size
    if not 2 <= h <= n:
        raise ValueError(f"h must satisfy 2 <= h <= n={n}, got {h}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x contains NaN or infinite entries")
    order = np.argsort(x, kind="stable")
    xs = x[order]
    shifted = xs - xs[(n - 1) // 2]
    c1 = np.concatenate(([0.0], np.cumsum(shifted)))
    c2 = np.concatenate(([0.0], np.cumsum(shifted * shifted)))
    s1 = c1[h:] - c1[:-h]
    s2 = c2[h:] - c2[:-h]
    var = np.maximum(s2 / h - (s1 / h) ** 2, 0.0)
    # absorb summation noise so exactly tied windows stay tied
    scale = max(float(np.abs(shifted).max()) ** 2, 1.0)
    best = var.min()
    start = int(np.flatnonzero(var <= best + 1e-13 * scale)[0])
    return np.sort(order[start:start + h])
