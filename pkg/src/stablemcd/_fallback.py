"""Pure numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` operation for operation so both backends return
the same outlyingness values bit for bit. The rank-one routines agree with the
compiled ones to rounding.
"""

import math

import numpy as np

# Sherman-Morrison denominators below this trigger a dense refresh.
DENOM_TOL = 1e-12


def _median_rows(a):
    """Row-wise median of a 2-D array (mean of the two middles for even width)."""
    m = a.shape[1]
    half = m // 2
    if m % 2:
        return np.partition(a, half, axis=1)[:, half]
    part = np.partition(a, (half - 1, half), axis=1)
    return 0.5 * (part[:, half - 1] + part[:, half])


def outlyingness(query_t, ref_t):
    """Max over directions of ``|u'x - med| / MAD``.

    Parameters
    ----------
    query_t : ndarray of shape (k, n)
        Query rows projected on ``k`` directions, one direction per row.
    ref_t : ndarray of shape (k, m)
        Reference rows projected on the same directions.

    Returns
    -------
    ndarray of shape (n,)
        Outlyingness per query row. ``inf`` marks a nonzero deviation along a
        direction whose MAD is zero; ``0/0`` contributes nothing.
    """
    query_t = np.asarray(query_t, dtype=np.float64)
    ref_t = np.asarray(ref_t, dtype=np.float64)
    med = _median_rows(ref_t)
    mad = _median_rows(np.abs(ref_t - med[:, None]))
    num = np.abs(query_t - med[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = num / mad[:, None]
    ratio[np.isnan(ratio)] = 0.0
    if ratio.shape[0] == 0:
        return np.zeros(query_t.shape[1])
    return ratio.max(axis=0)


def rank_one_update(mu, sigma, sigma_inv, h, y):
    """Insert ``y`` into a subset of size ``h``; arrays are modified in place.

    Returns ``(delta_log_det, ok)``. When ``ok`` is False the mean and scatter
    were updated but ``sigma_inv`` is stale and must be refreshed densely.
    """
    p = mu.shape[0]
    mu += (y - mu) / (h + 1.0)
    w = y - mu
    a_inv = sigma_inv * ((h + 1.0) / h)
    t = a_inv @ w
    s = float(w @ t)
    denom = h + s
    sigma *= h / (h + 1.0)
    sigma += np.outer(w, w) / h
    if not (denom > DENOM_TOL) or not (1.0 + s / h > DENOM_TOL):
        return 0.0, False
    sigma_inv[...] = a_inv - np.outer(t, t) / denom
    return p * math.log(h / (h + 1.0)) + math.log1p(s / h), True


def rank_one_downdate(mu, sigma, sigma_inv, h, y):
    """Remove member ``y`` from a subset of size ``h``; arrays modified in place.

    Returns ``(delta_log_det, ok)`` with the same convention as
    :func:`rank_one_update`.
    """
    p = mu.shape[0]
    m = float(h)
    w = y - mu
    b_inv = sigma_inv * ((m - 1.0) / m)
    c = m / ((m - 1.0) * (m - 1.0))
    t = b_inv @ w
    s = float(w @ t)
    denom = 1.0 - c * s
    mu *= m / (m - 1.0)
    mu -= y / (m - 1.0)
    sigma *= m / (m - 1.0)
    sigma -= c * np.outer(w, w)
    if not (denom > DENOM_TOL):
        return 0.0, False
    sigma_inv[...] = b_inv + (c / denom) * np.outer(t, t)
    return p * math.log(m / (m - 1.0)) + math.log(denom), True


def apply_swaps(mu, sigma, sigma_inv, h, adds, removes):
    """Insert every row of ``adds`` then remove every row of ``removes``.

    Returns ``(delta_log_det, ok)``. Stops at the first failed step; the
    caller then recomputes from scratch.
    """
    total = 0.0
    size = h
    for y in adds:
        d, ok = rank_one_update(mu, sigma, sigma_inv, size, y)
        if not ok:
            return total, False
        total += d
        size += 1
    for y in removes:
        d, ok = rank_one_downdate(mu, sigma, sigma_inv, size, y)
        if not ok:
            return total, False
        total += d
        size -= 1
    return total, True
