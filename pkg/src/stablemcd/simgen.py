"""Seeded simulation protocols.

All generators draw from ``numpy.random.default_rng(seed)`` (PCG64, normals
by the ziggurat method), so a seed reproduces a data set exactly within one
numpy version. Planted outliers always occupy the last rows.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(eq=False)
class SimDataset:
    X: np.ndarray
    truth: np.ndarray
    mu_true: np.ndarray
    sigma_true: np.ndarray
    protocol: dict = field(default_factory=dict)
    seed: object = None

    @property
    def n_outliers(self):
        return int(self.truth.sum())


def _truth(n, n_out):
    t = np.zeros(n, dtype=np.int8)
    if n_out:
        t[n - n_out:] = 1
    return t


def _n_outliers(n, eps):
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"contamination must lie in [0, 1), got {eps}")
    return int(np.floor(eps * n + 1e-9))


def _rescale_spectrum(lam, target_cn):
    # affine map onto [m, target_cn * m] with mean 1 (trace p)
    span = lam[-1] - lam[0]
    unit = (lam - lam[0]) / span if span > 0 else np.linspace(0.0, 1.0, lam.size)
    shape = 1.0 + (target_cn - 1.0) * unit
    return shape / shape.mean()


def _covariance_cn(p, target_cn, rng, max_iter=100, tol=1e-10):
    """Correlation-like covariance with condition number ``target_cn``.

    Start from random eigenvalues in ``[1, target_cn]`` on a Haar-random
    orthogonal basis, then alternate between rescaling to unit diagonal and
    mapping the spectrum affinely back to the target condition number (mean
    eigenvalue 1) until the diagonal settles at 1. The last step is always a
    spectral one, so the condition number is exact; the diagonal is 1 up to
    ``tol`` once the loop has converged.

    Returns the matrix with its ascending eigenvalues and eigenvectors.
    """
    q_mat, r = np.linalg.qr(rng.standard_normal((p, p)))
    q_mat = q_mat * np.sign(np.diag(r))
    lam = np.sort(rng.uniform(1.0, target_cn, size=p))
    lam[0], lam[-1] = 1.0, target_cn
    lam = _rescale_spectrum(lam, target_cn)
    for _ in range(max_iter):
        sigma = (q_mat * lam) @ q_mat.T
        d = np.sqrt(np.diag(sigma))
        if np.max(np.abs(d - 1.0)) < tol:
            break
        corr = sigma / np.outer(d, d)
        lam, q_mat = np.linalg.eigh(0.5 * (corr + corr.T))
        lam = _rescale_spectrum(lam, target_cn)
    sigma = (q_mat * lam) @ q_mat.T
    sigma = 0.5 * (sigma + sigma.T)
    return sigma, lam, q_mat


def gen_covariance_cn(p, target_cn=50.0, seed=None):
    """Random SPD ``p x p`` covariance whose condition number is ``target_cn``."""
    if p < 2 or target_cn <= 1:
        raise ValueError("need p >= 2 and target_cn > 1")
    return _covariance_cn(p, float(target_cn), np.random.default_rng(seed))[0]


def _highdim_parts(n, p, rng, target_cn=50.0):
    sigma, lam, vecs = _covariance_cn(p, target_cn, rng)
    root = vecs * np.sqrt(lam)
    return sigma, vecs, root


def gen_highdim(n, p, eps, l, seed=None, target_cn=50.0, shift=50.0):
    """Gaussian inliers with eigen-direction outliers.

    Inliers follow N(0, Sigma) with cond(Sigma) = ``target_cn``. Each outlier
    picks ``a`` uniformly among the ``l`` eigenvectors of smallest
    eigenvalue and is drawn from N(shift * a, Sigma).
    """
    if not 1 <= l <= p:
        raise ValueError(f"l must lie in [1, p], got {l}")
    rng = np.random.default_rng(seed)
    n_out = _n_outliers(n, eps)
    sigma, vecs, root = _highdim_parts(n, p, rng, target_cn)
    X = rng.standard_normal((n, p)) @ root.T
    if n_out:
        pick = rng.integers(0, l, size=n_out)
        X[n - n_out:] += shift * vecs[:, pick].T
    return SimDataset(
        X, _truth(n, n_out), np.zeros(p), sigma,
        {"protocol": "highdim", "n": n, "p": p, "eps": eps, "l": l, "target_cn": target_cn}, seed,
    )


def overdetermined_mixing(p):
    """Mixing matrix with unit diagonal and 0.75 off the diagonal."""
    return 0.25 * np.eye(p) + 0.75 * np.ones((p, p))


OUTLIER_KINDS = ("point", "cluster", "random", "radial")


def point_direction(p, rng):
    """Unit vector with zero coordinate sum."""
    if p < 2:
        raise ValueError("point outliers need p >= 2")
    a = rng.standard_normal(p)
    a -= a.mean()
    return a / np.linalg.norm(a)


def gen_overdetermined(n, p, eps, kind, r=5.0, seed=None):
    """Inliers ``G y`` with ``y ~ N(0, I)`` plus one of four outlier types.

    ``kind`` selects the outlier law in y-space: ``point`` N(r a sqrt(p),
    0.01^2 I) with a fixed unit ``a`` summing to zero; ``cluster``
    N(r p^(-1/4) 1, I); ``random`` N(r p^(1/4) v/|v|, I) with a fresh
    Gaussian ``v`` per row; ``radial`` N(0, 5 I). ``mu_true`` and
    ``sigma_true`` are the inlier moments in x-space (0 and G G').
    """
    if kind not in OUTLIER_KINDS:
        raise ValueError(f"kind must be one of {OUTLIER_KINDS}, got {kind!r}")
    rng = np.random.default_rng(seed)
    n_out = _n_outliers(n, eps)
    n_in = n - n_out
    Y = np.empty((n, p))
    Y[:n_in] = rng.standard_normal((n_in, p))
    protocol = {"protocol": "overdetermined", "n": n, "p": p, "eps": eps, "kind": kind, "r": r}
    if kind == "point":
        a = point_direction(p, rng)
        protocol["a"] = a
        Y[n_in:] = r * np.sqrt(p) * a + 0.01 * rng.standard_normal((n_out, p))
    elif kind == "cluster":
        Y[n_in:] = r * p ** -0.25 + rng.standard_normal((n_out, p))
    elif kind == "random":
        v = rng.standard_normal((n_out, p))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        Y[n_in:] = r * p**0.25 * v + rng.standard_normal((n_out, p))
    else:
        Y[n_in:] = np.sqrt(5.0) * rng.standard_normal((n_out, p))
    G = overdetermined_mixing(p)
    return SimDataset(Y @ G.T, _truth(n, n_out), np.zeros(p), G @ G.T, protocol, seed)


def gen_masking_setting(setting, seed=None, n=None):
    """Masking scenarios with intermediate and extreme outliers.

    1. univariate: 80% N(0,1), 10% N(-10,1), 10% N(10,1)
    2. univariate: 80% N(0,1), 15% N(5,1), 5% N(1000,1)
    3. setting 2 in two dimensions (means 5 and 1000 in every coordinate)
    4. highdim protocol with n=300, p=500: 15% outliers at 50 a and 5% at
       5000 b, a and b the eigenvectors of the smallest and second smallest
       eigenvalue

    ``n`` rescales settings 1-3 (default 1000) keeping the proportions.
    """
    rng = np.random.default_rng(seed)
    if setting in (1, 2, 3):
        n = 1000 if n is None else int(n)
        n_in = int(round(0.8 * n))
        if setting == 1:
            n_a = int(round(0.1 * n))
            means, dim = (-10.0, 10.0), 1
        else:
            n_a = int(round(0.15 * n))
            means, dim = (5.0, 1000.0), (1 if setting == 2 else 2)
        n_b = n - n_in - n_a
        X = rng.standard_normal((n, dim))
        X[n_in:n_in + n_a] += means[0]
        X[n_in + n_a:] += means[1]
        return SimDataset(
            X, _truth(n, n - n_in), np.zeros(dim), np.eye(dim),
            {"protocol": "masking", "setting": setting, "n": n, "counts": (n_in, n_a, n_b)}, seed,
        )
    if setting == 4:
        n = 300 if n is None else int(n)
        p = 500
        n_a = int(round(0.15 * n))
        n_b = int(round(0.05 * n))
        n_in = n - n_a - n_b
        sigma, vecs, root = _highdim_parts(n, p, rng)
        X = rng.standard_normal((n, p)) @ root.T
        X[n_in:n_in + n_a] += 50.0 * vecs[:, 0]
        X[n_in + n_a:] += 5000.0 * vecs[:, 1]
        return SimDataset(
            X, _truth(n, n_a + n_b), np.zeros(p), sigma,
            {"protocol": "masking", "setting": 4, "n": n, "p": p, "counts": (n_in, n_a, n_b)}, seed,
        )
    raise ValueError(f"masking setting must be 1, 2, 3 or 4, got {setting}")
