"""PCA embedding and the spectral MCD best-subset search."""

from dataclasses import dataclass

import numpy as np

from .depth import default_directions, depths_from_projections, project_directions, sample_directions
from .exceptions import RankDeficientScatterError
from .mcd import check_data, concentrate, subset_estimate, top_k_indices

# Singular values at or below this fraction of the largest count as zero.
SV_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """Column means and the leading ``q`` right singular vectors."""

    mu: np.ndarray
    v_q: np.ndarray
    singular_values: np.ndarray
    rank_deficient: bool = False

    @property
    def q(self):
        return self.v_q.shape[1]


def _fix_signs(v):
    # largest-magnitude entry of each column made positive
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def fit_embedding(X, q):
    """Fit an ordinary (non-robust) PCA with ``q`` components.

    Columns are centered but not rescaled.
    """
    X = check_data(X)
    n, p = X.shape
    if not 1 <= q <= min(n, p):
        raise ValueError(f"q must satisfy 1 <= q <= min(n, p)={min(n, p)}, got {q}")
    mu = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mu, full_matrices=False)
    v = _fix_signs(vt[:q].T.copy())
    s = s[:q].copy()
    deficient = bool(s[-1] <= SV_RTOL * max(s[0], np.finfo(float).tiny))
    return SpectralModel(mu, v, s, deficient)


def project(model, X):
    """Scores ``(X - mu) V_q`` of new rows in a fitted embedding."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.mu.shape[0]:
        raise ValueError(f"data has {X.shape[1]} columns, model expects {model.mu.shape[0]}")
    return (X - model.mu) @ model.v_q


@dataclass(eq=False)
class BestSubsetResult:
    subset: np.ndarray
    estimate: object
    model: SpectralModel
    labels: np.ndarray
    converged: bool
    iterations: int
    scores: np.ndarray = None
    depths: np.ndarray = None


def labels_from_subset(n, subset):
    """Binary map with 0 on ``subset`` and 1 elsewhere."""
    labels = np.ones(n, dtype=np.int8)
    labels[subset] = 0
    return labels


def best_subset_in_scores(Z, h, dirs, init_depths=None, max_iter=100):
    """Depth-initialized concentration on a score matrix.

    ``init_depths`` may carry precomputed self-depths of ``Z`` so that several
    values of ``h`` share one depth evaluation.
    """
    n = Z.shape[0]
    if h == n:
        H = np.arange(n)
        return H, subset_estimate(Z, H), 0, True
    if init_depths is None:
        proj = project_directions(Z, dirs)
        init_depths = depths_from_projections(proj, proj)
    H0 = top_k_indices(init_depths, h)
    try:
        res = concentrate(Z, H0, max_iter=max_iter)
    except RankDeficientScatterError as exc:
        raise RankDeficientScatterError(
            exc.deficient, exc.dim, f"score-space scatter is singular at h={h}; use a smaller q"
        ) from None
    return res.subset, res.estimate, res.iterations, res.converged


def spectral_mcd(X, h, q, k=None, seed=0, max_iter=100, dirs=None):
    """Best ``h``-subset of ``X`` after embedding on ``q`` principal components.

    Center and embed with an SVD, take the ``h`` rows of greatest projection
    depth in score space, then run C-steps in score space until the subset
    is stable.

    Parameters
    ----------
    X : array-like of shape (n, p)
    h : int
        Subset size, ``q < h <= n``.
    q : int
        Number of principal components.
    k : int, optional
        Number of random directions, default ``max(1000, 10 q)``.
    seed : int or SeedSequence
        Seeds the directions when ``dirs`` is not given.
    max_iter : int
        Cap on C-steps.
    dirs : DirectionSet, optional

    Returns
    -------
    BestSubsetResult
        ``depths`` holds the depth of every row relative to the final subset.
    """
    X = check_data(X)
    n = X.shape[0]
    if not q < h <= n:
        raise ValueError(f"need q < h <= n, got q={q}, h={h}, n={n}")
    model = fit_embedding(X, q)
    Z = project(model, X)
    if dirs is None:
        dirs = sample_directions(k or default_directions(q), q, seed)
    proj = project_directions(Z, dirs)
    H, est, iterations, converged = best_subset_in_scores(
        Z, h, dirs, init_depths=depths_from_projections(proj, proj), max_iter=max_iter
    )
    depths = depths_from_projections(proj, np.ascontiguousarray(proj[:, H]))
    return BestSubsetResult(
        subset=H,
        estimate=est,
        model=model,
        labels=labels_from_subset(n, H),
        converged=converged,
        iterations=iterations,
        scores=Z,
        depths=depths,
    )
