"""Bootstrap instability of the best-subset search and its (h, q) grid search.

Two bootstrap resamples of the data each pick a best ``h``-subset. Both fits
are then used to label the original rows as inliers or outliers, and the
disagreement between the two labelings, corrected for the subset size, is
averaged over ``B`` independent pairs. The ``(h, q)`` with the smallest
average is the most stable choice.

Seeds: pair ``b`` of a run with master seed ``s`` uses
``SeedSequence(s, spawn_key=(b,))``. Inside a pair, resample ``j`` (0 or 1)
draws its rows from spawn key ``(b, j, 0)`` and its projection directions
for ``q`` components from ``(b, j, 1, q)``. Every pair is therefore
reproducible on its own, whatever order or process evaluates it.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .depth import default_directions, depths_from_projections, project_directions, sample_directions
from .exceptions import DegenerateCorrectionError, PairFailure, StableMCDError
from .mcd import check_data, top_k_indices, univariate_mcd_exact
from .spectral import best_subset_in_scores, fit_embedding, labels_from_subset, project

log = logging.getLogger(__name__)

DEFAULT_H_GRID = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


def _as_maps(a, b):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"binary maps differ in length: {a.size} vs {b.size}")
    if not (np.isin(a, (0, 1)).all() and np.isin(b, (0, 1)).all()):
        raise ValueError("binary maps may only contain 0 and 1")
    return a.astype(np.int8), b.astype(np.int8)


def probability_distance(a, b):
    """Fraction of observations on which two binary maps disagree."""
    a, b = _as_maps(a, b)
    return float(np.count_nonzero(a != b)) / a.size


def clustering_distance(a, b):
    """Co-membership disagreement between two two-cluster labelings, O(n).

    Equals ``2 p (1 - p)`` with ``p`` the probability distance.
    """
    p = probability_distance(a, b)
    return 2.0 * p * (1.0 - p)


def clustering_distance_pairwise(a, b):
    """Clustering distance by the O(n^2) double sum over observation pairs.

    Works for any number of clusters; kept as the reference definition.
    """
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"labelings differ in length: {a.size} vs {b.size}")
    same_a = a[:, None] == a[None, :]
    same_b = b[:, None] == b[None, :]
    return float(np.count_nonzero(same_a != same_b)) / a.size**2


def correction_c(n, h):
    """Expected disagreement rate ``2 (h/n) (n-h)/n`` of two random h-subsets."""
    return 2.0 * (h / n) * ((n - h) / n)


def correction_c_prime(n, h):
    """Probability ``[C(h,2) + C(n-h,2)] / C(n,2)`` that a random pair shares a label."""
    if n < 2:
        raise DegenerateCorrectionError("c' needs n >= 2")
    return (math.comb(h, 2) + math.comb(n - h, 2)) / math.comb(n, 2)


def corrected_probability_distance(a, b, h):
    """Probability distance divided by ``c = 2 (h/n) (n-h)/n``."""
    a, b = _as_maps(a, b)
    n = a.size
    if not 0 < h < n:
        raise DegenerateCorrectionError(f"correction undefined for h={h}, n={n} (need 0 < h < n)")
    return probability_distance(a, b) / correction_c(n, h)


def corrected_clustering_distance(a, b, h):
    """Clustering distance scaled by ``2 c' (1 - c')``, minus one.

    About 0 for two unrelated random subsets, -1 for identical maps.
    """
    a, b = _as_maps(a, b)
    n = a.size
    if not 0 < h < n:
        raise DegenerateCorrectionError(f"correction undefined for h={h}, n={n} (need 0 < h < n)")
    cp = correction_c_prime(n, h)
    denom = 2.0 * cp * (1.0 - cp)
    if denom <= 0.0:
        raise DegenerateCorrectionError(f"c'={cp} gives a zero normalizer at h={h}, n={n}")
    return clustering_distance(a, b) / denom - 1.0


def h_from_fraction(frac, n):
    """``floor(frac * n)``, robust to representation error in ``frac``."""
    if not 0.0 < frac < 1.0:
        raise ValueError(f"h fractions must lie in (0, 1), got {frac}")
    return int(math.floor(frac * n + 1e-9))


def _seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def pair_seed_sequence(master_seed, b):
    """Seed sequence of bootstrap pair ``b``."""
    return np.random.SeedSequence(master_seed, spawn_key=(int(b),))


def _child(ss, *key):
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(int(k) for k in key))


def resample_indices(n, ss, which):
    """Row indices of resample ``which`` (0 or 1) of the pair seeded by ``ss``."""
    rng = np.random.default_rng(_child(ss, which, 0))
    return np.sort(rng.integers(0, n, size=n))


def _univariate_maps(X, idx, h_values):
    x = X[:, 0]
    xb = x[idx]
    n = x.size
    maps = []
    for h in h_values:
        sel = univariate_mcd_exact(xb, h)
        center = xb[sel].mean()
        maps.append(labels_from_subset(n, top_k_indices(np.abs(x - center), h, largest=False)))
    return maps


def resample_maps(X, idx, q, h_values, k, dir_seed, max_iter=100):
    """Outlier maps of the original rows induced by one resample, per ``h``.

    The resample is embedded once and its self-depths computed once; each
    ``h`` then runs its own concentration. Original rows are projected
    through the resample's embedding and labeled by depth against the
    selected subset's scores: the ``h`` deepest are inliers, ties going to
    the lower row index.

    Returns a list with one entry per ``h``: the map, or the exception that
    prevented it.
    """
    n = X.shape[0]
    Xb = X[idx]
    model = fit_embedding(Xb, q)
    Zb = project(model, Xb)
    Zx = project(model, X)
    dirs = sample_directions(k, q, dir_seed)
    pb = project_directions(Zb, dirs)
    px = project_directions(Zx, dirs)
    self_depth = depths_from_projections(pb, pb)
    out = []
    for h in h_values:
        try:
            H, _, _, _ = best_subset_in_scores(Zb, h, dirs, init_depths=self_depth, max_iter=max_iter)
            d = depths_from_projections(px, np.ascontiguousarray(pb[:, H]))
            out.append(labels_from_subset(n, top_k_indices(d, h)))
        except (StableMCDError, ValueError, np.linalg.LinAlgError) as exc:
            out.append(exc)
    return out


def _pair_distances(X, ss, q_values, h_values, k, univariate):
    """Corrected distances of one pair over the grid, shape (len(q), len(h)).

    Failures come back as exceptions in a parallel object array.
    """
    n = X.shape[0]
    dist = np.full((len(q_values), len(h_values)), np.nan)
    errors = {}
    idx = [resample_indices(n, ss, j) for j in (0, 1)]
    for qi, q in enumerate(q_values):
        if univariate:
            maps = [_univariate_maps(X, idx[j], h_values) for j in (0, 1)]
        else:
            maps = []
            for j in (0, 1):
                kk = k if k is not None else default_directions(q)
                try:
                    maps.append(resample_maps(X, idx[j], q, h_values, kk, _child(ss, j, 1, q)))
                except (StableMCDError, ValueError, np.linalg.LinAlgError) as exc:
                    maps.append([exc] * len(h_values))
        for hi, h in enumerate(h_values):
            m1, m2 = maps[0][hi], maps[1][hi]
            if isinstance(m1, Exception) or isinstance(m2, Exception):
                errors[(qi, hi)] = m1 if isinstance(m1, Exception) else m2
                continue
            dist[qi, hi] = corrected_clustering_distance(m1, m2, h)
    return dist, errors


def _validate_grid(X, h_values, q_values):
    n, p = X.shape
    for q in q_values:
        if not 1 <= q <= min(n, p):
            raise ValueError(f"q={q} outside [1, min(n, p)={min(n, p)}]")
    for h in h_values:
        if not 0 < h < n:
            raise ValueError(f"h={h} outside (0, n={n})")
        if h <= max(q_values):
            raise ValueError(f"h={h} must exceed every q (max q = {max(q_values)})")


def bootstrap_pair_distance(X, h, q, k=None, pair_seed=0):
    """Corrected clustering distance between the maps of one bootstrap pair.

    ``pair_seed`` is an int or a :class:`numpy.random.SeedSequence`; pair
    ``b`` of :func:`instability` uses ``pair_seed_sequence(master_seed, b)``.
    """
    X = check_data(X)
    _validate_grid(X, [h], [q])
    ss = _seed_sequence(pair_seed)
    dist, errors = _pair_distances(X, ss, [q], [h], k, X.shape[1] == 1)
    if errors:
        raise PairFailure(ss.spawn_key[0] if ss.spawn_key else 0, errors[(0, 0)])
    return float(dist[0, 0])


@dataclass(eq=False)
class InstabilityCell:
    h: int
    q: int
    distances: np.ndarray
    h_frac: float = None
    failed_pairs: list = field(default_factory=list)

    @property
    def s_hat(self):
        ok = self.distances[~np.isnan(self.distances)]
        return float(ok.mean()) if ok.size else float("nan")

    @property
    def std_err(self):
        ok = self.distances[~np.isnan(self.distances)]
        if ok.size < 2:
            return 0.0
        return float(ok.std(ddof=1) / math.sqrt(ok.size))

    @property
    def n_pairs(self):
        return int(np.count_nonzero(~np.isnan(self.distances)))


@dataclass(eq=False)
class InstabilityPath:
    cells: list
    B: int
    master_seed: object
    n: int

    @property
    def argmin(self):
        """(h, q) of least instability; ties prefer larger h, then smaller q."""
        valid = [c for c in self.cells if not math.isnan(c.s_hat)]
        if not valid:
            return None
        best = min(valid, key=lambda c: (c.s_hat, -c.h, c.q))
        return best.h, best.q

    @property
    def argmin_cell(self):
        hq = self.argmin
        return None if hq is None else self.cell(*hq)

    def cell(self, h, q):
        for c in self.cells:
            if c.h == h and c.q == q:
                return c
        raise KeyError((h, q))

    def path(self, q):
        """Cells at fixed ``q`` ordered by ``h``."""
        return sorted((c for c in self.cells if c.q == q), key=lambda c: c.h)


_WORKER_STATE = {}


def _init_worker(X, master_seed, q_values, h_values, k, univariate):
    _WORKER_STATE.update(
        X=X, master_seed=master_seed, q_values=q_values, h_values=h_values, k=k, univariate=univariate
    )


def _worker(b):
    s = _WORKER_STATE
    return _pair_distances(
        s["X"], pair_seed_sequence(s["master_seed"], b), s["q_values"], s["h_values"], s["k"], s["univariate"]
    )


def _run_pairs(X, master_seed, q_values, h_values, k, B, workers, univariate):
    args = (X, master_seed, list(q_values), list(h_values), k, univariate)
    if workers is None or workers <= 1:
        _init_worker(*args)
        for b in range(B):
            yield b, _worker(b)
        return
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=args) as pool:
        yield from enumerate(pool.map(_worker, range(B)))


def grid_search(X, h_grid=DEFAULT_H_GRID, q_grid=(2,), k=None, B=50, master_seed=0,
                on_error="abort", workers=1, h_counts=None):
    """Instability ``s_hat(h, q)`` over a grid, recycling work across ``h``.

    Each pair's resamples, embeddings and projection depths are computed once
    per ``q`` and shared by every ``h``, so cells in one ``q`` column are
    evaluated on the same resamples.

    Parameters
    ----------
    X : array-like of shape (n, p)
    h_grid : sequence of float
        Subset sizes as fractions of ``n`` in (0, 1); ``h = floor(frac n)``.
    q_grid : sequence of int
    k : int, optional
        Directions per depth evaluation, default ``max(1000, 10 q)``.
    B : int
        Number of bootstrap pairs.
    master_seed : int
    on_error : {"abort", "skip"}
        ``"skip"`` drops failed pairs from the affected cells and records
        them in ``failed_pairs``.
    workers : int
        Process count; results do not depend on it.
    h_counts : sequence of int, optional
        Explicit subset sizes, overriding ``h_grid``.

    Returns
    -------
    InstabilityPath
    """
    X = check_data(X)
    n = X.shape[0]
    if B < 1:
        raise ValueError("B must be at least 1")
    if on_error not in ("abort", "skip"):
        raise ValueError("on_error must be 'abort' or 'skip'")
    if h_counts is not None:
        h_values = [int(h) for h in h_counts]
        fracs = [h / n for h in h_values]
    else:
        fracs = list(h_grid)
        h_values = [h_from_fraction(f, n) for f in fracs]
    q_values = [int(q) for q in q_grid]
    if not h_values or not q_values:
        raise ValueError("grids must be nonempty")
    _validate_grid(X, h_values, q_values)
    univariate = X.shape[1] == 1

    dist = np.full((B, len(q_values), len(h_values)), np.nan)
    failed = {}
    for b, (d, errors) in _run_pairs(X, master_seed, q_values, h_values, k, B, workers, univariate):
        if errors and on_error == "abort":
            (qi, hi), exc = min(errors.items())
            raise PairFailure(b, f"h={h_values[hi]}, q={q_values[qi]}: {exc}")
        for key, exc in errors.items():
            failed.setdefault(key, []).append(b)
            log.warning("pair %d failed at h=%d, q=%d: %s", b, h_values[key[1]], q_values[key[0]], exc)
        dist[b] = d
        log.info("bootstrap pair %d/%d done", b + 1, B)

    cells = []
    for qi, q in enumerate(q_values):
        for hi, h in enumerate(h_values):
            cells.append(InstabilityCell(h, q, dist[:, qi, hi].copy(), fracs[hi], failed.get((qi, hi), [])))
    return InstabilityPath(cells, B, master_seed, n)


def instability(X, h, q, k=None, B=50, master_seed=0, on_error="abort", workers=1):
    """Mean corrected clustering distance over ``B`` bootstrap pairs at one (h, q)."""
    path = grid_search(X, q_grid=[q], k=k, B=B, master_seed=master_seed,
                       on_error=on_error, workers=workers, h_counts=[h])
    return path.cells[0]
