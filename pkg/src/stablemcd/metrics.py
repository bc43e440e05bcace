"""Detection and estimation quality measures."""

from dataclasses import dataclass

import numpy as np
from scipy import linalg


@dataclass(frozen=True)
class DetectionReport:
    tp: int
    fp: int
    fn: int
    tn: int
    f1: float
    elapsed_seconds: float = 0.0
    degenerate: bool = False

    @property
    def n(self):
        return self.tp + self.fp + self.fn + self.tn


def detection_report(pred, truth, elapsed=0.0):
    """Confusion counts and F1 with outliers (label 1) as the positive class.

    When neither map flags anything F1 is reported as 1 and ``degenerate``
    is set.
    """
    pred = np.asarray(pred).ravel().astype(bool)
    truth = np.asarray(truth).ravel().astype(bool)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction has {pred.size} labels, truth has {truth.size}")
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    tn = int(np.count_nonzero(~pred & ~truth))
    denom = 2 * tp + fp + fn
    if denom == 0:
        return DetectionReport(tp, fp, fn, tn, 1.0, float(elapsed), True)
    return DetectionReport(tp, fp, fn, tn, 2.0 * tp / denom, float(elapsed))


@dataclass(frozen=True)
class EstimationReport:
    e_mu: float
    e_sigma: float
    kl: float


def _spd_cholesky(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    if not np.allclose(a, a.T, rtol=1e-10, atol=0.0):
        raise ValueError(f"{name} is not symmetric")
    try:
        return linalg.cholesky(a, lower=True)
    except linalg.LinAlgError:
        raise ValueError(f"{name} is not positive definite") from None


def estimation_report(mu_hat, sigma_hat, mu_true, sigma_true):
    """Mean error, log10 condition number of ``sigma_hat sigma_true^-1`` and KL.

    ``kl = tr(M) - log det(M) - p`` with ``M = sigma_hat sigma_true^-1``.
    """
    mu_hat = np.asarray(mu_hat, dtype=np.float64).ravel()
    mu_true = np.asarray(mu_true, dtype=np.float64).ravel()
    l_hat = _spd_cholesky(sigma_hat, "sigma_hat")
    l_true = _spd_cholesky(sigma_true, "sigma_true")
    p = l_hat.shape[0]
    if l_true.shape[0] != p or mu_hat.size != p or mu_true.size != p:
        raise ValueError("dimension mismatch between estimates and truth")
    m = linalg.cho_solve((l_true, True), np.asarray(sigma_hat, dtype=np.float64).T).T
    e_sigma = float(np.log10(np.linalg.cond(m)))
    log_det = 2.0 * (np.log(np.diag(l_hat)).sum() - np.log(np.diag(l_true)).sum())
    kl = float(np.trace(m) - log_det - p)
    return EstimationReport(float(np.linalg.norm(mu_hat - mu_true)), e_sigma, max(kl, 0.0))
