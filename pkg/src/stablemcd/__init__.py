"""Spectral minimum covariance determinant estimation with instability-based tuning."""

from ._backend import BACKEND
from .depth import DirectionSet, default_directions, projection_depths, sample_directions
from .exceptions import DegenerateCorrectionError, PairFailure, RankDeficientScatterError, StableMCDError
from .mcd import LocationScatter, c_step, concentrate, subset_estimate, univariate_mcd_exact
from .metrics import detection_report, estimation_report
from .reweight import chi2_quantile, fdb, reweight
from .spectral import fit_embedding, spectral_mcd
from .stability import (
    clustering_distance,
    corrected_clustering_distance,
    grid_search,
    instability,
    probability_distance,
)

__all__ = [
    "BACKEND",
    "DegenerateCorrectionError",
    "DirectionSet",
    "LocationScatter",
    "PairFailure",
    "RankDeficientScatterError",
    "StableMCDError",
    "c_step",
    "chi2_quantile",
    "clustering_distance",
    "concentrate",
    "corrected_clustering_distance",
    "default_directions",
    "detection_report",
    "estimation_report",
    "fdb",
    "fit_embedding",
    "grid_search",
    "instability",
    "probability_distance",
    "projection_depths",
    "reweight",
    "sample_directions",
    "spectral_mcd",
    "subset_estimate",
    "univariate_mcd_exact",
]
