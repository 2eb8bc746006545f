"""Correspondence bounds, distributional statistics and experiment checks."""

from .experiments import (
    SCENARIOS,
    coupled_environment,
    crt_cross_check,
    drifted_potential_check,
    localization_stat,
    localization_trend,
    sinai_comparison,
    sinai_trend,
)
from .mmspace import (
    Correspondence,
    Coupling,
    FinitePointedMMSpace,
    brute_force_min_bound,
    canonical_correspondence,
    discrepancy,
    distortion,
    distortion_bruteforce,
    restrict,
    spatial_gh_bound,
)
from .stats import (
    interquartile_range,
    ks_between_laws,
    ks_distance,
    ks_distance_bruteforce,
    mean_and_se,
    variance_and_se,
    weighted_quantile,
    z_score,
)
