"""Distributional statistics used by the checks."""

import numpy as np

from ..exceptions import InvalidParameterError

__all__ = [
    "ks_distance",
    "ks_distance_bruteforce",
    "ks_between_laws",
    "interquartile_range",
    "weighted_quantile",
    "mean_and_se",
    "variance_and_se",
    "z_score",
]


def ks_distance(sample_a, sample_b):
    """Two-sample Kolmogorov-Smirnov statistic ``sup |F_a - F_b|``."""
    a = np.sort(np.asarray(sample_a, dtype=float).ravel())
    b = np.sort(np.asarray(sample_b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise InvalidParameterError("samples must be nonempty")
    x = np.concatenate([a, b])
    fa = np.searchsorted(a, x, side="right") / a.size
    fb = np.searchsorted(b, x, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_distance_bruteforce(sample_a, sample_b):
    """Evaluate both empirical CDFs at every data point, one point at a time."""
    a = list(np.asarray(sample_a, dtype=float).ravel())
    b = list(np.asarray(sample_b, dtype=float).ravel())
    best = 0.0
    for x in a + b:
        fa = sum(1 for v in a if v <= x) / len(a)
        fb = sum(1 for v in b if v <= x) / len(b)
        best = max(best, abs(fa - fb))
    return best


def ks_between_laws(x_a, p_a, x_b, p_b):
    """Sup distance between the CDFs of two discrete laws (each normalized
    to total mass one first)."""
    x_a, p_a = np.asarray(x_a, dtype=float), np.asarray(p_a, dtype=float)
    x_b, p_b = np.asarray(x_b, dtype=float), np.asarray(p_b, dtype=float)
    if p_a.sum() <= 0 or p_b.sum() <= 0:
        raise InvalidParameterError("laws must have positive mass")
    oa, ob = np.argsort(x_a), np.argsort(x_b)
    xa, ca = x_a[oa], np.cumsum(p_a[oa]) / p_a.sum()
    xb, cb = x_b[ob], np.cumsum(p_b[ob]) / p_b.sum()
    pts = np.union1d(xa, xb)

    def cdf(xs, cs, t):
        k = np.searchsorted(xs, t, side="right") - 1
        return np.where(k >= 0, cs[np.maximum(k, 0)], 0.0)

    return float(np.max(np.abs(cdf(xa, ca, pts) - cdf(xb, cb, pts))))


def weighted_quantile(x, p, q):
    """Left-continuous inverse of the CDF of a discrete law."""
    x, p = np.asarray(x, dtype=float), np.asarray(p, dtype=float)
    o = np.argsort(x)
    c = np.cumsum(p[o]) / p.sum()
    k = np.searchsorted(c, np.asarray(q, dtype=float) - 1e-15, side="left")
    return x[o][np.minimum(k, x.size - 1)]


def interquartile_range(x, p=None):
    if p is None:
        q1, q3 = np.percentile(np.asarray(x, dtype=float), [25, 75])
        return float(q3 - q1)
    q1, q3 = weighted_quantile(x, p, [0.25, 0.75])
    return float(q3 - q1)


def mean_and_se(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


def variance_and_se(x):
    """Sample variance and its standard error from the fourth central moment."""
    x = np.asarray(x, dtype=float)
    n = x.size
    c = x - x.mean()
    s2 = float(c @ c / (n - 1))
    m4 = float(np.mean(c**4))
    se = np.sqrt(max(m4 - s2 * s2 * (n - 3) / (n - 1), 0.0) / n)
    return s2, float(se)


def z_score(estimate, target, se):
    return float(abs(estimate - target) / se) if se > 0 else (0.0 if estimate == target else np.inf)
