"""Centred Gaussian fields indexed by a coded tree.

``Cov(phi(s), phi(u)) = m_g(s, u)`` in each coordinate: the root distance of
the most recent common ancestor. A non-identity coefficient is applied as a
factor ``A`` with ``Sigma = A A^T``.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .._validation import check_positive_int, check_random_state
from ..exceptions import InvalidParameterError, NumericalError

__all__ = ["GaussianField", "sample_gaussian_field", "sample_field_path"]

MAX_DENSE_TIMES = 2000


@dataclass(frozen=True, eq=False)
class GaussianField:
    """Field values at grid indices ``times``; ``values`` has shape
    ``(len(times), d)``."""

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    coef: np.ndarray = None

    @property
    def d(self):
        return int(self.values.shape[1])

    @property
    def first(self):
        return self.values[:, 0]


def _coef(coef, d):
    if coef is None:
        return np.eye(d)
    A = np.atleast_2d(np.asarray(coef, dtype=float))
    if A.shape != (d, d):
        raise InvalidParameterError(f"coefficient factor must be {d}x{d}")
    return A


def sample_gaussian_field(t, sample_times, d=1, rng=None, *, coef=None, jitter=1e-12):
    """Sample the field at the given grid indices by a dense factorization.

    Times in the root class are set to 0 and repeated tree points share one
    value. Up to 2000 times are allowed.
    """
    rng = check_random_state(rng)
    d = check_positive_int(d, "d")
    A = _coef(coef, d)
    idx = np.asarray(sample_times, dtype=np.int64).ravel()
    if idx.size > MAX_DENSE_TIMES:
        raise InvalidParameterError(f"at most {MAX_DENSE_TIMES} sample times are supported")
    if np.any((idx < 0) | (idx > t.N)):
        raise InvalidParameterError("sample times must be grid indices in [0, N]")
    lab = t.labels[idx]
    keep = lab != t.root_class
    uniq, first, inverse = np.unique(lab[keep], return_index=True, return_inverse=True)
    rep = idx[keep][first]
    values = np.zeros((idx.size, d))
    if rep.size:
        cov = t.excursion.running_min(rep[:, None], rep[None, :])
        chol = None
        scale = float(np.max(np.diag(cov)))
        for eps in (0.0, jitter * scale):
            try:
                chol = np.linalg.cholesky(cov + eps * np.eye(rep.size))
                break
            except np.linalg.LinAlgError:
                continue
        if chol is None:
            raise NumericalError("covariance is not positive definite within the jitter")
        z = chol @ rng.standard_normal((rep.size, d))
        values[keep] = (z @ A.T)[inverse]
    return GaussianField(idx, values, A @ A.T)


@njit(cache=True)
def _stack_field(rng, g):
    """Exact Brownian motion along the tree coded by the interpolated g."""
    n = g.size
    out = np.empty(n)
    sh = np.empty(n)
    sv = np.empty(n)
    top = 0
    sh[0] = 0.0
    sv[0] = 0.0
    out[0] = 0.0
    for k in range(1, n):
        b = min(g[k - 1], g[k])
        hi_h = -1.0
        hi_v = 0.0
        while sh[top] > b:
            hi_h = sh[top]
            hi_v = sv[top]
            top -= 1
        if sh[top] < b:
            if hi_h >= 0.0:
                # branch point inside the segment between two stack entries:
                # Brownian bridge interpolation
                lo_h = sh[top]
                lo_v = sv[top]
                w = (b - lo_h) / (hi_h - lo_h)
                var = (b - lo_h) * (hi_h - b) / (hi_h - lo_h)
                v = lo_v + w * (hi_v - lo_v) + np.sqrt(var) * rng.standard_normal()
            else:
                v = sv[top] + np.sqrt(b - sh[top]) * rng.standard_normal()
            top += 1
            sh[top] = b
            sv[top] = v
        if g[k] > b:
            v = sv[top] + np.sqrt(g[k] - b) * rng.standard_normal()
            top += 1
            sh[top] = g[k]
            sv[top] = v
        out[k] = sv[top]
    return out


def sample_field_path(t, d=1, rng=None, *, coef=None):
    """The field at every grid index in O(N) by scanning the contour.

    Exact for the tree coded by the linear interpolation of the grid values
    (covariance is the grid running minimum). Returns shape ``(N + 1, d)``.
    """
    rng = check_random_state(rng)
    d = check_positive_int(d, "d")
    A = _coef(coef, d)
    g = np.ascontiguousarray(t.g)
    z = np.column_stack([_stack_field(rng, g) for _ in range(d)])
    return GaussianField(np.arange(t.N + 1), z @ A.T, A @ A.T)
