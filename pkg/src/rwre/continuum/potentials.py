"""Continuum potentials and the metric and measure they distort.

For a potential ``psi`` on the grid of a coded tree, the root integral

    I(k) = integral over the root path of p(k) of exp(c * psi) d(length)

is computed by a stack scan over the contour (trapezoid rule in height; a
branch point met on the way down takes the value interpolated along the
segment it lies on).
Distances follow from ``I(s) + I(u) - 2 I(branch point)``; the tilted
excursion is ``I`` with ``c`` replaced by ``-c``.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .._validation import check_positive, check_probability, check_random_state
from ..exceptions import ConsistencyError, InvalidParameterError
from ..treecore import accumulate_from_root, contour
from .excursion import Excursion
from .field import sample_field_path

__all__ = [
    "DistortedTree",
    "ContinuumPotential",
    "root_integral",
    "distorted_metric",
    "tilted_excursion",
    "distorted_contour",
    "make_potential",
    "POTENTIAL_KINDS",
]

POTENTIAL_KINDS = ("two-sided-bm", "poisson-log", "gaussian-drift")


@njit(cache=True)
def _root_integral(g, f):
    n = g.size
    out = np.empty(n)
    sh = np.empty(n)
    sf = np.empty(n)
    si = np.empty(n)
    top = 0
    sh[0] = g[0]
    sf[0] = f[0]
    si[0] = 0.0
    out[0] = 0.0
    for k in range(1, n):
        hi_h = -1.0
        hi_i = 0.0
        while sh[top] > g[k]:
            hi_h = sh[top]
            hi_i = si[top]
            top -= 1
        if sh[top] == g[k]:
            out[k] = si[top]
            continue
        if hi_h >= 0.0:
            # a branch point inside a segment already integrated on the way
            # up: read the integral off that segment so it stays monotone
            w = (g[k] - sh[top]) / (hi_h - sh[top])
            val = si[top] + w * (hi_i - si[top])
        else:
            val = si[top] + 0.5 * (g[k] - sh[top]) * (sf[top] + f[k])
        top += 1
        sh[top] = g[k]
        sf[top] = f[k]
        si[top] = val
        out[k] = val
    return out


def root_integral(t, psi, coef):
    """``I`` at every grid index for the integrand ``exp(coef * psi)``."""
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (t.N + 1,):
        raise ConsistencyError("potential must have one value per grid point")
    return _root_integral(np.ascontiguousarray(t.g), np.exp(coef * psi))


@dataclass(frozen=True, eq=False)
class DistortedTree:
    """A coded tree with distances ``int exp(coef * psi)`` along geodesics."""

    tree: object = field(repr=False)
    psi: np.ndarray = field(repr=False)
    coef: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "I", root_integral(self.tree, self.psi, self.coef))

    def distance(self, i, j):
        a = self.tree.excursion.argmin(i, j)
        d = self.I[np.asarray(i)] + self.I[np.asarray(j)] - 2.0 * self.I[a]
        return np.maximum(d, 0.0)


def distorted_metric(t, psi, coef, s, u):
    """Distorted distance between grid indices ``s`` and ``u``."""
    d = DistortedTree(t, psi, float(coef)).distance(s, u)
    return float(d) if np.ndim(d) == 0 else d


def tilted_excursion(t, psi, coef):
    """Root integral of ``exp(-coef * psi)`` read along the contour."""
    e = root_integral(t, psi, -float(coef))
    e[0] = e[-1] = 0.0
    return Excursion(np.maximum(e, 0.0))


def distorted_contour(tree, V, gamma):
    """``C~(i)`` = sum of ``exp(-gamma V(w))`` over the root path of ``u_i``,
    root excluded, so that ``V = 0`` gives the contour heights."""
    V = np.asarray(V, dtype=float)
    if V.shape != (tree.n,):
        raise ConsistencyError("V must have one value per vertex")
    w = np.exp(-gamma * V)
    acc = accumulate_from_root(tree, w)
    return acc[contour(tree).visit_order]


@dataclass(frozen=True, eq=False)
class ContinuumPotential:
    """Sampled path of a potential on ``grid``; ``kind`` is one of
    ``POTENTIAL_KINDS``."""

    kind: str
    params: dict
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    @property
    def mesh(self):
        return float(self.grid[1] - self.grid[0])

    def __call__(self, x):
        return np.interp(x, self.grid, self.values)


def _line_grid(window, mesh):
    lo, hi = (float(w) for w in window)
    h = check_positive(mesh, "mesh")
    if not lo <= 0 <= hi:
        raise InvalidParameterError("window must contain 0")
    klo, khi = int(np.floor(lo / h + 1e-9)), int(np.ceil(hi / h - 1e-9))
    return np.arange(klo, khi + 1) * h, -klo


def make_potential(kind, params=None, window=None, mesh=None, rng=None):
    """Sample a potential.

    ``two-sided-bm``: ``sigma * W`` with W a two-sided Brownian motion,
    ``W(0) = 0``. ``poisson-log``: ``log(q/p) * N`` with N a two-sided Poisson
    process of rate ``lam`` (right-continuous, ``N(0) = 0``).
    ``gaussian-drift``: ``sqrt(2) phi + d(root, .)`` on the grid of
    ``params["tree"]`` (a CodedTree), with phi the tree-indexed field (or
    ``params["field"]`` when supplied).
    """
    params = dict(params or {})
    rng = check_random_state(rng)
    if kind == "two-sided-bm":
        x, k0 = _line_grid(window, mesh)
        sigma = float(params.get("sigma", 1.0))
        steps = sigma * np.sqrt(x[1] - x[0]) * rng.standard_normal(x.size - 1)
        w = np.concatenate([[0.0], np.cumsum(steps)])
        return ContinuumPotential(kind, params, x, w - w[k0])
    if kind == "poisson-log":
        x, k0 = _line_grid(window, mesh)
        p = check_probability(params.get("p", 0.5), "p")
        lam = check_positive(params.get("lam", 1.0), "lam")
        counts = rng.poisson(lam * (x[1] - x[0]), x.size - 1)  # points in (x_j, x_{j+1}]
        n = np.concatenate([[0], np.cumsum(counts)])
        n = n - n[k0]
        return ContinuumPotential(kind, params, x, np.log((1 - p) / p) * n)
    if kind == "gaussian-drift":
        t = params.get("tree")
        if t is None:
            raise InvalidParameterError("gaussian-drift needs params['tree'] (a CodedTree)")
        phi = params.get("field")
        if phi is None:
            phi = sample_field_path(t, 1, rng).first
        phi = np.asarray(phi, dtype=float)
        u = np.sqrt(2.0) * phi + t.g
        return ContinuumPotential(kind, params, t.excursion.grid, u)
    raise InvalidParameterError(f"unknown potential kind {kind!r}; expected one of {POTENTIAL_KINDS}")
