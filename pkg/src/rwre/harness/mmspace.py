"""Finite pointed metric measure spaces and correspondence-based bounds.

The bound reported by :func:`spatial_gh_bound` is

    dis(C) / 2 + D(pi; nu, nu') + pi(complement of C) + sup_C |phi(z) - phi'(z')|

where ``D`` is the total variation of both marginal defects measured as the
sum of absolute differences (no factor 1/2), so moving mass ``eps`` at a
single point changes ``D`` by exactly ``eps``.
"""

from dataclasses import dataclass, field
import itertools

import numpy as np
from scipy.optimize import linprog

from ..exceptions import ConsistencyError, InvalidParameterError

__all__ = [
    "FinitePointedMMSpace",
    "Correspondence",
    "Coupling",
    "distortion",
    "distortion_bruteforce",
    "discrepancy",
    "spatial_gh_bound",
    "canonical_correspondence",
    "restrict",
    "brute_force_min_bound",
]


@dataclass(frozen=True, eq=False)
class FinitePointedMMSpace:
    """Points ``0..n-1`` with a metric, masses, a root and optional marks.

    The metric is either a dense matrix ``dist`` or, for subsets of the line,
    coordinates ``coords`` with ``d(x, y) = |coords[x] - coords[y]|``.
    """

    mass: np.ndarray = field(repr=False)
    root: int = 0
    dist: np.ndarray = field(default=None, repr=False)
    coords: np.ndarray = field(default=None, repr=False)
    marks: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        n = mass.size
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise InvalidParameterError("masses must be finite and nonnegative")
        if (self.dist is None) == (self.coords is None):
            raise InvalidParameterError("give exactly one of dist and coords")
        if self.dist is not None:
            D = np.asarray(self.dist, dtype=float)
            if D.shape != (n, n):
                raise ConsistencyError("distance matrix does not match the masses")
            if np.any(np.abs(D - D.T) > 1e-9) or np.any(np.abs(np.diag(D)) > 1e-9) or np.any(D < -1e-9):
                raise InvalidParameterError("dist must be symmetric, nonnegative, zero on the diagonal")
            object.__setattr__(self, "dist", D)
        else:
            c = np.asarray(self.coords, dtype=float)
            if c.shape != (n,):
                raise ConsistencyError("coords do not match the masses")
            object.__setattr__(self, "coords", c)
        if not 0 <= self.root < n:
            raise InvalidParameterError("root must be one of the points")
        if self.marks is not None:
            m = np.asarray(self.marks, dtype=float)
            if m.ndim == 1:
                m = m[:, None]
            if m.shape[0] != n:
                raise ConsistencyError("marks do not match the points")
            object.__setattr__(self, "marks", m)
        object.__setattr__(self, "mass", mass)

    @property
    def n(self):
        return int(self.mass.size)

    @property
    def is_line(self):
        return self.coords is not None

    def d(self, i, j):
        if self.is_line:
            return np.abs(self.coords[np.asarray(i)] - self.coords[np.asarray(j)])
        return self.dist[np.asarray(i), np.asarray(j)]

    def dense(self):
        if self.is_line:
            return np.abs(self.coords[:, None] - self.coords[None, :])
        return self.dist

    def check_metric(self, tol=1e-9):
        """True when the triangle inequality holds within ``tol``."""
        D = self.dense()
        for k in range(self.n):
            if np.any(D > D[:, [k]] + D[[k], :] + tol):
                return False
        return True

    def root_distance(self):
        return self.d(self.root, np.arange(self.n))


def restrict(X, radius, index=None):
    """Closed ball of ``radius`` about the root; returns the subspace and,
    with ``index=True``, the kept point labels."""
    keep = np.flatnonzero(X.root_distance() <= radius)
    new_root = int(np.searchsorted(keep, X.root))
    sub = FinitePointedMMSpace(
        X.mass[keep],
        new_root,
        None if X.dist is None else X.dist[np.ix_(keep, keep)],
        None if X.coords is None else X.coords[keep],
        None if X.marks is None else X.marks[keep],
    )
    return (sub, keep) if index else sub


@dataclass(frozen=True, eq=False)
class Correspondence:
    """Index pairs ``(i, j)`` relating points of X to points of X'."""

    pairs: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "pairs", p)

    def __len__(self):
        return int(self.pairs.shape[0])

    def is_valid(self, X, Y):
        if len(self) == 0:
            return False
        left = np.unique(self.pairs[:, 0])
        right = np.unique(self.pairs[:, 1])
        covers = np.array_equal(left, np.arange(X.n)) and np.array_equal(right, np.arange(Y.n))
        return bool(covers and self.has_root(X, Y))

    def has_root(self, X, Y):
        return bool(np.any((self.pairs[:, 0] == X.root) & (self.pairs[:, 1] == Y.root)))


@dataclass(frozen=True, eq=False)
class Coupling:
    """Sparse nonnegative measure on ``X x X'`` given as triplets."""

    rows: np.ndarray = field(repr=False)
    cols: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    shape: tuple = (0, 0)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0):
            raise InvalidParameterError("coupling weights must be nonnegative")
        object.__setattr__(self, "rows", np.asarray(self.rows, dtype=np.int64))
        object.__setattr__(self, "cols", np.asarray(self.cols, dtype=np.int64))
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_dense(cls, joint):
        J = np.asarray(joint, dtype=float)
        r, c = np.nonzero(J)
        return cls(r, c, J[r, c], J.shape)

    def dense(self):
        J = np.zeros(self.shape)
        np.add.at(J, (self.rows, self.cols), self.weights)
        return J

    def marginals(self):
        a = np.bincount(self.rows, self.weights, minlength=self.shape[0])
        b = np.bincount(self.cols, self.weights, minlength=self.shape[1])
        return a, b

    def mass_outside(self, corr):
        key = self.rows * self.shape[1] + self.cols
        inside = np.isin(key, corr.pairs[:, 0] * self.shape[1] + corr.pairs[:, 1])
        return float(self.weights[~inside].sum())


def _line_distortion(a, b):
    order = np.lexsort((b, a))
    if np.all(np.diff(b[order]) >= 0):
        D = a - b
        return float(D.max() - D.min())
    return None


def distortion(c, X, Y, chunk=2048):
    """``sup |d(x, y) - d'(x', y')|`` over pairs of pairs of ``c``."""
    if len(c) == 0:
        raise InvalidParameterError("correspondence is empty")
    i, j = c.pairs[:, 0], c.pairs[:, 1]
    if X.is_line and Y.is_line:
        fast = _line_distortion(X.coords[i], Y.coords[j])
        if fast is not None:
            return fast
    best = 0.0
    for s in range(0, len(c), chunk):
        a = X.d(i[s : s + chunk, None], i[None, :])
        b = Y.d(j[s : s + chunk, None], j[None, :])
        best = max(best, float(np.max(np.abs(a - b))))
    return best


def distortion_bruteforce(c, X, Y):
    """Literal double loop over pairs of pairs (an oracle for small inputs)."""
    best = 0.0
    pairs = [tuple(p) for p in c.pairs]
    for x, x2 in pairs:
        for y, y2 in pairs:
            best = max(best, abs(float(X.d(x, y)) - float(Y.d(x2, y2))))
    return best


def discrepancy(pi, nu, nu2):
    a, b = pi.marginals()
    nu, nu2 = np.asarray(nu, dtype=float), np.asarray(nu2, dtype=float)
    if a.shape != nu.shape or b.shape != nu2.shape:
        raise ConsistencyError("coupling shape does not match the measures")
    return float(np.abs(a - nu).sum() + np.abs(b - nu2).sum())


def spatial_gh_bound(X, Y, c, pi, return_parts=False):
    if not c.has_root(X, Y):
        raise InvalidParameterError("correspondence must contain the root pair")
    parts = {
        "distortion": 0.5 * distortion(c, X, Y),
        "discrepancy": discrepancy(pi, X.mass, Y.mass),
        "outside": pi.mass_outside(c),
        "marks": 0.0,
    }
    if X.marks is not None and Y.marks is not None:
        diff = X.marks[c.pairs[:, 0]] - Y.marks[c.pairs[:, 1]]
        parts["marks"] = float(np.max(np.linalg.norm(diff, axis=1)))
    total = sum(parts.values())
    return (total, parts) if return_parts else total


def canonical_correspondence(kind, size, grid):
    """Pairs from floor maps.

    ``lattice``: ``size = m``, ``grid`` holds points ``s`` of the line and
    ``lattice_sites`` are ``floor(m s)``; the pairs are ``(site, k)`` with
    ``k`` the grid index. ``contour``: ``size = n`` vertices, ``grid`` holds
    times ``t`` in [0, 1] paired with contour step ``floor(2 (n - 1) t)``
    (clamped to the last step at ``t = 1``); the first column then holds
    contour indices, to be mapped to vertices with the visit order.
    """
    grid = np.asarray(grid, dtype=float)
    k = np.arange(grid.size)
    if kind == "lattice":
        sites = np.floor(size * grid + 1e-9).astype(np.int64)
        return Correspondence(np.column_stack([sites, k]))
    if kind == "contour":
        steps = 2 * (int(size) - 1)
        i = np.minimum(np.floor(steps * grid + 1e-9).astype(np.int64), steps)
        return Correspondence(np.column_stack([i, k]))
    raise InvalidParameterError(f"unknown correspondence kind {kind!r}")


def brute_force_min_bound(X, Y):
    """Minimum of the bound over every correspondence of two small spaces.

    For each correspondence the coupling term is a linear program: minimize
    ``D(pi) + pi(outside)`` over nonnegative ``pi``.
    """
    if X.n * Y.n > 12:
        raise InvalidParameterError("brute force is limited to tiny spaces")
    cells = [(a, b) for a in range(X.n) for b in range(Y.n)]
    best = np.inf
    best_c = None
    for r in range(1, len(cells) + 1):
        for subset in itertools.combinations(range(len(cells)), r):
            pairs = np.array([cells[s] for s in subset])
            c = Correspondence(pairs)
            if not c.is_valid(X, Y):
                continue
            val = 0.5 * distortion(c, X, Y) + _best_coupling_cost(X, Y, subset, len(cells))
            if X.marks is not None and Y.marks is not None:
                diff = X.marks[pairs[:, 0]] - Y.marks[pairs[:, 1]]
                val += float(np.max(np.linalg.norm(diff, axis=1)))
            if val < best - 1e-12:
                best, best_c = val, c
    return best, best_c


def _best_coupling_cost(X, Y, inside, ncell):
    # variables: pi (ncell), s+ s- for X marginals, t+ t- for Y marginals
    nx, ny = X.n, Y.n
    nv = ncell + 2 * nx + 2 * ny
    cost = np.zeros(nv)
    out = np.ones(ncell)
    out[list(inside)] = 0.0
    cost[:ncell] = out
    cost[ncell:] = 1.0
    A = np.zeros((nx + ny, nv))
    for k in range(ncell):
        a, b = divmod(k, ny)
        A[a, k] = 1.0
        A[nx + b, k] = 1.0
    for a in range(nx):
        A[a, ncell + a] = -1.0
        A[a, ncell + nx + a] = 1.0
    for b in range(ny):
        A[nx + b, ncell + 2 * nx + b] = -1.0
        A[nx + b, ncell + 2 * nx + ny + b] = 1.0
    rhs = np.r_[X.mass, Y.mass]
    res = linprog(cost, A_eq=A, b_eq=rhs, bounds=(0, None), method="highs")
    return float(res.fun)
