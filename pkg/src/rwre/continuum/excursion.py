"""Excursions on a uniform grid and the real trees they code.

Grid point ``k`` stands for time ``k / N``; ``N + 1`` values are stored with
``g[0] = g[N] = 0``. Distances between grid times use the running minimum of
the stored values, i.e. the tree coded by the linear interpolation of ``g``.
"""

from dataclasses import dataclass, field
import io

import numpy as np
from numba import njit

from .._rmq import SparseTableArgmin
from .._validation import check_positive_int, check_random_state
from ..exceptions import InvalidParameterError

__all__ = [
    "Excursion",
    "CodedTree",
    "sample_excursion",
    "sample_excursion_bessel",
    "tent",
    "tree_distance",
    "write_grid_csv",
]


@dataclass(frozen=True, eq=False)
class Excursion:
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = np.array(self.values, dtype=float)
        if g.ndim != 1 or g.size < 3:
            raise InvalidParameterError("an excursion needs at least 3 grid values")
        if g[0] != 0 or g[-1] != 0 or np.any(g < 0):
            raise InvalidParameterError("excursion must vanish at both ends and be nonnegative")
        g.setflags(write=False)
        object.__setattr__(self, "values", g)
        object.__setattr__(self, "_rmq", SparseTableArgmin(g))

    @property
    def N(self):
        return self.values.size - 1

    @property
    def grid(self):
        return np.arange(self.N + 1) / self.N

    def index(self, t):
        """Nearest grid index of time ``t`` (ties round half to even)."""
        t = np.asarray(t, dtype=float)
        if np.any((t < 0) | (t > 1)):
            raise InvalidParameterError("times must lie in [0, 1]")
        k = np.rint(t * self.N).astype(np.int64)
        return k if k.ndim else int(k)

    def running_min(self, i, j):
        """``m_g`` between grid indices (vectorized)."""
        return self._rmq.min(i, j)

    def argmin(self, i, j):
        return self._rmq.argmin(i, j)


def sample_excursion(N, rng=None):
    """Normalized Brownian excursion by the Vervaat transform.

    A Gaussian bridge on ``N`` steps is rotated to start at its (first)
    minimum and shifted up by it.
    """
    N = check_positive_int(N, "N", minimum=2)
    rng = check_random_state(rng)
    s = np.concatenate([[0.0], np.cumsum(rng.standard_normal(N))]) / np.sqrt(N)
    b = s - np.arange(N + 1) / N * s[-1]
    tau = int(np.argmin(b[:-1]))
    e = np.empty(N + 1)
    e[:N] = np.roll(b[:-1], -tau) - b[tau]
    e[N] = 0.0
    e[0] = 0.0
    return Excursion(np.maximum(e, 0.0))


def sample_excursion_bessel(N, rng=None):
    """Excursion as the norm of a three-dimensional Brownian bridge.

    An independent construction used to cross-check :func:`sample_excursion`;
    its finite-dimensional laws on the grid are exact.
    """
    N = check_positive_int(N, "N", minimum=2)
    rng = check_random_state(rng)
    s = np.zeros((N + 1, 3))
    s[1:] = np.cumsum(rng.standard_normal((N, 3)), axis=0) / np.sqrt(N)
    b = s - (np.arange(N + 1) / N)[:, None] * s[-1]
    e = np.linalg.norm(b, axis=1)
    e[0] = e[-1] = 0.0
    return Excursion(e)


def tent(N):
    """``g(t) = min(t, 1 - t)`` on the grid (N even)."""
    N = check_positive_int(N, "N", minimum=2)
    t = np.arange(N + 1) / N
    return Excursion(np.minimum(t, 1 - t))


@njit(cache=True)
def _classes(g):
    """Label grid points by the tree point they project to."""
    n = g.size
    lab = np.empty(n, dtype=np.int64)
    sh = np.empty(n)
    sl = np.empty(n, dtype=np.int64)
    top = -1
    nxt = 0
    for k in range(n):
        while top >= 0 and sh[top] > g[k]:
            top -= 1
        if top >= 0 and sh[top] == g[k]:
            lab[k] = sl[top]
        else:
            top += 1
            sh[top] = g[k]
            sl[top] = nxt
            lab[k] = nxt
            nxt += 1
    return lab


@dataclass(frozen=True, eq=False)
class CodedTree:
    """The real tree coded by an excursion, seen through its grid.

    Grid points ``0..N-1`` each carry mass ``1 / N`` (the cell to their
    right), which is the image of Lebesgue measure.
    """

    excursion: Excursion

    def __post_init__(self):
        lab = _classes(self.excursion.values)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @property
    def N(self):
        return self.excursion.N

    @property
    def g(self):
        return self.excursion.values

    def distance(self, i, j):
        """``g(i) + g(j) - 2 m_g(i, j)`` on grid indices (vectorized)."""
        g = self.g
        i = np.asarray(i)
        j = np.asarray(j)
        d = g[i] + g[j] - 2.0 * self.excursion.running_min(i, j)
        return np.maximum(d, 0.0)

    def root_distance(self, i):
        return self.g[np.asarray(i)]

    def same_point(self, i, j):
        return self.labels[i] == self.labels[j]

    @property
    def root_class(self):
        return int(self.labels[0])

    def ball_mass(self, center, radius):
        """Mass-measure of the closed ball, as Lebesgue measure of the times
        whose grid point lies in it."""
        d = self.distance(np.full(self.N, center), np.arange(self.N))
        return np.count_nonzero(d <= radius) / self.N


def tree_distance(t, s, u):
    """Distance between the tree points at times ``s`` and ``u`` (snapped to
    the nearest grid time)."""
    i, j = t.excursion.index(s), t.excursion.index(u)
    d = t.distance(i, j)
    return float(d) if np.ndim(d) == 0 else d


def write_grid_csv(grid, columns, fh=None):
    """CSV with a ``t`` column followed by the named value columns."""
    buf = io.StringIO() if fh is None else fh
    names = list(columns)
    buf.write(",".join(["t"] + names) + "\n")
    cols = [np.asarray(columns[k], dtype=float) for k in names]
    for k, t in enumerate(np.asarray(grid, dtype=float)):
        buf.write(",".join([repr(float(t))] + [repr(float(c[k])) for c in cols]) + "\n")
    return buf.getvalue() if fh is None else None
