"""Conductance-based random walks on planted trees.

The conductance of edge ``{parent[u], u}`` is stored at ``c[u]`` and the
planted edge at ``c[0] = 1``. The potential is ``V(u) = -log c[u]`` (so
``V(root) = 0``), edge resistances are ``exp(V(u))`` and the reversible
measure is the total incident conductance.
"""

from dataclasses import dataclass, field
import io
import json

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels
from ._validation import check_positive, check_positive_int, check_random_state
from .exceptions import ConsistencyError, InvalidParameterError
from .treecore import OrderedTree, accumulate_from_root

__all__ = [
    "TreeConductances",
    "TreePotential",
    "TreeMetricMeasure",
    "TimedPath",
    "biased_conductances",
    "tree_potential",
    "tree_resistance",
    "tree_invariant",
    "metric_measure",
    "rescaled_bundle",
    "transition_matrix",
    "simulate_discrete",
    "simulate_speed_motion",
    "hit_and_occupation",
    "effective_resistance_variational",
    "write_timed_path_csv",
    "bundle_summary",
]


@dataclass(frozen=True, eq=False)
class TreeConductances:
    tree: OrderedTree = field(repr=False)
    c: np.ndarray = field(repr=False)
    beta: float = 1.0
    gamma: float = 1.0
    direction: np.ndarray = None
    mode: str = "max"

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        if c.shape != (self.tree.n,):
            raise ConsistencyError("one conductance per vertex (edge to parent) is required")
        if not np.all(np.isfinite(c) & (c > 0)):
            raise InvalidParameterError("conductances must be positive and finite")
        if c[0] != 1.0:
            raise InvalidParameterError(f"planted edge must have conductance 1, got {c[0]!r}")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @classmethod
    def uniform(cls, tree):
        return cls(tree, np.ones(tree.n))


def biased_conductances(marks, beta, gamma, direction=None, mode="max"):
    """Weakly biased conductances from a branching random walk.

    ``mode="max"``: ``c = beta ** (gamma * max(phi1(u), phi1(v)))`` with the
    first coordinate. ``mode="sum"``: ``c = exp(gamma * log(beta) *
    (phi(u) + phi(v)) . direction)``, where ``log(beta)`` plays the role of
    the strength of the drift. The base sits at the origin, so the planted
    edge gets conductance 1 in both modes.
    """
    beta = float(beta)
    if not (np.isfinite(beta) and beta >= 1):
        raise InvalidParameterError(f"beta must be >= 1, got {beta!r}")
    gamma = check_positive(gamma, "gamma")
    tree = marks.tree
    phi = marks.positions
    par = np.r_[0, tree.parent[1:]]  # root paired with itself stands for the base
    if mode == "max":
        if direction is not None:
            raise InvalidParameterError("direction is only used with mode='sum'")
        top = np.maximum(phi[:, 0], phi[par, 0])
        top[0] = max(phi[0, 0], 0.0)
        expo = gamma * np.log(beta) * top
    elif mode == "sum":
        ell = np.zeros(marks.d) if direction is None else np.asarray(direction, dtype=float)
        if direction is None:
            ell[0] = 1.0
        if ell.shape != (marks.d,) or abs(np.linalg.norm(ell) - 1.0) > 1e-12:
            raise InvalidParameterError("direction must be a unit vector in R^d")
        s = (phi + phi[par]) @ ell
        s[0] = phi[0] @ ell
        expo = gamma * np.log(beta) * s
        direction = ell
    else:
        raise InvalidParameterError(f"unknown bias mode {mode!r}")
    if expo[0] != 0.0:
        raise ConsistencyError("root is not at the origin; planted edge would not be 1")
    return TreeConductances(tree, np.exp(expo), beta, gamma, direction, mode)


@dataclass(frozen=True, eq=False)
class TreePotential:
    """``V`` per vertex plus the root-path resistance sums used for distances."""

    tree: OrderedTree = field(repr=False)
    V: np.ndarray = field(repr=False)

    def __post_init__(self):
        V = np.array(self.V, dtype=float)
        if V.shape != (self.tree.n,) or V[0] != 0.0:
            raise InvalidParameterError("V must have one entry per vertex with V(root) = 0")
        V.setflags(write=False)
        object.__setattr__(self, "V", V)
        R = accumulate_from_root(self.tree, np.exp(V))
        R.setflags(write=False)
        object.__setattr__(self, "root_resistance", R)

    @property
    def conductance(self):
        return np.exp(-self.V)


def tree_potential(cond):
    return TreePotential(cond.tree, -np.log(cond.c))


def tree_resistance(V, u1, u2):
    """Resistance between vertices (vectorized).

    Sums the edge resistances ``exp(V(w))`` over the vertices ``w`` of the
    geodesic other than the most recent common ancestor, i.e. over the edges
    of the path; for an ancestor ``u1`` of ``u2`` this is the sum over the
    half-open path ``(u1, u2]``.
    """
    R = V.root_resistance
    l = V.tree.lca(u1, u2)
    out = R[np.asarray(u1)] + R[np.asarray(u2)] - 2.0 * R[l]
    return np.maximum(out, 0.0) if np.ndim(out) else max(float(out), 0.0)


def tree_invariant(V, u=None):
    """``nu(u) = exp(-V(u)) + sum over children exp(-V(u_i))``; all vertices
    when ``u`` is None."""
    tree = V.tree
    g = np.exp(-V.V)
    nu = g.copy()
    if tree.n > 1:
        np.add.at(nu, tree.parent[1:], g[1:])
    if not tree.planted:
        nu[0] -= 1.0
    return nu if u is None else float(nu[u])


@dataclass(frozen=True, eq=False)
class TreeMetricMeasure:
    """Resistance metric and invariant measure with their scale factors.

    Rescaled distances are ``r_scale * r`` and masses ``nu_scale * nu``. When
    the tree is planted the base vertex (label ``n``) is included in the
    jump-rate table with mass ``nu_scale * 1``.
    """

    potential: TreePotential = field(repr=False)
    r_scale: float = 1.0
    nu_scale: float = 1.0

    @property
    def tree(self):
        return self.potential.tree

    @property
    def nu(self):
        return self.nu_scale * tree_invariant(self.potential)

    def r(self, u1, u2):
        return self.r_scale * tree_resistance(self.potential, u1, u2)

    def rate_table(self):
        """``(nbr, rate, deg)`` with ``rate = 1 / (2 nu(x) r(x, y))``."""
        tree = self.tree
        nbr, edge, deg = tree.adjacency()
        nu = tree_invariant(self.potential)
        if tree.planted:
            nu = np.r_[nu, 1.0]
        res = np.where(edge >= 0, np.exp(self.potential.V[np.maximum(edge, 0)]), np.inf)
        rate = 1.0 / (2.0 * self.nu_scale * nu[:, None] * self.r_scale * res)
        rate[edge < 0] = 0.0
        return nbr, rate, deg

    def total_rate(self):
        return self.rate_table()[1].sum(axis=1)


def metric_measure(V, r_scale=1.0, nu_scale=1.0):
    return TreeMetricMeasure(V, float(r_scale), float(nu_scale))


def rescaled_bundle(V, n=None):
    """Scale factors ``n^{-1/2}`` for r and ``(2n)^{-1}`` for nu."""
    n = V.tree.n if n is None else check_positive_int(n, "n")
    return TreeMetricMeasure(V, n**-0.5, 1.0 / (2 * n))


def transition_matrix(cond):
    """Dense jump matrix over ``n + planted`` vertices (small trees only)."""
    tree = cond.tree
    nbr, edge, deg = tree.adjacency()
    m = nbr.shape[0]
    w = np.where(edge >= 0, cond.c[np.maximum(edge, 0)], 0.0)
    P = np.zeros((m, m))
    rows = np.repeat(np.arange(m), nbr.shape[1])
    ok = edge.ravel() >= 0
    P[rows[ok], nbr.ravel()[ok]] = (w / w.sum(axis=1, keepdims=True)).ravel()[ok]
    return P


def _cum_table(cond):
    nbr, edge, deg = cond.tree.adjacency()
    w = np.where(edge >= 0, cond.c[np.maximum(edge, 0)], 0.0)
    cum = np.cumsum(w, axis=1) / w.sum(axis=1, keepdims=True)
    return nbr, cum, deg


def simulate_discrete(cond, start, steps, rng=None):
    """Path ``X_0..X_steps`` of the walk with transitions proportional to
    incident conductances; the base is vertex ``n``."""
    steps = check_positive_int(steps, "steps", minimum=0)
    rng = check_random_state(rng)
    nbr, cum, deg = _cum_table(cond)
    if not 0 <= start < nbr.shape[0]:
        raise InvalidParameterError(f"start vertex {start} not in tree")
    return _kernels.chain_path(rng, nbr, cum, deg, int(start), steps)


@dataclass(frozen=True)
class TimedPath:
    """Jump times and the vertices entered at those times; ``horizon`` is the
    end of the observation window and ``truncated`` flags a jump budget hit."""

    times: np.ndarray
    vertices: np.ndarray
    horizon: float
    truncated: bool = False

    def position(self, t):
        k = np.searchsorted(self.times, t, side="right") - 1
        return self.vertices[k]


def simulate_speed_motion(mm, start, horizon, rng=None, max_jumps=10_000_000):
    """Continuous-time walk with competing exponential clocks per edge."""
    horizon = check_positive(horizon, "horizon")
    rng = check_random_state(rng)
    nbr, rate, deg = mm.rate_table()
    if not 0 <= start < nbr.shape[0]:
        raise InvalidParameterError(f"start vertex {start} not in tree")
    t, v, trunc = _kernels.speed_path(rng, nbr, rate, deg, int(start), horizon, int(max_jumps))
    return TimedPath(t, v, horizon, bool(trunc))


def hit_and_occupation(mm, start, targets, watch, runs, rng=None):
    """Run the speed motion from ``start`` until it hits ``targets``.

    Returns the hit vertex and the time spent at ``watch`` per run.
    """
    rng = check_random_state(rng)
    nbr, rate, deg = mm.rate_table()
    mask = np.zeros(nbr.shape[0], dtype=np.bool_)
    mask[np.atleast_1d(targets)] = True
    w = -1 if watch is None else int(watch)
    return _kernels.speed_hits(rng, nbr, rate, deg, int(start), mask, w, check_positive_int(runs, "runs"))


def effective_resistance_variational(n_vertices, edges, conductances, u1, u2):
    """Effective resistance from the Dirichlet principle on a finite network.

    Minimizes the energy over potentials with ``f(u1) = 0, f(u2) = 1`` by
    solving the Laplace equation on the interior; returns one over the
    minimal energy.
    """
    n = check_positive_int(n_vertices, "n_vertices")
    if n > 1000:
        raise InvalidParameterError("variational solver is meant for networks up to 1000 vertices")
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    c = np.asarray(conductances, dtype=float)
    if c.shape != (edges.shape[0],) or np.any(c <= 0):
        raise InvalidParameterError("need one positive conductance per edge")
    if u1 == u2:
        return 0.0
    adj = coo_matrix((np.ones(edges.shape[0]), (edges[:, 0], edges[:, 1])), shape=(n, n))
    ncomp, lab = connected_components(adj, directed=False)
    if lab[u1] != lab[u2]:
        raise InvalidParameterError("u1 and u2 lie in different components")
    keep = np.flatnonzero(lab == lab[u1])
    L = np.zeros((n, n))
    a, b = edges[:, 0], edges[:, 1]
    np.add.at(L, (a, b), -c)
    np.add.at(L, (b, a), -c)
    np.add.at(L, (a, a), c)
    np.add.at(L, (b, b), c)
    interior = np.setdiff1d(keep, [u1, u2])
    f = np.zeros(n)
    f[u2] = 1.0
    if interior.size:
        rhs = -L[np.ix_(interior, [u2])].ravel()
        f[interior] = np.linalg.solve(L[np.ix_(interior, interior)], rhs)
    energy = float(np.sum(c * (f[a] - f[b]) ** 2))
    return 1.0 / energy


def write_timed_path_csv(path, marks=None, fh=None):
    """CSV ``t, vertex`` plus ``phi1..phid`` when marks are given (the base
    vertex is placed at the origin)."""
    buf = io.StringIO() if fh is None else fh
    cols = ["t", "vertex"]
    pos = None
    if marks is not None:
        pos = np.vstack([marks.positions, np.zeros((1, marks.d))])
        cols += [f"phi{k + 1}" for k in range(marks.d)]
    buf.write(",".join(cols) + "\n")
    for t, v in zip(path.times, path.vertices):
        row = [repr(float(t)), str(int(v))]
        if pos is not None:
            row += [repr(float(x)) for x in pos[v]]
        buf.write(",".join(row) + "\n")
    return buf.getvalue() if fh is None else None


def bundle_summary(mm, cond=None):
    out = {
        "n": mm.tree.n,
        "r_scale": mm.r_scale,
        "nu_scale": mm.nu_scale,
    }
    if cond is not None:
        out.update(beta=cond.beta, gamma=cond.gamma, mode=cond.mode)
    return json.dumps(out, sort_keys=True)
