"""Edge-reinforced random walk on trees and its random-environment mixture.

The walk lives on the unplanted tree (the base edge of a planted tree is
ignored). Per-edge arrays are indexed by the child vertex; entry 0 is unused.

Mixture representation: draw ``alpha(e) ~ Gamma(alpha0(e), 1)``, then
``omega(e)`` from the density

    sqrt(alpha / 2 pi) * exp(-2 alpha sinh(x/2)^2 + x/2),

set ``U(u)`` to the sum of ``omega`` along the root path, and run the
reversible chain with conductances ``alpha(e) exp(-(U(u) + U(v)))``.
"""

from dataclasses import dataclass, field
import io

import numpy as np
from numba import njit
from scipy import integrate

from ._validation import check_positive, check_positive_int, check_random_state
from .exceptions import ConsistencyError, InvalidParameterError, SamplingError
from .rwre_tree import TreeConductances, simulate_discrete
from .treecore import OrderedTree, accumulate_from_root

__all__ = [
    "ErrwState",
    "SinhEnvironment",
    "default_weights",
    "simulate_errw",
    "exact_errw_law",
    "sample_gamma_weights",
    "sinh_logpdf",
    "sinh_cdf",
    "sample_sinh",
    "build_field",
    "sample_environment",
    "simulate_mixture",
    "mixture_path_law",
    "sample_path_field",
    "write_environment_csv",
]


def default_weights(n):
    """Initial weight ``sqrt(n) / 2`` used for a tree with n vertices."""
    n = check_positive_int(n, "n")
    return 0.5 * np.sqrt(n)


def _unplanted(tree):
    return tree if not tree.planted else OrderedTree(tree.parent, planted=False)


def _edge_weights(tree, alpha0):
    a = np.broadcast_to(np.asarray(alpha0, dtype=float), (tree.n,)).copy()
    if np.any(~(a[1:] > 0)) or not np.all(np.isfinite(a[1:])):
        raise InvalidParameterError("initial weights must be positive and finite")
    a[0] = np.nan
    return a


@dataclass
class ErrwState:
    """Counters after ``time`` steps; ``counters[e] = alpha0[e] + crossings``."""

    counters: np.ndarray
    current: int
    time: int
    initial: np.ndarray = field(default=None, repr=False)

    @property
    def crossings(self):
        # counters hold alpha0 + k exactly only up to rounding of alpha0
        return np.rint(self.counters - self.initial)


@njit(cache=True)
def _errw_kernel(rng, nbr, edge, deg, counters, start, steps):
    path = np.empty(steps + 1, dtype=np.int64)
    x = start
    path[0] = x
    for k in range(steps):
        tot = 0.0
        for j in range(deg[x]):
            tot += counters[edge[x, j]]
        u = rng.random() * tot
        j = 0
        acc = counters[edge[x, 0]]
        while j < deg[x] - 1 and u >= acc:
            j += 1
            acc += counters[edge[x, j]]
        counters[edge[x, j]] += 1.0
        x = nbr[x, j]
        path[k + 1] = x
    return path


def simulate_errw(tree, alpha0, start, steps, rng=None, state=None):
    """Run the reinforced walk; returns ``(path, state)``.

    Passing the ``state`` of an earlier run continues it.
    """
    tree = _unplanted(tree)
    steps = check_positive_int(steps, "steps", minimum=0)
    rng = check_random_state(rng)
    a0 = _edge_weights(tree, alpha0)
    if state is None:
        counters = a0.copy()
        counters[0] = 0.0
        state = ErrwState(counters, int(start), 0, counters.copy())
    elif state.current != start:
        raise ConsistencyError("start differs from the state's current vertex")
    if not 0 <= start < tree.n:
        raise InvalidParameterError(f"start vertex {start} not in tree")
    if tree.n == 1:
        return np.full(steps + 1, start, dtype=np.int64), state
    nbr, edge, deg = tree.adjacency()
    path = _errw_kernel(rng, nbr, edge, deg, state.counters, int(start), steps)
    state.current = int(path[-1])
    state.time += steps
    return path, state


def exact_errw_law(tree, alpha0, start, steps):
    """Exact trajectory law by enumerating every nearest-neighbour path.

    Returns ``{path tuple: probability}`` over paths of ``steps`` jumps
    starting at ``start``. Meant for trees up to 6 vertices and 6 steps.
    """
    tree = _unplanted(tree)
    if tree.n > 6 or steps > 6:
        raise InvalidParameterError("enumeration is limited to 6 vertices and 6 steps")
    a0 = _edge_weights(tree, alpha0)
    nbr, edge, deg = tree.adjacency()
    out = {}

    def rec(path, counters, prob):
        if len(path) == steps + 1:
            out[tuple(path)] = prob
            return
        x = path[-1]
        es = edge[x, : deg[x]]
        tot = sum(counters[e] for e in es)
        for j, e in enumerate(es):
            counters[e] += 1
            rec(path + [int(nbr[x, j])], counters, prob * (counters[e] - 1) / tot)
            counters[e] -= 1

    rec([int(start)], {e: a0[e] for e in range(1, tree.n)}, 1.0)
    return out


def sample_gamma_weights(tree, alpha0, rng=None):
    """Independent ``Gamma(alpha0(e), 1)`` per edge (entry 0 is NaN)."""
    rng = check_random_state(rng)
    a0 = _edge_weights(tree, alpha0)
    out = np.full(tree.n, np.nan)
    out[1:] = rng.gamma(a0[1:])
    return out


def sinh_logpdf(x, alpha):
    x = np.asarray(x, dtype=float)
    return 0.5 * np.log(alpha / (2 * np.pi)) - 2 * alpha * np.sinh(x / 2) ** 2 + x / 2


def sinh_cdf(x, alpha):
    """CDF by adaptive quadrature of the density."""
    alpha = check_positive(alpha, "alpha")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    mode = np.arcsinh(1 / (2 * alpha))  # the density peaks where alpha sinh(x) = 1/2
    scale = 1 / np.sqrt(alpha * np.cosh(mode))
    f = lambda t: np.exp(sinh_logpdf(t, alpha))
    order = np.argsort(xs)
    out = np.empty(xs.size)
    lo = mode - 60 * scale
    acc = 0.0
    prev = lo
    for k in order:
        hi = xs[k]
        if hi <= lo:
            out[k] = 0.0
            continue
        acc += integrate.quad(f, prev, hi, limit=200, epsabs=1e-13, epsrel=1e-11)[0]
        prev = hi
        out[k] = min(acc, 1.0)
    return out if np.ndim(x) else float(out[0])


def _rejection(alpha, rng, max_rounds):
    """Vectorized Gaussian-envelope rejection for an array of alphas."""
    out = np.empty(alpha.size)
    todo = np.arange(alpha.size)
    proposals = 0
    for _ in range(max_rounds):
        if todo.size == 0:
            return out, proposals
        a = alpha[todo]
        z = rng.standard_normal(todo.size)
        x = z / np.sqrt(a) + 1 / (2 * a)
        log_acc = -2 * a * np.sinh(x / 2) ** 2 + x / 2 + z * z / 2 - 1 / (8 * a)
        u = rng.random(todo.size)
        proposals += todo.size
        ok = np.log(u) < log_acc
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
    raise SamplingError(f"{todo.size} draws still rejected after {max_rounds} rounds")


def sample_sinh(alpha, size=None, rng=None, *, threshold=0.5, return_acceptance=False, max_rounds=10_000):
    """Draw from the sinh density with parameter ``alpha`` (scalar or array).

    For ``alpha >= threshold`` a standard normal ``z`` is proposed, mapped to
    ``x = z / sqrt(alpha) + 1 / (2 alpha)`` and accepted with probability
    ``exp(-2 alpha sinh(x/2)^2 + x/2 + z^2/2 - 1/(8 alpha))``, whose mean is
    exactly ``exp(-1/(8 alpha))``. Below the threshold ``exp(-x)`` is drawn
    from the inverse Gaussian law with mean 1 and shape ``alpha``, which has
    the same distribution.

    With ``return_acceptance`` the result is ``(draws, accepted, proposals)``
    counting the rejection branch only.
    """
    rng = check_random_state(rng)
    a = np.asarray(alpha, dtype=float)
    if np.any(~(a > 0)) or not np.all(np.isfinite(a)):
        raise InvalidParameterError("alpha must be positive and finite")
    shape = a.shape if size is None else (size if np.ndim(size) else (int(size),))
    a = np.broadcast_to(a, shape).ravel()
    out = np.empty(a.size)
    big = a >= threshold
    accepted = int(big.sum())
    proposals = 0
    if accepted:
        out[big], proposals = _rejection(a[big], rng, max_rounds)
    small = ~big
    if small.any():
        out[small] = -np.log(rng.wald(1.0, a[small]))
    out = out.reshape(shape)
    if not shape:
        out = float(out)
    if return_acceptance:
        return out, accepted, proposals
    return out


@dataclass(frozen=True, eq=False)
class SinhEnvironment:
    tree: OrderedTree = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)

    @property
    def potential(self):
        """``U(parent) + U(u) - log alpha(edge)``; 0 at the root."""
        tree = self.tree
        v = np.zeros(tree.n)
        if tree.n > 1:
            p = tree.parent[1:]
            v[1:] = self.U[p] + self.U[1:] - np.log(self.alpha[1:])
        return v

    def conductances(self):
        return TreeConductances(_unplanted(self.tree), np.exp(-self.potential))


def build_field(tree, omega):
    """``U(u)`` = sum of ``omega`` over the edges from the root to ``u``."""
    om = np.asarray(omega, dtype=float)
    if om.shape != (tree.n,):
        raise ConsistencyError("omega must be indexed by child vertex (length n)")
    if not np.all(np.isfinite(om[1:])):
        raise InvalidParameterError("omega must be finite on every edge")
    om = om.copy()
    om[0] = 0.0
    return accumulate_from_root(tree, om)


def sample_environment(tree, alpha0, rng=None):
    rng = check_random_state(rng)
    tree = _unplanted(tree)
    alpha = sample_gamma_weights(tree, alpha0, rng)
    omega = np.zeros(tree.n)
    if tree.n > 1:
        omega[1:] = sample_sinh(alpha[1:], rng=rng)
    return SinhEnvironment(tree, alpha, omega, build_field(tree, omega))


def simulate_mixture(tree, env, start, steps, rng=None):
    """Walk in the fixed environment ``env``: from ``u`` to a neighbour ``v``
    with probability proportional to ``alpha({u,v}) exp(-(U(u) + U(v)))``."""
    if not _unplanted(tree).same_as(env.tree):
        raise ConsistencyError("environment was built on a different tree")
    return simulate_discrete(env.conductances(), start, steps, rng)


def mixture_path_law(tree, alpha0, start, steps, samples, rng=None):
    """Annealed empirical trajectory counts: a fresh environment per sample."""
    rng = check_random_state(rng)
    tree = _unplanted(tree)
    counts = {}
    for _ in range(check_positive_int(samples, "samples")):
        env = sample_environment(tree, alpha0, rng)
        p = tuple(int(v) for v in simulate_mixture(tree, env, start, steps, rng))
        counts[p] = counts.get(p, 0) + 1
    return counts


def sample_path_field(alpha0, depth, draws, rng=None, chunk=1000):
    """Draws of ``U`` at a vertex at the given depth.

    Only the edges on the root path enter ``U`` there, so sampling those
    ``depth`` edges gives the exact law.
    """
    rng = check_random_state(rng)
    alpha0 = check_positive(alpha0, "alpha0")
    depth = check_positive_int(depth, "depth", minimum=0)
    out = np.empty(check_positive_int(draws, "draws"))
    for s in range(0, out.size, chunk):
        k = min(chunk, out.size - s)
        a = rng.gamma(alpha0, size=(k, depth))
        out[s : s + k] = sample_sinh(a, rng=rng).sum(axis=1) if depth else 0.0
    return out


def write_environment_csv(env, fh=None):
    """CSV ``edge, alpha, omega, U`` where ``edge`` is the child vertex and
    ``U`` is its value at that endpoint."""
    buf = io.StringIO() if fh is None else fh
    buf.write("edge,parent,alpha,omega,U\n")
    for u in range(1, env.tree.n):
        buf.write(
            f"{u},{int(env.tree.parent[u])},{float(env.alpha[u])!r},"
            f"{float(env.omega[u])!r},{float(env.U[u])!r}\n"
        )
    return buf.getvalue() if fh is None else None
