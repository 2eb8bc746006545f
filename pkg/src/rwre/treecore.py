"""Plane trees, Galton-Watson sampling, contour coding and spatial embeddings.

Vertices are labelled ``0..n-1`` in depth-first preorder, so the root is 0,
``parent[u] < u`` and the subtree of ``u`` is the label range
``[u, u + size[u])``. Per-edge quantities are stored on the child endpoint:
entry ``u`` of an edge array belongs to the edge ``{parent[u], u}``, and entry
0 belongs to the planted edge joining the root to the base.
"""

from dataclasses import dataclass, field
import io

import numpy as np
from numba import njit

from ._rmq import SparseTableArgmin
from ._validation import check_positive_int, check_random_state
from .exceptions import ConsistencyError, InvalidParameterError, SamplingError

__all__ = [
    "OrderedTree",
    "OffspringDistribution",
    "ContourSequence",
    "SpatialMarks",
    "sample_gw_conditioned",
    "contour",
    "tree_from_contour",
    "embed_brw",
    "gaussian_steps",
    "head_function",
    "discrete_length_measure",
    "accumulate_from_root",
    "write_parent_array",
    "read_parent_array",
    "write_contour_csv",
]


@njit(cache=True)
def _accumulate(parent, inc):
    out = inc.copy()
    out[0] = 0.0
    for u in range(1, parent.size):
        out[u] = out[parent[u]] + inc[u]
    return out


def accumulate_from_root(tree, per_edge):
    """Sum a per-edge quantity along root paths (the planted entry is ignored)."""
    a = np.ascontiguousarray(per_edge, dtype=float)
    if a.shape[0] != tree.n:
        raise ConsistencyError(f"per-edge array has {a.shape[0]} rows, tree has {tree.n} vertices")
    if a.ndim == 1:
        return _accumulate(tree.parent, a)
    return _accumulate(tree.parent, a.reshape(tree.n, -1)).reshape(a.shape)


@njit(cache=True)
def _parents_from_offspring(off):
    n = off.size
    parent = np.empty(n, dtype=np.int64)
    parent[0] = -1
    stack = np.empty(n, dtype=np.int64)
    left = np.empty(n, dtype=np.int64)
    top = 0
    stack[0] = 0
    left[0] = off[0]
    for u in range(1, n):
        while left[top] == 0:
            top -= 1
        parent[u] = stack[top]
        left[top] -= 1
        top += 1
        stack[top] = u
        left[top] = off[u]
    return parent


@njit(cache=True)
def _preorder(parent, order_key):
    """Preorder relabelling of an arbitrary parent array whose children are
    ordered by ``order_key``. Returns ``new_label[old]``."""
    n = parent.size
    counts = np.zeros(n + 1, dtype=np.int64)
    root = -1
    for u in range(n):
        if parent[u] < 0:
            root = u
        else:
            counts[parent[u] + 1] += 1
    start = np.cumsum(counts)
    kids = np.empty(max(n - 1, 1), dtype=np.int64)
    fill = start[:-1].copy()
    idx = np.argsort(order_key)
    for k in range(n):
        u = idx[k]
        if parent[u] >= 0:
            kids[fill[parent[u]]] = u
            fill[parent[u]] += 1
    label = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    top = 0
    stack[0] = root
    nxt = 0
    while top >= 0:
        u = stack[top]
        top -= 1
        label[u] = nxt
        nxt += 1
        for k in range(start[u + 1] - 1, start[u] - 1, -1):
            top += 1
            stack[top] = kids[k]
    return label


@dataclass(frozen=True, eq=False)
class OrderedTree:
    """A plane tree in preorder labelling.

    ``planted`` adds a base vertex joined to the root by a unit-conductance
    edge; it never appears in ``parent`` and is addressed as vertex ``n`` by
    the walk simulators.
    """

    parent: np.ndarray = field(repr=False)
    planted: bool = True

    def __post_init__(self):
        parent = np.array(self.parent, dtype=np.int64)
        n = parent.size
        if n == 0 or parent[0] != -1:
            raise InvalidParameterError("parent[0] must be -1 (the root)")
        if n > 1 and not np.all((parent[1:] >= 0) & (parent[1:] < np.arange(1, n))):
            raise InvalidParameterError("labels must satisfy 0 <= parent[u] < u")
        depth = np.zeros(n, dtype=np.int64)
        size = np.ones(n, dtype=np.int64)
        if n > 1:
            _depth_size(parent, depth, size)
        if np.any(np.arange(n) + size > n) or not _is_preorder(parent, size):
            raise InvalidParameterError("labels are not a depth-first preorder")
        for name, arr in (("parent", parent), ("depth", depth), ("size", size)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        nchild = np.bincount(parent[1:], minlength=n) if n > 1 else np.zeros(1, dtype=np.int64)
        ptr = np.concatenate([[0], np.cumsum(nchild)])
        kids = np.argsort(parent[1:], kind="stable") + 1 if n > 1 else np.zeros(0, dtype=np.int64)
        for name, arr in (("_child_ptr", ptr), ("_child_list", kids)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_lca_cache", {})

    @property
    def n(self):
        return int(self.parent.size)

    @property
    def root(self):
        return 0

    @property
    def base(self):
        """Label of the planted base vertex in walk adjacency tables."""
        return self.n

    @property
    def offspring(self):
        return np.diff(self._child_ptr)

    def children(self, u):
        return self._child_list[self._child_ptr[u] : self._child_ptr[u + 1]]

    @property
    def height(self):
        return int(self.depth.max())

    @classmethod
    def from_parent(cls, parent, planted=True, return_labels=False):
        """Build from any parent array (root marked by -1, children ordered by
        their labels); vertices are relabelled into preorder."""
        parent = np.asarray(parent, dtype=np.int64)
        n = parent.size
        if n == 0 or np.count_nonzero(parent < 0) != 1:
            raise InvalidParameterError("parent array needs exactly one root")
        if np.any(parent >= n):
            raise InvalidParameterError("parent label out of range")
        label = _preorder(parent, np.arange(n))
        if np.any(label < 0):
            raise InvalidParameterError("parent array is not connected (cycle or forest)")
        new_parent = np.full(n, -1, dtype=np.int64)
        has = parent >= 0
        new_parent[label[has]] = label[parent[has]]
        tree = cls(new_parent, planted)
        return (tree, label) if return_labels else tree

    @classmethod
    def from_offspring(cls, offspring, planted=True):
        """Tree whose preorder offspring counts are ``offspring``."""
        off = np.asarray(offspring, dtype=np.int64)
        if off.sum() != off.size - 1:
            raise InvalidParameterError("offspring counts must sum to n - 1")
        s = np.cumsum(off - 1)
        if np.any(s[:-1] < 0):
            raise InvalidParameterError("offspring sequence is not a Lukasiewicz path")
        return cls(_parents_from_offspring(off), planted)

    @classmethod
    def path(cls, n, planted=True):
        return cls(np.arange(-1, n - 1), planted)

    @classmethod
    def star(cls, leaves, planted=True):
        return cls(np.r_[-1, np.zeros(leaves, dtype=np.int64)], planted)

    def same_as(self, other):
        return self is other or (
            self.n == other.n and np.array_equal(self.parent, other.parent)
        )

    def path_to_root(self, u):
        out = [u]
        while u != 0:
            u = int(self.parent[u])
            out.append(u)
        return np.array(out, dtype=np.int64)

    def _lca_table(self):
        cache = self._lca_cache
        if "rmq" not in cache:
            c = contour(self)
            first = np.full(self.n, -1, dtype=np.int64)
            order = c.visit_order
            idx = np.arange(order.size)
            first[order[::-1]] = idx[::-1]
            cache["rmq"] = (SparseTableArgmin(c.heights), first, order)
        return cache["rmq"]

    def lca(self, u, v):
        """Most recent common ancestor; vectorized over arrays."""
        rmq, first, order = self._lca_table()
        return order[rmq.argmin(first[np.asarray(u)], first[np.asarray(v)])]

    def branch_point(self, u1, u2, u3):
        """The unique vertex on all three geodesics between u1, u2, u3."""
        a, b, c = self.lca(u1, u2), self.lca(u1, u3), self.lca(u2, u3)
        da, db, dc = self.depth[a], self.depth[b], self.depth[c]
        # the median: the deepest of the three pairwise ancestors
        return int([a, b, c][int(np.argmax([da, db, dc]))])

    def graph_distance(self, u, v):
        return self.depth[u] + self.depth[v] - 2 * self.depth[self.lca(u, v)]

    def adjacency(self):
        """Padded neighbour table over ``n + planted`` vertices.

        Row ``u`` lists the parent first (the base for the root when planted),
        then the children in order. Returns ``(nbr, edge, deg)`` where
        ``edge[u, j]`` is the per-edge index of the edge to ``nbr[u, j]``.
        """
        n = self.n
        m = n + int(self.planted)
        deg = np.zeros(m, dtype=np.int64)
        deg[:n] = self.offspring + 1
        if not self.planted:
            deg[0] -= 1
        else:
            deg[n] = 1
        width = max(int(deg.max()), 1)
        nbr = np.full((m, width), -1, dtype=np.int64)
        edge = np.full((m, width), -1, dtype=np.int64)
        pos = np.zeros(m, dtype=np.int64)
        if self.planted:
            nbr[0, 0], edge[0, 0] = n, 0
            nbr[n, 0], edge[n, 0] = 0, 0
            pos[0] = pos[n] = 1
        for u in range(1, n):
            p = self.parent[u]
            nbr[u, pos[u]], edge[u, pos[u]] = p, u
            pos[u] += 1
        for u in range(1, n):
            p = self.parent[u]
            nbr[p, pos[p]], edge[p, pos[p]] = u, u
            pos[p] += 1
        return nbr, edge, deg


@njit(cache=True)
def _depth_size(parent, depth, size):
    n = parent.size
    for u in range(1, n):
        depth[u] = depth[parent[u]] + 1
    for u in range(n - 1, 0, -1):
        size[parent[u]] += size[u]


@njit(cache=True)
def _is_preorder(parent, size):
    # in preorder the next label after a subtree [u, u + size[u]) is a child
    # of an ancestor of u; equivalently each child starts right after the
    # subtree of its previous sibling
    n = parent.size
    nxt = np.zeros(n, dtype=np.int64)
    for u in range(n):
        nxt[u] = u + 1
    for u in range(1, n):
        p = parent[u]
        if u != nxt[p]:
            return False
        nxt[p] = u + size[u]
    return True


@dataclass(frozen=True)
class OffspringDistribution:
    """Offspring law given by a (possibly truncated) pmf.

    ``kind`` selects an exact sampler for distributions with infinite support
    (``"geometric"``, ``"poisson"``); the stored pmf is then truncated where
    the tail drops below 1e-18 and is used for validation only.
    """

    pmf: np.ndarray = field(repr=False)
    kind: str = "table"
    param: float = float("nan")
    exponential_tails: bool = True
    aperiodic: bool = True

    def __post_init__(self):
        pmf = np.array(self.pmf, dtype=float)
        if pmf.ndim != 1 or pmf.size == 0 or np.any(pmf < 0):
            raise InvalidParameterError("pmf must be a nonnegative vector")
        if abs(pmf.sum() - 1.0) > 1e-12:
            raise InvalidParameterError(f"pmf sums to {pmf.sum()!r}, not 1")
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)

    @classmethod
    def geometric(cls, p=0.5):
        """P(k) = p (1-p)^k; critical at p = 1/2."""
        k = np.arange(int(np.ceil(np.log(1e-18) / np.log1p(-p))) + 1)
        pmf = p * (1 - p) ** k
        pmf[-1] += 1 - pmf.sum()
        return cls(pmf, "geometric", p)

    @classmethod
    def poisson(cls, mean=1.0):
        from scipy.stats import poisson

        k = np.arange(int(10 * mean + 60))
        kmax = int(np.argmax(poisson.sf(k, mean) < 1e-18))
        pmf = poisson.pmf(np.arange(kmax + 1), mean)
        pmf[-1] += 1 - pmf.sum()
        return cls(pmf, "poisson", mean)

    @classmethod
    def binary(cls):
        """0 or 2 children with probability 1/2 each (periodic: odd n only)."""
        return cls([0.5, 0.0, 0.5], aperiodic=False)

    @property
    def mean(self):
        return float(np.arange(self.pmf.size) @ self.pmf)

    @property
    def variance(self):
        k = np.arange(self.pmf.size)
        return float((k * k) @ self.pmf - self.mean**2)

    @property
    def sigma_tree(self):
        """The constant 2 / sigma_xi scaling contour heights."""
        return 2.0 / np.sqrt(self.variance)

    def is_critical(self, tol=1e-12):
        return abs(self.mean - 1.0) <= tol

    def sample(self, rng, size):
        if self.kind == "geometric":
            return rng.geometric(self.param, size) - 1
        if self.kind == "poisson":
            return rng.poisson(self.param, size)
        return rng.choice(self.pmf.size, size=size, p=self.pmf)


def sample_gw_conditioned(dist, n, rng=None, *, max_tries=100_000, planted=True):
    """Galton-Watson tree conditioned on ``n`` vertices (cycle lemma).

    Draws i.i.d. offspring vectors until their sum is ``n - 1``, then rotates
    the Lukasiewicz path to start just after its first minimum.
    """
    if not dist.is_critical():
        raise InvalidParameterError(f"offspring mean {dist.mean!r} is not 1")
    n = check_positive_int(n, "n")
    rng = check_random_state(rng)
    if n == 1:
        return OrderedTree(np.array([-1]), planted)
    batch = 1
    tries = 0
    while tries < max_tries:
        b = min(batch, max_tries - tries)
        draws = dist.sample(rng, (b, n))
        tries += b
        hit = np.flatnonzero(draws.sum(axis=1) == n - 1)
        if hit.size:
            off = draws[hit[0]]
            s = np.cumsum(off - 1)
            k = int(np.argmin(s))  # first index of the minimum
            return OrderedTree.from_offspring(np.roll(off, -(k + 1)), planted)
        batch = min(2 * batch, max(1, 2_000_000 // n))
    raise SamplingError(
        f"no offspring vector summing to {n - 1} in {max_tries} tries; "
        "n may be infeasible for this offspring law"
    )


@dataclass(frozen=True, eq=False)
class ContourSequence:
    """Depth-first contour: ``heights[i]`` is the depth of ``visit_order[i]``.

    For ``n`` vertices the walk has ``2(n - 1)`` steps and ``2n - 1`` entries.
    """

    tree: OrderedTree = field(repr=False)
    heights: np.ndarray = field(repr=False)
    visit_order: np.ndarray = field(repr=False)

    def __len__(self):
        return int(self.heights.size)


@njit(cache=True)
def _contour(parent, depth):
    n = parent.size
    order = np.empty(2 * n - 1, dtype=np.int64)
    k = 0
    cur = 0
    order[0] = 0
    for v in range(1, n):
        p = parent[v]
        while cur != p:
            cur = parent[cur]
            k += 1
            order[k] = cur
        k += 1
        order[k] = v
        cur = v
    while cur != 0:
        cur = parent[cur]
        k += 1
        order[k] = cur
    return order


def contour(tree):
    order = _contour(tree.parent, tree.depth)
    h = tree.depth[order]
    order.setflags(write=False)
    return ContourSequence(tree, h, order)


def tree_from_contour(heights, planted=True):
    h = np.asarray(heights, dtype=np.int64)
    if h.size % 2 == 0 or h[0] != 0 or h[-1] != 0 or np.any(np.abs(np.diff(h)) != 1) or np.any(h < 0):
        raise InvalidParameterError("not a contour sequence")
    n = (h.size + 1) // 2
    parent = np.empty(n, dtype=np.int64)
    parent[0] = -1
    stack = [0]
    nxt = 1
    for step in np.diff(h):
        if step > 0:
            parent[nxt] = stack[-1]
            stack.append(nxt)
            nxt += 1
        else:
            stack.pop()
    return OrderedTree(parent, planted)


@dataclass(frozen=True, eq=False)
class SpatialMarks:
    """Branching random walk over a tree.

    ``increments[u]`` is the displacement along the edge into ``u``
    (``increments[0] = 0`` for the planted edge) and ``positions`` the
    root-path sums, with the root and the base at the origin.
    """

    tree: OrderedTree = field(repr=False)
    increments: np.ndarray = field(repr=False)
    positions: np.ndarray = field(repr=False)
    step_cov: np.ndarray = None

    @property
    def d(self):
        return int(self.positions.shape[1])

    def scaled(self, factor):
        return SpatialMarks(
            self.tree,
            self.increments * factor,
            self.positions * factor,
            None if self.step_cov is None else self.step_cov * factor**2,
        )


def gaussian_steps(cov):
    """Step sampler drawing centred Gaussian vectors with covariance ``cov``."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    chol = np.linalg.cholesky(cov)

    def sampler(rng, size):
        return rng.standard_normal((size, cov.shape[0])) @ chol.T

    sampler.cov = cov
    return sampler


def embed_brw(tree, step_sampler, rng=None, d=None):
    """Attach i.i.d. increments from ``step_sampler(rng, size)`` to the edges.

    ``step_sampler`` returns an array of shape ``(size, d)``; its covariance is
    read from a ``cov`` attribute when present.
    """
    rng = check_random_state(rng)
    y = np.zeros((tree.n, 1 if d is None else d))
    if tree.n > 1:
        steps = np.asarray(step_sampler(rng, tree.n - 1), dtype=float)
        if steps.ndim == 1:
            steps = steps[:, None]
        if steps.shape[1] == 0:
            raise InvalidParameterError("spatial dimension must be at least 1")
        if d is not None and steps.shape[1] != d:
            raise InvalidParameterError(f"sampler returned dimension {steps.shape[1]}, expected {d}")
        y = np.zeros((tree.n, steps.shape[1]))
        y[1:] = steps
    elif d == 0:
        raise InvalidParameterError("spatial dimension must be at least 1")
    phi = accumulate_from_root(tree, y)
    cov = getattr(step_sampler, "cov", None)
    return SpatialMarks(tree, y, phi, cov)


def head_function(marks, c):
    if not marks.tree.same_as(c.tree):
        raise ConsistencyError("marks and contour come from different trees")
    return marks.positions[c.visit_order]


def discrete_length_measure(tree, edge_lengths):
    """Move each edge length onto its child endpoint; the root gets 0."""
    lengths = np.asarray(edge_lengths, dtype=float)
    if lengths.shape != (tree.n,):
        raise ConsistencyError("edge_lengths must be indexed by child vertex (length n)")
    if np.any(lengths[1:] <= 0):
        raise InvalidParameterError("edge lengths must be positive")
    mass = lengths.copy()
    mass[0] = 0.0
    return mass


def write_parent_array(tree, fh=None):
    """One line per vertex: ``vertex parent`` (the root's parent is -1)."""
    buf = io.StringIO() if fh is None else fh
    buf.write(f"# n {tree.n} planted {int(tree.planted)}\n")
    for u, p in enumerate(tree.parent):
        buf.write(f"{u} {p}\n")
    return buf.getvalue() if fh is None else None


def read_parent_array(source):
    text = source if isinstance(source, str) else source.read()
    planted = True
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("#"):
            parts = line[1:].split()
            if "planted" in parts:
                planted = bool(int(parts[parts.index("planted") + 1]))
            continue
        if line:
            rows.append([int(x) for x in line.split()])
    rows = np.array(rows, dtype=np.int64)
    parent = np.empty(rows.shape[0], dtype=np.int64)
    parent[rows[:, 0]] = rows[:, 1]
    return OrderedTree.from_parent(parent, planted)


def write_contour_csv(c, marks=None, fh=None):
    """CSV columns ``i, C, vertex`` and, with marks, ``R1..Rd``."""
    buf = io.StringIO() if fh is None else fh
    cols = ["i", "C", "vertex"]
    R = None
    if marks is not None:
        R = head_function(marks, c)
        cols += [f"R{k + 1}" for k in range(R.shape[1])]
    buf.write(",".join(cols) + "\n")
    for i in range(len(c)):
        row = [str(i), str(int(c.heights[i])), str(int(c.visit_order[i]))]
        if R is not None:
            row += [repr(float(x)) for x in R[i]]
        buf.write(",".join(row) + "\n")
    return buf.getvalue() if fh is None else None
