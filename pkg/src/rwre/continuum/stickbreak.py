"""Stick-breaking construction of the continuum random tree.

Cut times are the points of a Poisson process of intensity ``t dt``:
``C_1 = sqrt(2 E_1)`` and ``C_{i+1} = sqrt(C_i^2 + 2 E_{i+1})``. Segment ``i``
has length ``C_i - C_{i-1}`` and is glued at a point chosen uniformly over
the total length ``C_{i-1}`` of the segments before it.

With this intensity the limit is the tree coded by twice a normalized
excursion, so root-to-leaf distances compare with ``2 g(U)``.
"""

from dataclasses import dataclass, field
import io

import numpy as np

from .._validation import check_positive_int, check_random_state

__all__ = ["StickBreakTree", "stick_breaking", "write_segment_table"]


@dataclass(frozen=True, eq=False)
class StickBreakTree:
    """Segments ``1..K`` stored at indices ``0..K-1``.

    ``attach_segment[i]`` is the segment ``i`` hangs from (-1 for the
    first) and ``attach_offset[i]`` the distance from that segment's start.
    ``start_depth[i]`` is the distance from the root to the start of segment
    ``i``.
    """

    cuts: np.ndarray = field(repr=False)
    attach_segment: np.ndarray = field(repr=False)
    attach_offset: np.ndarray = field(repr=False)
    start_depth: np.ndarray = field(repr=False)

    @property
    def K(self):
        return int(self.cuts.size)

    @property
    def lengths(self):
        return np.diff(np.r_[0.0, self.cuts])

    @property
    def total_length(self):
        return float(self.cuts[-1])

    def leaf_depths(self):
        """Root distances of the segment endpoints (the leaves)."""
        return self.start_depth + self.lengths

    def depth_at(self, x):
        """Root distance of the point at stick coordinate ``x`` in
        ``[0, C_K)``."""
        x = np.asarray(x, dtype=float)
        seg = np.searchsorted(self.cuts, x, side="right")
        lower = np.r_[0.0, self.cuts][seg]
        return self.start_depth[seg] + (x - lower)

    def uniform_point_depth(self, rng=None, size=None):
        """Root distance of a point drawn from normalized length measure."""
        rng = check_random_state(rng)
        return self.depth_at(rng.uniform(0.0, self.total_length, size))

    def random_leaf_depth(self, rng=None):
        rng = check_random_state(rng)
        return float(self.leaf_depths()[rng.integers(self.K)])


def stick_breaking(rng=None, K=1):
    rng = check_random_state(rng)
    K = check_positive_int(K, "K")
    cuts = np.sqrt(2.0 * np.cumsum(rng.exponential(size=K)))
    lower = np.r_[0.0, cuts[:-1]]
    seg = np.full(K, -1, dtype=np.int64)
    off = np.zeros(K)
    depth = np.zeros(K)
    if K > 1:
        x = rng.uniform(0.0, lower[1:])  # attach point of segment i+1 on [0, C_i)
        j = np.searchsorted(cuts, x, side="right")
        seg[1:] = j
        off[1:] = x - lower[j]
        # j < i always, so start depths can be filled left to right
        for i in range(1, K):
            depth[i] = depth[j[i - 1]] + off[i]
    return StickBreakTree(cuts, seg, off, depth)


def write_segment_table(sb, fh=None):
    """CSV ``id, length, parent_segment, offset`` (ids start at 1, parent 0
    means the root)."""
    buf = io.StringIO() if fh is None else fh
    buf.write("id,length,parent_segment,offset\n")
    for i, (ln, p, o) in enumerate(zip(sb.lengths, sb.attach_segment, sb.attach_offset)):
        buf.write(f"{i + 1},{float(ln)!r},{int(p) + 1},{float(o)!r}\n")
    return buf.getvalue() if fh is None else None
