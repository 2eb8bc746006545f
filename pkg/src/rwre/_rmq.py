import numpy as np


class SparseTableArgmin:
    """Range-minimum queries in O(1) after O(n log n) preprocessing.

    Ties resolve to the leftmost index. Queries are inclusive on both ends and
    accept arrays.
    """

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)
        n = self.values.size
        levels = [np.arange(n)]
        span = 1
        while 2 * span <= n:
            prev = levels[-1]
            a = prev[: n - 2 * span + 1]
            b = prev[span : n - span + 1]
            levels.append(np.where(self.values[b] < self.values[a], b, a))
            span *= 2
        self._levels = levels

    def argmin(self, i, j):
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        lo = np.minimum(i, j)
        hi = np.maximum(i, j)
        length = hi - lo + 1
        k = np.floor(np.log2(length)).astype(np.int64)
        out = np.empty(np.broadcast(lo, hi).shape, dtype=np.int64)
        flat_lo, flat_hi, flat_k = lo.ravel(), hi.ravel(), np.broadcast_to(k, lo.shape).ravel()
        res = out.ravel()
        for level in np.unique(flat_k):
            sel = flat_k == level
            table = self._levels[level]
            a = table[flat_lo[sel]]
            b = table[flat_hi[sel] - (1 << level) + 1]
            res[sel] = np.where(self.values[b] < self.values[a], b, a)
        out = res.reshape(out.shape)
        return out if out.ndim else int(out)

    def min(self, i, j):
        return self.values[self.argmin(i, j)]
