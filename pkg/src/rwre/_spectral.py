"""Exact marginal laws of reversible nearest-neighbour chains on a segment.

Both helpers symmetrize the chain with its reversible measure and keep only
the eigenpairs whose contribution at the requested time exceeds
``exp(-cutoff)``; the end sites are killing, so the returned law may have
total mass below one and the deficit measures how much escaped the window.
"""

import numpy as np
from scipy.linalg import eigh_tridiagonal

_DENSE_LIMIT = 1500


def _eig(diag, off, lower):
    if diag.size <= _DENSE_LIMIT:
        w, v = eigh_tridiagonal(diag, off)
        keep = w >= lower
        return w[keep], v[:, keep]
    upper = float(np.max(diag + np.abs(np.r_[off, 0.0]) + np.abs(np.r_[0.0, off]))) + 1.0
    return eigh_tridiagonal(diag, off, select="v", select_range=(lower, upper))


def ctmc_law(cond, mu, start, t, *, kill_left=0.0, kill_right=0.0, cutoff=40.0):
    """Law at time ``t`` of the chain with rates ``q(x, y) = c(x, y) / mu(x)``.

    ``cond[k]`` is the conductance between sites k and k+1; ``kill_left`` and
    ``kill_right`` are conductances to a cemetery beyond either end.
    """
    cond = np.asarray(cond, dtype=float)
    mu = np.asarray(mu, dtype=float)
    n = mu.size
    if t == 0:
        law = np.zeros(n)
        law[start] = 1.0
        return law
    out = np.zeros(n)
    out[:-1] += cond
    out[1:] += cond
    out[0] += kill_left
    out[-1] += kill_right
    diag = -out / mu
    off = cond / np.sqrt(mu[:-1] * mu[1:])
    w, v = _eig(diag, off, -cutoff / t)
    coef = np.exp(w * t) * v[start]
    law = np.sqrt(mu / mu[start]) * (v @ coef)
    return np.clip(law, 0.0, None)


def dtmc_law(p_right, p_left, start, steps, *, cutoff=40.0):
    """Law after ``steps`` jumps of a birth-death chain without holding.

    ``p_right[x]`` and ``p_left[x]`` are the jump probabilities out of site x;
    moves past either end are killed. The chain is bipartite, so the spectrum
    is symmetric and only the top of it is computed; the mirrored half
    contributes the parity factor ``1 + (-1)**(steps + start + y)``.
    """
    p_right = np.asarray(p_right, dtype=float)
    p_left = np.asarray(p_left, dtype=float)
    n = p_right.size
    law = np.zeros(n)
    if steps == 0:
        law[start] = 1.0
        return law
    off = np.sqrt(p_right[:-1] * p_left[1:])
    log_pi = np.zeros(n)
    log_pi[1:] = np.cumsum(np.log(p_right[:-1]) - np.log(p_left[1:]))
    lower = np.exp(-cutoff / steps)
    if n <= _DENSE_LIMIT:
        w, v = eigh_tridiagonal(np.zeros(n), off)
        keep = w >= lower
        w, v = w[keep], v[:, keep]
    else:
        w, v = eigh_tridiagonal(np.zeros(n), off, select="v", select_range=(lower, 1.0 + 1e-9))
    coef = np.exp(steps * np.log(np.minimum(w, 1.0))) * v[start]
    core = np.exp(0.5 * (log_pi - log_pi[start])) * (v @ coef)
    parity = (steps + start + np.arange(n)) % 2 == 0
    law[parity] = 2.0 * core[parity]
    return np.clip(law, 0.0, None)
