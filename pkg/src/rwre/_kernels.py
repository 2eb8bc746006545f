"""Compiled inner loops. Every kernel draws from a NumPy Generator passed in."""

import numpy as np
from numba import njit


@njit(cache=True)
def walk1d_positions(rng, omega_plus, lo, start, record, walkers):
    """Run ``walkers`` walks, returning positions at the sorted step counts in
    ``record``; ``exited`` holds the first walker index that left the window
    (or -1)."""
    n_rec = record.size
    out = np.empty((walkers, n_rec), dtype=np.int64)
    hi = lo + omega_plus.size - 1
    for w in range(walkers):
        x = start
        k = 0
        for j in range(n_rec):
            target = record[j]
            while k < target:
                if rng.random() < omega_plus[x - lo]:
                    x += 1
                else:
                    x -= 1
                k += 1
                if x < lo or x > hi:
                    return out, w, x
            out[w, j] = x
    return out, -1, 0


@njit(cache=True)
def walk1d_path(rng, omega_plus, lo, start, steps):
    path = np.empty(steps + 1, dtype=np.int64)
    hi = lo + omega_plus.size - 1
    x = start
    path[0] = x
    for k in range(steps):
        if rng.random() < omega_plus[x - lo]:
            x += 1
        else:
            x -= 1
        if x < lo or x > hi:
            return path[: k + 1], k + 1
        path[k + 1] = x
    return path, -1


@njit(cache=True)
def chain_path(rng, nbr, cum, deg, start, steps):
    """Discrete-time walk on a padded adjacency table; ``cum[x, :deg[x]]`` is
    the cumulative jump distribution out of x."""
    path = np.empty(steps + 1, dtype=np.int64)
    x = start
    path[0] = x
    for k in range(steps):
        u = rng.random()
        j = 0
        last = deg[x] - 1
        while j < last and u >= cum[x, j]:
            j += 1
        x = nbr[x, j]
        path[k + 1] = x
    return path


@njit(cache=True)
def speed_path(rng, nbr, rate, deg, start, horizon, max_jumps):
    """Competing exponential clocks, one per incident edge."""
    times = np.empty(max_jumps + 1)
    verts = np.empty(max_jumps + 1, dtype=np.int64)
    x = start
    t = 0.0
    times[0] = 0.0
    verts[0] = x
    n = 1
    while n <= max_jumps:
        best = np.inf
        y = -1
        for j in range(deg[x]):
            s = rng.exponential(1.0) / rate[x, j]
            if s < best:
                best = s
                y = nbr[x, j]
        t += best
        if t > horizon:
            return times[:n], verts[:n], False
        x = y
        times[n] = t
        verts[n] = x
        n += 1
    return times[:n], verts[:n], True


@njit(cache=True)
def speed_hits(rng, nbr, rate, deg, start, target_mask, watch, n_runs):
    """Run until the target set is hit; report the hit vertex and the time
    spent at ``watch`` before hitting."""
    hit = np.empty(n_runs, dtype=np.int64)
    occ = np.zeros(n_runs)
    for k in range(n_runs):
        x = start
        while not target_mask[x]:
            best = np.inf
            y = -1
            for j in range(deg[x]):
                s = rng.exponential(1.0) / rate[x, j]
                if s < best:
                    best = s
                    y = nbr[x, j]
            if x == watch:
                occ[k] += best
            x = y
        hit[k] = x
    return hit, occ


@njit(cache=True)
def birth_death_positions(rng, rate_right, rate_left, start, horizons, n_paths):
    """Positions (grid indices) of continuous-time birth-death paths at the
    sorted ``horizons``; returns the first path index that left the grid."""
    n_rec = horizons.size
    size = rate_right.size
    out = np.empty((n_paths, n_rec), dtype=np.int64)
    for p in range(n_paths):
        x = start
        t = 0.0
        j = 0
        while j < n_rec:
            a = rng.exponential(1.0) / rate_right[x]
            b = rng.exponential(1.0) / rate_left[x]
            if a < b:
                dt = a
                step = 1
            else:
                dt = b
                step = -1
            while j < n_rec and t + dt > horizons[j]:
                out[p, j] = x
                j += 1
            if j == n_rec:
                break
            t += dt
            x += step
            if x < 0 or x >= size:
                return out, p
    return out, -1


@njit(cache=True)
def birth_death_path(rng, rate_right, rate_left, start, horizon, max_jumps):
    times = np.empty(max_jumps + 1)
    idx = np.empty(max_jumps + 1, dtype=np.int64)
    size = rate_right.size
    x = start
    t = 0.0
    times[0] = 0.0
    idx[0] = x
    n = 1
    while n <= max_jumps:
        a = rng.exponential(1.0) / rate_right[x]
        b = rng.exponential(1.0) / rate_left[x]
        if a < b:
            t += a
            x += 1
        else:
            t += b
            x -= 1
        if t > horizon:
            return times[:n], idx[:n], 0
        if x < 0 or x >= size:
            return times[:n], idx[:n], 2
        times[n] = t
        idx[n] = x
        n += 1
    return times[:n], idx[:n], 1
