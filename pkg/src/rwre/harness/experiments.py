"""Experiment-level checks and per-replication scenario runners.

Every function takes an explicit seed (int, SeedSequence or Generator) and
returns plain data, so the command-line runner can persist the results and
tests can assert on them.
"""

import numpy as np

from .._validation import check_positive_int, check_random_state
from ..continuum import (
    CodedTree,
    brox_law,
    brox_positions,
    make_potential,
    sample_excursion,
    stick_breaking,
)
from ..env1d import (
    Environment1D,
    barrier_env,
    flatten,
    potential1d,
    simulate_walk,
    walk_law,
    walk_positions,
)
from ..errw import default_weights, sample_environment, sample_path_field, simulate_errw
from ..exceptions import InvalidParameterError
from ..rwre_tree import biased_conductances, rescaled_bundle, simulate_speed_motion, tree_potential
from ..treecore import OffspringDistribution, embed_brw, gaussian_steps, sample_gw_conditioned
from .mmspace import Correspondence, Coupling, FinitePointedMMSpace, spatial_gh_bound
from .stats import interquartile_range, ks_between_laws, ks_distance, mean_and_se, variance_and_se

__all__ = [
    "localization_stat",
    "localization_trend",
    "coupled_environment",
    "sinai_comparison",
    "sinai_trend",
    "crt_cross_check",
    "drifted_potential_check",
    "SCENARIOS",
]


def localization_stat(env, n, walkers, rng=None, sigma2=None):
    """Interquartile range of ``sigma^2 X_n / (log n)^2`` over independent
    walkers in one fixed environment.

    ``sigma2`` defaults to the environment's metadata and, when that is
    unknown, to the empirical variance of its ``log rho``.
    """
    n = check_positive_int(n, "n")
    if n < 2:
        raise InvalidParameterError("horizon n must be at least 2 (log 1 = 0)")
    s2 = _sigma2(env, sigma2)
    x = walk_positions(env, [n], walkers, rng)[:, 0]
    return interquartile_range(s2 * x / np.log(n) ** 2)


def _sigma2(env, sigma2):
    if sigma2 is not None:
        return float(sigma2)
    s2 = env.sigma2 / env.flatten_index
    if not np.isfinite(s2):
        s2 = float(np.var(env.log_rho, ddof=1))
    return s2


def localization_trend(n_envs=20, walkers=200, horizons=(10**3, 10**6), half_width=20_000, sigma=1.0, seed=None):
    """Spreads at the two horizons for each of ``n_envs`` environments.

    Both horizons are read off the same walks. Returns an array of shape
    ``(n_envs, 2)``.
    """
    rng = check_random_state(seed)
    lo, hi = sorted(horizons)
    out = np.empty((n_envs, 2))
    for k in range(n_envs):
        env = Environment1D.sample(-half_width, half_width, rng, "gaussian", sigma=sigma)
        x = walk_positions(env, [lo, hi], walkers, rng)
        s2 = env.sigma2
        out[k, 0] = interquartile_range(s2 * x[:, 0] / np.log(lo) ** 2)
        out[k, 1] = interquartile_range(s2 * x[:, 1] / np.log(hi) ** 2)
    return out


def coupled_environment(W, m):
    """Unflattened Gaussian environment whose m-flattening has potential
    ``V^m_i = W(i / m)`` on the lattice points inside W's window."""
    step = 1.0 / m / W.mesh
    k = int(round(step))
    if abs(step - k) > 1e-6:
        raise InvalidParameterError("potential mesh must divide 1/m")
    zero = int(np.argmin(np.abs(W.grid)))
    left = zero // k
    idx = np.arange(zero - left * k, W.grid.size, k)
    v = W.values[idx]
    log_rho = np.zeros(v.size)
    log_rho[1:] = np.sqrt(m) * np.diff(v)
    log_rho[0] = np.sqrt(m) * (v[0] - (v[1] if v.size > 1 else 0.0))  # any finite value
    return Environment1D(-left, v.size - 1 - left, log_rho, 1, 1.0)


def _lattice_space(V, m):
    vals = V.values
    k0 = -V.lo
    res = np.exp(vals[:-1]) / m  # resistance of edge {z, z+1}
    cum = np.concatenate([[0.0], np.cumsum(res)])
    coords = cum - cum[k0]
    mass = np.empty(vals.size)
    mass[1:] = (np.exp(-vals[1:]) + np.exp(-vals[:-1])) / m
    mass[0] = 2.0 * np.exp(-vals[0]) / m
    return coords, mass


def _continuum_space(W):
    x, w, h = W.grid, W.values, W.mesh
    ew = np.exp(w)
    S = np.concatenate([[0.0], np.cumsum(0.5 * h * (ew[1:] + ew[:-1]))])
    k0 = int(np.argmin(np.abs(x)))
    S -= S[k0]
    wts = np.full(x.size, h)
    wts[0] = wts[-1] = h / 2
    return S, 2.0 * np.exp(-w) * wts, k0


def sinai_comparison(W, m, *, t=1.0, brox=None, radius=1.0, cutoff=40.0):
    """KS distance and spatial bound between the m-flattened walk and the
    continuum limit in the coupled potential ``W``.

    ``brox`` may carry a precomputed ``(x, law)`` pair for the continuum
    marginal at time ``t``.
    """
    env = flatten(coupled_environment(W, m), m)
    V = potential1d(env)
    steps = int(round(m * m * t))
    law = walk_law(env, 0, steps, cutoff=cutoff)
    if brox is None:
        brox = brox_law(W, t, W.mesh, cutoff=cutoff)
    xb, pb = brox
    ks = ks_between_laws(env.sites / m, law, xb, pb)

    coords, mass = _lattice_space(V, m)
    S, cmass, k0 = _continuum_space(W)
    keep = np.flatnonzero(np.abs(S) <= radius)
    sites = np.floor(m * W.grid[keep] + 1e-9).astype(np.int64)
    used = np.unique(sites)
    li = sites - used[0]
    lattice_idx = used - V.lo
    if np.any(np.diff(used) != 1):
        raise InvalidParameterError("continuum grid is too coarse for this m")
    X = FinitePointedMMSpace(mass[lattice_idx], int(-used[0]), coords=coords[lattice_idx], marks=V.values[lattice_idx])
    Y = FinitePointedMMSpace(cmass[keep], int(k0 - keep[0]), coords=S[keep], marks=W.values[keep])
    corr = Correspondence(np.column_stack([li, np.arange(keep.size)]))
    pi = Coupling(li, np.arange(keep.size), cmass[keep], (X.n, Y.n))
    bound, parts = spatial_gh_bound(X, Y, corr, pi, return_parts=True)
    return {
        "m": int(m),
        "ks": float(ks),
        "escaped": float(max(0.0, 1.0 - law.sum())),
        "bound": float(bound),
        **{f"bound_{k}": float(v) for k, v in parts.items()},
    }


def sinai_trend(ladder=(100, 1000, 10_000), reps=20, half_width=10.0, seed=None, radius=1.0, t=1.0):
    """Per-replication comparison records for a common potential per
    replication; the mesh is ``1 / (2 max(ladder))``."""
    ladder = sorted(int(m) for m in ladder)
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    mesh = 1.0 / (2 * ladder[-1])
    out = []
    for r, child in enumerate(ss.spawn(reps)):
        rng = np.random.default_rng(child)
        W = make_potential("two-sided-bm", {"sigma": 1.0}, (-half_width, half_width), mesh, rng)
        brox = brox_law(W, t, mesh)
        for m in ladder:
            rec = sinai_comparison(W, m, t=t, brox=brox, radius=radius)
            rec["rep"] = r
            rec["brox_escaped"] = float(max(0.0, 1.0 - brox[1].sum()))
            out.append(rec)
    return out


def crt_cross_check(draws=10_000, N=2**14, K=50, seed=None):
    """Root-to-leaf distances from stick-breaking against ``2 g(U)`` from
    excursion coding, plus the first-cut tail at a few points."""
    rng = check_random_state(seed)
    stick = np.empty(draws)
    first = np.empty(draws)
    for k in range(draws):
        sb = stick_breaking(rng, K)
        stick[k] = sb.random_leaf_depth(rng)
        first[k] = sb.cuts[0]
    coded = np.empty(draws)
    for k in range(draws):
        e = sample_excursion(N, rng)
        coded[k] = 2.0 * e.values[rng.integers(N)]
    return stick, coded, first


def drifted_potential_check(n=10_000, draws=10_000, seed=None, offspring=None):
    """Field ``U`` at a vertex of depth ``floor(sqrt(n))`` with initial weights
    ``sqrt(n) / 2``, compared with mean ``depth / sqrt(n)`` and variance
    ``2 depth / sqrt(n)``."""
    rng = check_random_state(seed)
    depth = int(np.floor(np.sqrt(n)))
    dist = offspring or OffspringDistribution.poisson(1.0)
    tree = None
    for _ in range(200):
        tree = sample_gw_conditioned(dist, n, rng)
        if tree.height >= depth:
            break
    else:
        raise InvalidParameterError(f"no sampled tree reached depth {depth}")
    u = int(np.flatnonzero(tree.depth == depth)[0])
    a0 = default_weights(n)
    U = sample_path_field(a0, int(tree.depth[u]), draws, rng)
    mean, se_mean = mean_and_se(U)
    var, se_var = variance_and_se(U)
    return {
        "n": n,
        "depth": depth,
        "vertex": u,
        "alpha0": a0,
        "mean": mean,
        "mean_se": se_mean,
        "mean_target": depth / np.sqrt(n),
        "var": var,
        "var_se": se_var,
        "var_target": 2 * depth / np.sqrt(n),
    }


# ---------------------------------------------------------------------------
# scenario runners: (params, ladder value, rng) -> (stats dict, trajectory)
# a trajectory is (column names, 2-D array) or None


def _thin(n_points, total):
    return np.unique(np.linspace(0, total, min(n_points, total + 1)).astype(np.int64))


def run_sinai(params, m, rng):
    sigma = float(params.get("sigma", 1.0))
    half = int(params.get("window_factor", 30)) * m
    env = Environment1D.sample(-half, half, rng, "gaussian", sigma=sigma)
    flat = flatten(env, m)
    steps = m * m
    path = simulate_walk(flat, 0, steps, rng)
    keep = _thin(int(params.get("record", 1000)), steps)
    traj = (["step", "t", "x", "x_scaled"], np.column_stack([keep, keep / m**2, path[keep], path[keep] / m]))
    stats = {
        "final_scaled": float(path[-1] / m),
        "max_abs_scaled": float(np.abs(path).max() / m),
        "sigma2": float(env.sigma2),
    }
    return stats, traj


def run_barriers(params, n, rng):
    p = float(params.get("p", 0.7))
    lam = float(params.get("lam", 1.0))
    half = int(params.get("window_factor", 30)) * n
    benv = barrier_env(min(lam / n, 1.0), p, (-half, half), rng)
    env = benv.to_environment()
    steps = n * n
    path = simulate_walk(env, 0, steps, rng)
    keep = _thin(int(params.get("record", 1000)), steps)
    traj = (["step", "t", "x", "x_scaled"], np.column_stack([keep, keep / n**2, path[keep], path[keep] / n]))
    stats = {
        "final_scaled": float(path[-1] / n),
        "barriers_in_window": int(benv.barrier.sum()),
        "max_abs_scaled": float(np.abs(path).max() / n),
    }
    return stats, traj


def _offspring(params):
    code = str(params.get("offspring", "geometric")).strip()
    if code == "geometric":
        return OffspringDistribution.geometric(0.5)
    if code == "poisson":
        return OffspringDistribution.poisson(1.0)
    if code == "binary":
        return OffspringDistribution.binary()
    return OffspringDistribution([float(v) for v in code.split(",")])


def run_brw_bias(params, n, rng):
    beta = float(params.get("beta", 2.0))
    d = int(params.get("d", 1))
    horizon = float(params.get("horizon", 1.0))
    mode = str(params.get("mode", "max"))
    step_var = float(params.get("step_var", 1.0))
    dist = _offspring(params)
    tree = sample_gw_conditioned(dist, n, rng)
    marks = embed_brw(tree, gaussian_steps(step_var * np.eye(d)), rng)
    cond = biased_conductances(marks, beta, n**-0.25, mode=mode)
    mm = rescaled_bundle(tree_potential(cond), n)
    path = simulate_speed_motion(mm, 0, horizon, rng, max_jumps=int(params.get("max_jumps", 50_000_000)))
    pos = np.vstack([marks.positions, np.zeros((1, d))])[path.vertices]
    keep = np.unique(np.linspace(0, path.times.size - 1, min(int(params.get("record", 1000)), path.times.size)).astype(np.int64))
    cols = ["t", "vertex"] + [f"phi{k + 1}" for k in range(d)]
    traj = (cols, np.column_stack([path.times[keep], path.vertices[keep], pos[keep]]))
    rates = mm.total_rate()
    stats = {
        "jumps": int(path.times.size - 1),
        "truncated": bool(path.truncated),
        "final_vertex": int(path.vertices[-1]),
        "final_phi1_scaled": float(pos[-1, 0] * n**-0.25),
        "rate_min": float(rates.min()),
        "rate_max": float(rates.max()),
        "height": int(tree.height),
    }
    return stats, traj


def run_errw(params, n, rng):
    dist = _offspring(params)
    tree = sample_gw_conditioned(dist, n, rng, planted=False)
    rule = str(params.get("alpha0", "sqrt"))
    a0 = default_weights(n) if rule == "sqrt" else float(rule)
    steps = int(params.get("steps", 10 * n))
    path, state = simulate_errw(tree, a0, 0, steps, rng)
    env = sample_environment(tree, a0, rng)
    depth = int(np.floor(np.sqrt(n)))
    at = np.flatnonzero(tree.depth == min(depth, tree.height))
    keep = _thin(int(params.get("record", 1000)), steps)
    traj = (["step", "vertex", "depth"], np.column_stack([keep, path[keep], tree.depth[path[keep]]]))
    stats = {
        "alpha0": float(a0),
        "height": int(tree.height),
        "max_depth_visited": int(tree.depth[path].max()),
        "crossings_total": float(np.nansum(state.crossings)),
        "U_at_depth": float(env.U[at[0]]),
        "depth_used": int(tree.depth[at[0]]),
    }
    return stats, traj


def run_crt_check(params, N, rng):
    draws = int(params.get("draws", 1000))
    K = int(params.get("K", 50))
    stick = np.empty(draws)
    coded = np.empty(draws)
    for k in range(draws):
        stick[k] = stick_breaking(rng, K).random_leaf_depth(rng)
        coded[k] = 2.0 * sample_excursion(N, rng).values[rng.integers(N)]
    stats = {
        "draws": draws,
        "ks": ks_distance(stick, coded),
        "mean_stick": float(stick.mean()),
        "mean_coded": float(coded.mean()),
    }
    e = sample_excursion(N, rng)
    t = CodedTree(e)
    traj = (["t", "g"], np.column_stack([t.excursion.grid, e.values]))
    return stats, traj


def run_brox(params, inv_mesh, rng):
    h = 1.0 / inv_mesh
    half = float(params.get("window", 10.0))
    horizon = float(params.get("horizon", 1.0))
    paths = int(params.get("paths", 200))
    sigma = float(params.get("sigma", 1.0))
    W = make_potential("two-sided-bm", {"sigma": sigma}, (-half, half), h, rng)
    x = brox_positions(W, [horizon], h, paths, rng)[:, 0]
    xs, law = brox_law(W, horizon, h)
    stats = {
        "mean": float(x.mean()),
        "var": float(x.var(ddof=1)),
        "iqr": interquartile_range(x),
        "ks_vs_exact": float(_ks_sample_law(x, xs, law)),
    }
    traj = (["x", "W"], np.column_stack([W.grid, W.values]))
    return stats, traj


def _ks_sample_law(sample, xs, law):
    return ks_between_laws(sample, np.ones(sample.size), xs, law)


SCENARIOS = {
    "sinai": run_sinai,
    "barriers": run_barriers,
    "brw_bias": run_brw_bias,
    "errw": run_errw,
    "crt_check": run_crt_check,
    "brox": run_brox,
}
