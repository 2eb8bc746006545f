"""Acceptance suite: one PASS/FAIL line per criterion.

Every criterion uses its own fixed seed ``BASE + k`` chosen before any run,
so reruns reproduce the printed numbers exactly. Run with ``pytest -s`` (the
lines are printed to the terminal either way) or as a plain script.
"""

import json
import os
import time

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import chisquare, ks_2samp, kstest

from rwre.cli import main as cli_main
from rwre.continuum import CodedTree, sample_excursion, sample_gaussian_field
from rwre.env1d import Environment1D, invariant1d, potential1d, resistance1d
from rwre.errw import (
    build_field,
    exact_errw_law,
    mixture_path_law,
    sample_gamma_weights,
    sample_sinh,
    simulate_errw,
    sinh_cdf,
    sinh_logpdf,
)
from rwre.harness import (
    crt_cross_check,
    drifted_potential_check,
    localization_trend,
    mean_and_se,
    sinai_trend,
    variance_and_se,
)
from rwre.rwre_tree import (
    TreeConductances,
    TreePotential,
    biased_conductances,
    hit_and_occupation,
    metric_measure,
    rescaled_bundle,
    simulate_discrete,
    transition_matrix,
    tree_invariant,
    tree_potential,
    tree_resistance,
)
from rwre.treecore import OffspringDistribution, OrderedTree, embed_brw, gaussian_steps, sample_gw_conditioned

BASE = 20240611


def rng_for(k):
    return np.random.default_rng(BASE + k)


def verdict(capsys, k, ok, detail, elapsed, limit):
    ok = bool(ok) and elapsed < limit
    with capsys.disabled():
        print(f"\nCriterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}  [{elapsed:.1f}s / {limit}s]")
    assert ok, detail


def random_tree(rng, n, planted=True):
    parent = np.r_[-1, [rng.integers(0, u) for u in range(1, n)]]
    return OrderedTree.from_parent(parent, planted)


def pooled_chisquare(obs, expected, floor=5.0):
    """Chi-square after pooling the cells with small expected counts."""
    obs, expected = np.asarray(obs, float), np.asarray(expected, float)
    small = expected < floor
    if small.sum() > 0:
        obs = np.r_[obs[~small], obs[small].sum()]
        expected = np.r_[expected[~small], expected[small].sum()]
    return chisquare(obs, expected * obs.sum() / expected.sum()).pvalue


def exact_moments(alpha):
    c = 1 / (2 * alpha)
    w = 40 / np.sqrt(alpha) + 1
    dens = lambda x: np.exp(sinh_logpdf(x, alpha))
    m1 = quad(lambda x: x * dens(x), c - w, c + w, limit=200)[0]
    m2 = quad(lambda x: (x - m1) ** 2 * dens(x), c - w, c + w, limit=200)[0]
    return m1, m2


def test_c01_exact_algebra(capsys):
    t0 = time.perf_counter()
    rng = rng_for(1)
    fails = []

    env = Environment1D.sample(-40, 40, rng, sigma=1.3)
    V1 = potential1d(env)
    if V1(0) != 0:
        fails.append("V(0)")
    flat = potential1d(Environment1D(-5, 5, np.zeros(11), 1, 1.0))
    if not all(invariant1d(flat, x) == 2.0 for x in range(-4, 6)):
        fails.append("flat nu")
    if not all(resistance1d(flat, x, y) == abs(x - y) for x in range(-5, 6) for y in range(-5, 6)):
        fails.append("flat r")
    for x in range(-39, 39):
        lhs = invariant1d(V1, x) * env.omega_plus[env.index(x)]
        rhs = invariant1d(V1, x + 1) * env.omega_minus[env.index(x + 1)]
        if abs(lhs - rhs) > 1e-12 * lhs:
            fails.append("1-d detailed balance")
            break
    for x, y, z in np.sort(rng.integers(-40, 41, (50, 3)), axis=1):
        if abs(resistance1d(V1, x, z) - resistance1d(V1, x, y) - resistance1d(V1, y, z)) > 1e-12 * (1 + resistance1d(V1, x, z)):
            fails.append("1-d additivity")
            break

    t = random_tree(rng, 60)
    V = TreePotential(t, np.r_[0.0, rng.normal(size=t.n - 1)])
    if tree_potential(TreeConductances.uniform(t)).V.any():
        fails.append("flat tree potential")
    if not np.array_equal(tree_resistance(TreePotential(t, np.zeros(t.n)), 5, np.arange(t.n)), t.graph_distance(5, np.arange(t.n))):
        fails.append("flat tree r")
    P = transition_matrix(TreeConductances(t, np.exp(-V.V)))
    F = np.r_[tree_invariant(V), 1.0][:, None] * P
    if np.max(np.abs(F - F.T)) > 1e-13:
        fails.append("tree detailed balance")
    q = rng.integers(0, t.n, (1000, 4))
    d = lambda a, b: tree_resistance(V, q[:, a], q[:, b])
    s = np.sort(np.column_stack([d(0, 1) + d(2, 3), d(0, 2) + d(1, 3), d(0, 3) + d(1, 2)]), axis=1)
    if np.any(s[:, 2] - s[:, 1] > 1e-12 * (1 + s[:, 2])):
        fails.append("four-point")
    for a in rng.integers(0, t.n, 100):
        w = t.path_to_root(a)[rng.integers(0, t.depth[a] + 1)]
        if abs(tree_resistance(V, a, 0) - tree_resistance(V, a, w) - tree_resistance(V, w, 0)) > 1e-12 * (1 + tree_resistance(V, a, 0)):
            fails.append("tree additivity")
            break

    m = embed_brw(t, gaussian_steps(np.eye(2)), rng)
    Vb = tree_potential(biased_conductances(m, 2.5, 0.7)).V
    phi = m.positions[:, 0]
    expect = -0.7 * np.log(2.5) * np.maximum(phi, phi[np.r_[0, t.parent[1:]]])
    expect[0] = 0.0
    if np.max(np.abs(Vb - expect)) > 1e-12:
        fails.append("potential identity")
    if np.max(np.abs(m.positions[1:] - m.positions[t.parent[1:]] - m.increments[1:])) > 1e-12:
        fails.append("phi additivity")
    omega = np.r_[0.0, rng.normal(size=t.n - 1)]
    U = build_field(t, omega)
    if np.max(np.abs(U[1:] - U[t.parent[1:]] - omega[1:])) > 1e-12:
        fails.append("U additivity")

    a0 = np.r_[np.nan, rng.uniform(0.5, 3.0, t.n - 1)]
    path, state = simulate_errw(OrderedTree(t.parent, planted=False), a0, 0, 2000, rng)
    cross = np.zeros(t.n)
    for a, b in zip(path[:-1], path[1:]):
        cross[max(a, b)] += 1
    if not np.array_equal(state.crossings[1:], cross[1:]):
        fails.append("ERRW counters")

    verdict(capsys, 1, not fails, f"violations: {fails or 'none'}", time.perf_counter() - t0, 1)


def test_c02_bundle_rate(capsys):
    t0 = time.perf_counter()
    rng = rng_for(2)
    worst = 0.0
    for n in (16, 64, 256):
        t = sample_gw_conditioned(OffspringDistribution.geometric(), n, rng)
        m = embed_brw(t, gaussian_steps(np.eye(1)), rng)
        V = tree_potential(biased_conductances(m, 2.0 ** (n**-0.25), 1.0))
        worst = max(worst, np.max(np.abs(rescaled_bundle(V).total_rate() / n**1.5 - 1)))
    verdict(capsys, 2, worst < 1e-12, f"max relative deviation from n^1.5 = {worst:.1e}", time.perf_counter() - t0, 1)


def test_c03_inverse_gamma(capsys):
    t0 = time.perf_counter()
    a = sample_gamma_weights(OrderedTree.star(100_000, planted=False), 50.0, rng_for(3))[1:]
    x = 1.0 / a
    mean, se_m = mean_and_se(x)
    var, se_v = variance_and_se(x)
    # Var(1/alpha) = (a0 - 1)^-2 (a0 - 2)^-1 for alpha ~ Gamma(a0, 1)
    zm = (mean - 1 / 49) / se_m
    zv = (var - 1 / (49**2 * 48)) / se_v
    verdict(capsys, 3, abs(zm) < 3 and abs(zv) < 4, f"z(mean) = {zm:+.2f}, z(var) = {zv:+.2f}", time.perf_counter() - t0, 10)


def test_c04_sinh_sampler(capsys):
    t0 = time.perf_counter()
    rng = rng_for(4)
    parts, ok = [], True
    for alpha in (10.0, 100.0):
        x, acc, prop = sample_sinh(alpha, 10_000, rng, return_acceptance=True)
        target = np.exp(-1 / (8 * alpha))
        rate = acc / prop
        z_acc = (rate - target) / np.sqrt(target * (1 - target) / prop)
        mean, se_m = mean_and_se(x)
        var, se_v = variance_and_se(x)
        zm = (mean - 1 / (2 * alpha)) / se_m
        zv = (var - 1 / alpha) / se_v
        p = kstest(x, lambda v: sinh_cdf(v, alpha)).pvalue
        ok &= abs(z_acc) < 3 and abs(zm) < 4 and abs(zv) < 4 and p > 0.01
        # for reference, the same draws against the exact finite-alpha moments
        em, ev = exact_moments(alpha)
        ze = ((mean - em) / se_m, (var - ev) / se_v)
        parts.append(
            f"a={alpha:g}: z(acc)={z_acc:+.2f} z(mean)={zm:+.2f} z(var)={zv:+.2f} KS p={p:.3f} "
            f"[exact-moment z {ze[0]:+.2f} {ze[1]:+.2f}]"
        )
    verdict(capsys, 4, ok, "; ".join(parts), time.perf_counter() - t0, 30)


def test_c05_annealed_equivalence(capsys):
    t0 = time.perf_counter()
    rng = rng_for(5)
    tree = OrderedTree.path(3, planted=False)
    exact = exact_errw_law(tree, 2.0, 0, 4)
    keys = sorted(exact)
    probs = np.array([exact[k] for k in keys])
    samples = 100_000
    mix = mixture_path_law(tree, 2.0, 0, 4, samples, rng)
    direct = {}
    for _ in range(samples):
        p = tuple(int(v) for v in simulate_errw(tree, 2.0, 0, 4, rng)[0])
        direct[p] = direct.get(p, 0) + 1
    ps = []
    for counts in (mix, direct):
        assert set(counts) <= set(keys)
        ps.append(chisquare(np.array([counts.get(k, 0) for k in keys]), probs * samples).pvalue)
    verdict(capsys, 5, min(ps) > 0.01, f"chi-square p: mixture {ps[0]:.3f}, ERRW {ps[1]:.3f}", time.perf_counter() - t0, 60)


def test_c06_stationarity(capsys):
    t0 = time.perf_counter()
    rng = rng_for(6)
    tree = sample_gw_conditioned(OffspringDistribution.geometric(), 20, rng)
    c = biased_conductances(embed_brw(tree, gaussian_steps(np.eye(1)), rng), 2.0, 1.0)
    V = tree_potential(c)
    nu = np.r_[tree_invariant(V), 1.0]
    P = transition_matrix(c)
    s = np.sqrt(nu)
    ev = np.linalg.eigvalsh(s[:, None] * P / s[None, :])
    t_rel = 1.0 / (1.0 - ev[-2])
    k = int(np.ceil(10 * t_rel)) | 1  # odd, so the parity classes alternate evenly
    path = simulate_discrete(c, 0, 1_000_000, rng)
    kept = path[::k]
    obs = np.bincount(kept, minlength=nu.size)
    p = pooled_chisquare(obs, nu)
    verdict(capsys, 6, p > 0.01, f"t_rel = {t_rel:.1f}, thinning {k}, {kept.size} samples, chi-square p = {p:.3f}", time.perf_counter() - t0, 60)


def test_c07_speed_motion_oracles(capsys):
    t0 = time.perf_counter()
    rng = rng_for(7)
    runs = 100_000
    zs, ok = [], True
    for n in (5, 8, 10):
        t = random_tree(rng, n, planted=False)
        V = TreePotential(t, np.r_[0.0, rng.normal(size=n - 1)])
        mm = metric_measure(V)
        u1, u2, u3 = (int(v) for v in rng.choice(n, 3, replace=False))
        b = t.branch_point(u1, u2, u3)
        # (iii) from u3, hit u1 before u2
        hit, _ = hit_and_occupation(mm, u3, [u1, u2], None, runs, rng)
        p_hat = np.mean(hit == u1)
        p = tree_resistance(V, b, u2) / tree_resistance(V, u1, u2)
        z_hit = (p_hat - p) / np.sqrt(max(p * (1 - p), 1e-300) / runs) if 0 < p < 1 else (0.0 if p_hat == p else np.inf)
        # (iv) time at u3 before hitting u2, started from u1
        _, occ = hit_and_occupation(mm, u1, [u2], u3, runs, rng)
        target = 2 * tree_resistance(V, b, u2) * mm.nu[u3]
        m_hat, se = mean_and_se(occ)
        z_occ = (m_hat - target) / se if se > 0 else (0.0 if m_hat == target else np.inf)
        ok &= abs(z_hit) < 3 and abs(z_occ) < 4
        zs.append(f"n={n}: z(hit)={z_hit:+.2f} z(occ)={z_occ:+.2f}")
    verdict(capsys, 7, ok, "; ".join(zs), time.perf_counter() - t0, 300)


def test_c08_crt_cross_construction(capsys):
    t0 = time.perf_counter()
    stick, coded, first = crt_cross_check(10_000, seed=BASE + 8)
    p = ks_2samp(stick, coded).pvalue
    zs = []
    for u in (0.5, 1.0, 2.0):
        target = np.exp(-u * u / 2)
        zs.append((np.mean(first > u) - target) / np.sqrt(target * (1 - target) / first.size))
    ok = p > 0.01 and all(abs(z) < 3 for z in zs)
    tail = " ".join(f"{z:+.2f}" for z in zs)
    verdict(capsys, 8, ok, f"KS p = {p:.3f}; tail z at u=0.5,1,2: {tail}", time.perf_counter() - t0, 120)


def test_c09_field_covariance(capsys):
    t0 = time.perf_counter()
    rng = rng_for(9)
    N = 1024
    t = CodedTree(sample_excursion(N, rng))
    pairs = rng.integers(1, N, (5, 2))
    idx = np.unique(pairs)
    reps = 10_000
    vals = np.array([sample_gaussian_field(t, idx, 1, rng).first for _ in range(reps)])
    pos = {k: j for j, k in enumerate(idx)}
    zs = []
    for s, u in pairs:
        prod = vals[:, pos[s]] * vals[:, pos[u]]
        m, se = mean_and_se(prod)
        zs.append((m - t.excursion.running_min(s, u)) / se)
    verdict(capsys, 9, all(abs(z) < 4 for z in zs), "z: " + " ".join(f"{z:+.2f}" for z in zs), time.perf_counter() - t0, 120)


@pytest.mark.slow
def test_c10_sinai_brox_trend(capsys):
    t0 = time.perf_counter()
    ladder = (100, 1000, 10_000)
    recs = sinai_trend(ladder, reps=20, seed=BASE + 10)
    ks = [np.median([r["ks"] for r in recs if r["m"] == m]) for m in ladder]
    bd = [np.median([r["bound"] for r in recs if r["m"] == m]) for m in ladder]
    ok = ks[0] >= ks[1] >= ks[2] and bd[0] > bd[1] > bd[2]
    detail = "median KS " + " ".join(f"{v:.4f}" for v in ks) + "; median bound " + " ".join(f"{v:.3f}" for v in bd)
    verdict(capsys, 10, ok, detail, time.perf_counter() - t0, 1200)


@pytest.mark.slow
def test_c11_localization(capsys):
    t0 = time.perf_counter()
    spreads = localization_trend(20, 200, (10**3, 10**6), 20_000, seed=BASE + 11)
    wins = int(np.sum(spreads[:, 1] < spreads[:, 0]))
    verdict(capsys, 11, wins >= 14, f"IQR shrank in {wins}/20 environments", time.perf_counter() - t0, 600)


@pytest.mark.slow
def test_c12_drifted_potential(capsys):
    t0 = time.perf_counter()
    r = drifted_potential_check(10_000, 10_000, seed=BASE + 12)
    zm = (r["mean"] - r["mean_target"]) / r["mean_se"]
    zv = (r["var"] - r["var_target"]) / r["var_se"]
    ok = abs(zm) < 4 and abs(zv) < 4
    verdict(capsys, 12, ok, f"depth {r['depth']}: z(mean) = {zm:+.2f}, z(var) = {zv:+.2f}", time.perf_counter() - t0, 600)


def test_c13_cli_determinism(capsys, tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "sinai.ini"
    cfg.write_text("[experiment]\nscenario = sinai\nladder = 10, 100\nreplications = 2\nseed = 13\n\n[model]\nsigma = 1.0\n")
    outs = []
    for name, workers in (("a", "1"), ("b", "1"), ("c", "2")):
        out = tmp_path / name
        assert cli_main(["sinai", "--config", str(cfg), "--seed", str(BASE + 13), "--out", str(out), "--workers", workers]) == 0
        outs.append((out / "stats.jsonl").read_bytes())
    capsys.readouterr()
    lines = outs[0].decode().splitlines()
    ok = outs[0] == outs[1] == outs[2] and len(lines) == 4 and all(json.loads(x)["experiment"] == "sinai" for x in lines)
    verdict(capsys, 13, ok, f"stats byte-identical over 3 runs (workers 1, 1, 2): {ok}", time.perf_counter() - t0, 60)


if __name__ == "__main__":
    raise SystemExit(pytest.main([os.path.abspath(__file__), "-q", "-p", "no:cacheprovider"]))
