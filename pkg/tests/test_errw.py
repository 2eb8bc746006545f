import io

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import chisquare, kstest

from rwre.errw import (
    build_field,
    default_weights,
    exact_errw_law,
    mixture_path_law,
    sample_environment,
    sample_gamma_weights,
    sample_path_field,
    sample_sinh,
    simulate_errw,
    simulate_mixture,
    sinh_cdf,
    sinh_logpdf,
    write_environment_csv,
)
from rwre.exceptions import InvalidParameterError
from rwre.rwre_tree import transition_matrix, tree_invariant, tree_potential
from rwre.treecore import OrderedTree


def exact_moments(alpha):
    f = lambda x, k: x**k * np.exp(sinh_logpdf(x, alpha))
    c = 1 / (2 * alpha)
    w = 12 / np.sqrt(alpha) + 1
    m = [integrate.quad(f, c - w, c + w, args=(k,), points=[c], limit=400, epsabs=1e-14)[0] for k in (0, 1, 2)]
    return m[0], m[1], m[2] - m[1] ** 2


class TestWeights:
    @pytest.mark.parametrize("n, value", [(16, 2.0), (4, 1.0)])
    def test_values(self, n, value):
        assert default_weights(n) == value

    def test_positive(self):
        assert all(default_weights(n) > 0 for n in range(1, 200))


class TestErrw:
    def test_star_first_step(self, rng):
        t = OrderedTree.star(2)
        law = exact_errw_law(t, 1.0, 0, 1)
        assert law == {(0, 1): 0.5, (0, 2): 0.5}
        ends = np.array([simulate_errw(t, 1.0, 0, 1, rng)[0][1] for _ in range(4000)])
        assert abs(np.mean(ends == 1) - 0.5) < 4 * np.sqrt(0.25 / 4000)

    def test_star_urn(self):
        law = exact_errw_law(OrderedTree.star(2), 1.0, 0, 3)
        p1 = law[(0, 1, 0, 1)]
        p2 = law[(0, 1, 0, 2)]
        assert p1 / (p1 + p2) == pytest.approx(3 / 4)

    def test_counter_identity(self, rng):
        t = OrderedTree.from_parent(np.r_[-1, [rng.integers(0, u) for u in range(1, 30)]])
        a0 = np.r_[np.nan, rng.uniform(0.5, 3.0, t.n - 1)]
        path, state = simulate_errw(t, a0, 0, 500, rng)
        cross = np.zeros(t.n)
        for a, b in zip(path[:-1], path[1:]):
            cross[max(a, b)] += 1  # the child endpoint labels the edge
        assert np.array_equal(state.counters[1:], a0[1:] + cross[1:])
        assert np.array_equal(state.crossings[1:], cross[1:])

    def test_continue_run(self, rng):
        t = OrderedTree.path(4)
        p1, s = simulate_errw(t, 1.0, 0, 10, rng)
        p2, s = simulate_errw(t, 1.0, int(p1[-1]), 10, rng, state=s)
        assert s.time == 20 and s.crossings[1:].sum() == 20

    def test_exact_law_sums_to_one(self):
        law = exact_errw_law(OrderedTree(np.array([-1, 0, 1, 0])), 2.0, 1, 5)
        assert sum(law.values()) == pytest.approx(1.0)

    def test_local_urn_independence(self, rng):
        # the choice at the root on the second visit depends only on the root's urn
        t = OrderedTree.star(3)
        law = exact_errw_law(t, 1.0, 0, 4)
        p = sum(v for k, v in law.items() if k[1] == 1 and k[3] == 1) / sum(v for k, v in law.items() if k[1] == 1)
        assert p == pytest.approx(3 / 5)


class TestGamma:
    def test_mean(self, rng):
        t = OrderedTree.path(2)
        a = np.array([sample_gamma_weights(t, 3.5, rng)[1] for _ in range(20000)])
        assert abs(a.mean() - 3.5) < 3 * a.std(ddof=1) / np.sqrt(a.size)

    def test_inverse_moments(self, rng):
        a = sample_gamma_weights(OrderedTree.path(100001), 50.0, rng)[1:]
        inv = 1 / a
        se = inv.std(ddof=1) / np.sqrt(inv.size)
        assert abs(inv.mean() - 1 / 49) < 3 * se
        v = inv.var(ddof=1)
        c = inv - inv.mean()
        se_v = np.sqrt((np.mean(c**4) - v**2) / inv.size)
        assert abs(v - 1 / (49**2 * 48)) < 4 * se_v

    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidParameterError):
            sample_gamma_weights(OrderedTree.path(3), 0.0)


class TestSinh:
    @pytest.mark.parametrize("alpha", [0.05, 0.7, 3.0, 40.0])
    def test_density_normalized(self, alpha):
        assert exact_moments(alpha)[0] == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("alpha", [10.0, 100.0])
    def test_acceptance_rate(self, rng, alpha):
        _, acc, prop = sample_sinh(alpha, 100000, rng, return_acceptance=True)
        rate = acc / prop
        target = np.exp(-1 / (8 * alpha))
        assert abs(rate - target) < 3 * np.sqrt(target * (1 - target) / prop)

    @pytest.mark.parametrize("alpha", [0.1, 1.0, 10.0, 100.0])
    def test_exact_moments(self, rng, alpha):
        _, mean, var = exact_moments(alpha)
        x = sample_sinh(alpha, 100000, rng)
        assert abs(x.mean() - mean) < 4 * x.std(ddof=1) / np.sqrt(x.size)
        c = x - x.mean()
        se_v = np.sqrt((np.mean(c**4) - x.var() ** 2) / x.size)
        assert abs(x.var(ddof=1) - var) < 4 * se_v

    def test_asymptotic_moments_large_alpha(self, rng):
        alpha = 100.0
        x = sample_sinh(alpha, 100000, rng)
        assert abs(x.mean() - 1 / (2 * alpha)) < 4 * x.std(ddof=1) / np.sqrt(x.size)
        c = x - x.mean()
        se_v = np.sqrt((np.mean(c**4) - x.var() ** 2) / x.size)
        assert abs(x.var(ddof=1) - 1 / alpha) < 4 * se_v

    def test_finite_alpha_variance_gap(self):
        # at alpha = 10 the exact variance sits below the 1/alpha asymptote
        _, mean, var = exact_moments(10.0)
        assert mean == pytest.approx(0.04772, abs=1e-4)
        assert var == pytest.approx(0.09537, abs=1e-4)

    @pytest.mark.parametrize("alpha", [0.2, 1.0, 10.0, 100.0])
    def test_ks_against_quadrature(self, rng, alpha):
        x = sample_sinh(alpha, 10000, rng)
        assert kstest(x, lambda v: sinh_cdf(v, alpha)).pvalue > 0.01

    def test_both_branches_agree(self, rng):
        a = sample_sinh(0.8, 20000, rng, threshold=0.5)
        b = sample_sinh(0.8, 20000, rng, threshold=1.0)
        from scipy.stats import ks_2samp

        assert ks_2samp(a, b).pvalue > 0.01

    def test_cdf_limits(self):
        assert sinh_cdf(-60.0, 2.0) == pytest.approx(0.0, abs=1e-12)
        assert sinh_cdf(60.0, 2.0) == pytest.approx(1.0, abs=1e-9)

    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidParameterError):
            sample_sinh(0.0)


class TestField:
    def test_zero(self):
        t = OrderedTree.star(3)
        assert np.all(build_field(t, np.zeros(4)) == 0)

    def test_path(self):
        np.testing.assert_allclose(build_field(OrderedTree.path(3), [0.0, 1.5, -0.25]), [0, 1.5, 1.25])

    def test_potential_two_ways(self, rng):
        t = OrderedTree.from_parent(np.r_[-1, [rng.integers(0, u) for u in range(1, 40)]])
        env = sample_environment(t, 2.0, rng)
        V = tree_potential(env.conductances()).V
        direct = np.array(
            [0.0] + [env.U[t.parent[u]] + env.U[u] - np.log(env.alpha[u]) for u in range(1, t.n)]
        )
        np.testing.assert_allclose(V, direct, atol=1e-12)


class TestMixture:
    def test_flat_environment_is_simple(self):
        from rwre.errw import SinhEnvironment

        t = OrderedTree.star(3, planted=False)
        env = SinhEnvironment(t, np.r_[np.nan, np.ones(3)], np.zeros(4), np.zeros(4))
        P = transition_matrix(env.conductances())
        np.testing.assert_allclose(P[0, 1:], 1 / 3)

    def test_normalization(self, rng):
        t = OrderedTree.from_parent(np.r_[-1, [rng.integers(0, u) for u in range(1, 25)]], planted=False)
        env = sample_environment(t, 1.0, rng)
        P = transition_matrix(env.conductances())
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-14)
        assert P.shape == (t.n, t.n)

    def test_weights_match_stated_rule(self, rng):
        t = OrderedTree.star(2, planted=False)
        env = sample_environment(t, 1.0, rng)
        P = transition_matrix(env.conductances())
        w = env.alpha[1:] * np.exp(-(env.U[0] + env.U[1:]))
        np.testing.assert_allclose(P[0, 1:], w / w.sum())

    def test_path_runs(self, rng):
        t = OrderedTree.path(5)
        env = sample_environment(t, 2.0, rng)
        p = simulate_mixture(t, env, 0, 50, rng)
        assert p.size == 51 and np.all(np.abs(np.diff(p)) == 1)

    @pytest.mark.parametrize("parent, alpha0, steps", [([-1, 0, 1], 1.0, 4), ([-1, 0, 0, 0], 2.0, 3), ([-1, 0, 1, 1], 1.0, 4)])
    def test_annealed_equivalence(self, rng, parent, alpha0, steps):
        t = OrderedTree(np.array(parent))
        exact = exact_errw_law(t, alpha0, 0, steps)
        samples = 20000
        counts = mixture_path_law(t, alpha0, 0, steps, samples, rng)
        keys = sorted(exact)
        assert set(counts) <= set(keys)
        obs = np.array([counts.get(k, 0) for k in keys])
        assert chisquare(obs, np.array([exact[k] for k in keys]) * samples).pvalue > 0.01


def test_path_field_depth_zero(rng):
    assert np.all(sample_path_field(3.0, 0, 10, rng) == 0)


def test_environment_csv(rng):
    env = sample_environment(OrderedTree.path(4), 2.0, rng)
    lines = write_environment_csv(env).splitlines()
    assert lines[0] == "edge,parent,alpha,omega,U" and len(lines) == 4
