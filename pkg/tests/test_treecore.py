import io
import itertools
from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from rwre.exceptions import ConsistencyError, InvalidParameterError
from rwre.treecore import (
    OffspringDistribution,
    OrderedTree,
    accumulate_from_root,
    contour,
    discrete_length_measure,
    embed_brw,
    gaussian_steps,
    head_function,
    read_parent_array,
    sample_gw_conditioned,
    tree_from_contour,
    write_contour_csv,
    write_parent_array,
)


def plane_trees(n):
    """All Lukasiewicz offspring sequences of plane trees with n vertices."""
    out = []
    for off in itertools.product(range(n), repeat=n):
        if sum(off) != n - 1:
            continue
        s = np.cumsum(np.array(off) - 1)
        if np.all(s[:-1] >= 0):
            out.append(tuple(off))
    return out


def random_tree(rng, n):
    parent = np.r_[-1, [rng.integers(0, u) for u in range(1, n)]]
    return OrderedTree.from_parent(parent)


trees = st.builds(
    lambda seed, n: random_tree(np.random.default_rng(seed), n),
    st.integers(0, 2**32 - 1),
    st.integers(1, 40),
)


class TestOrderedTree:
    def test_single_vertex(self):
        t = OrderedTree(np.array([-1]))
        assert t.n == 1 and t.height == 0
        assert len(contour(t)) == 1

    def test_rejects_non_preorder(self):
        with pytest.raises(InvalidParameterError):
            OrderedTree(np.array([-1, 0, 0, 1]))  # vertex 3 would sit inside the subtree of 1

    def test_from_parent_relabels(self):
        t, lab = OrderedTree.from_parent(np.array([2, 2, -1, 0]), return_labels=True)
        assert lab[2] == 0
        assert np.array_equal(t.parent, [-1, 0, 1, 0])

    def test_from_parent_rejects_cycles(self):
        with pytest.raises(InvalidParameterError):
            OrderedTree.from_parent(np.array([-1, 2, 1]))

    def test_offspring_round_trip(self):
        for off in plane_trees(5):
            assert tuple(OrderedTree.from_offspring(off).offspring) == off

    @given(trees)
    @settings(max_examples=60, deadline=None)
    def test_lca_brute_force(self, t):
        for u in range(t.n):
            pu = set(t.path_to_root(u).tolist())
            for v in range(t.n):
                common = [w for w in t.path_to_root(v) if w in pu]
                assert t.lca(u, v) == common[0]

    def test_branch_point(self):
        t = OrderedTree(np.array([-1, 0, 1, 1, 0]))
        assert t.branch_point(2, 3, 4) == 1
        assert t.branch_point(2, 2, 4) == 2

    def test_adjacency_has_base(self):
        t = OrderedTree.star(2)
        nbr, edge, deg = t.adjacency()
        assert deg.tolist() == [3, 1, 1, 1]
        assert nbr[0, 0] == t.base and nbr[t.base, 0] == 0
        nbr2, _, deg2 = OrderedTree(t.parent, planted=False).adjacency()
        assert deg2.tolist() == [2, 1, 1]


class TestContour:
    def test_single_edge(self):
        assert contour(OrderedTree.path(2)).heights.tolist() == [0, 1, 0]

    def test_path_of_three(self):
        assert contour(OrderedTree.path(3)).heights.tolist() == [0, 1, 2, 1, 0]

    def test_cherry(self):
        assert contour(OrderedTree.star(2)).heights.tolist() == [0, 1, 0, 1, 0]

    @given(trees)
    @settings(max_examples=60, deadline=None)
    def test_round_trip_and_length(self, t):
        c = contour(t)
        assert len(c) == 2 * t.n - 1
        assert tree_from_contour(c.heights).same_as(t)
        assert set(c.visit_order.tolist()) == set(range(t.n))

    def test_invalid_contour(self):
        with pytest.raises(InvalidParameterError):
            tree_from_contour([0, 2, 0])


class TestGaltonWatson:
    def test_n1(self, rng):
        t = sample_gw_conditioned(OffspringDistribution.geometric(), 1, rng)
        assert t.n == 1

    def test_n3_geometric(self, rng):
        hits = np.zeros(2)
        draws = 20000
        for _ in range(draws):
            t = sample_gw_conditioned(OffspringDistribution.geometric(), 3, rng)
            hits[int(t.height == 1)] += 1
        assert chisquare(hits, [draws / 2] * 2).pvalue > 0.01

    @pytest.mark.parametrize("dist", [OffspringDistribution.geometric(), OffspringDistribution.poisson()])
    def test_n4_enumeration(self, rng, dist):
        shapes = plane_trees(4)
        w = np.array([np.prod([dist.pmf[k] for k in s]) for s in shapes])
        w /= w.sum()
        draws = 20000
        counts = dict.fromkeys(shapes, 0)
        for _ in range(draws):
            counts[tuple(sample_gw_conditioned(dist, 4, rng).offspring)] += 1
        obs = np.array([counts[s] for s in shapes])
        assert obs.sum() == draws
        assert chisquare(obs, w * draws).pvalue > 0.01

    def test_poisson_weights_are_factorials(self):
        d = OffspringDistribution.poisson()
        assert d.pmf[3] == pytest.approx(np.exp(-1) / factorial(3))
        assert d.is_critical() and d.variance == pytest.approx(1.0)

    def test_vertex_count(self, rng):
        for n in (2, 17, 500):
            assert sample_gw_conditioned(OffspringDistribution.poisson(), n, rng).n == n

    def test_noncritical_rejected(self, rng):
        with pytest.raises(InvalidParameterError):
            sample_gw_conditioned(OffspringDistribution.geometric(0.4), 5, rng)

    def test_binary_needs_odd(self, rng):
        t = sample_gw_conditioned(OffspringDistribution.binary(), 7, rng)
        assert set(t.offspring.tolist()) <= {0, 2}

    def test_sigma_tree(self):
        assert OffspringDistribution.geometric().sigma_tree == pytest.approx(2 / np.sqrt(2))


class TestMarks:
    def test_root_at_origin(self, rng):
        t = random_tree(rng, 30)
        m = embed_brw(t, gaussian_steps(np.eye(2)), rng)
        assert np.all(m.positions[0] == 0) and m.d == 2

    def test_zero_steps(self, rng):
        t = random_tree(rng, 12)
        m = embed_brw(t, lambda r, k: np.zeros((k, 3)), rng)
        assert np.all(m.positions == 0)

    def test_path_additivity(self, rng):
        t = random_tree(rng, 40)
        m = embed_brw(t, gaussian_steps([[2.0]]), rng)
        for u in range(1, t.n):
            path = t.path_to_root(u)[:-1]
            assert m.positions[u, 0] == pytest.approx(m.increments[path, 0].sum(), abs=1e-12)

    def test_covariance_is_common_path(self, rng):
        t = OrderedTree(np.array([-1, 0, 1, 2, 2, 4]))  # vertices 3 and 5 share two edges
        cov = np.array([[1.5, 0.2], [0.2, 0.5]])
        reps = 10000
        a = np.empty(reps)
        b = np.empty(reps)
        for k in range(reps):
            m = embed_brw(t, gaussian_steps(cov), rng)
            a[k], b[k] = m.positions[3, 0], m.positions[5, 0]
        prod = a * b
        se = prod.std(ddof=1) / np.sqrt(reps)
        assert abs(prod.mean() - 1.5 * 2) < 4 * se

    def test_head_function_replays_contour(self, rng):
        t = random_tree(rng, 25)
        m = embed_brw(t, gaussian_steps(np.eye(1)), rng)
        c = contour(t)
        R = head_function(m, c)[:, 0]
        assert R[0] == 0 and R[-1] == 0
        for i in range(len(c) - 1):
            a, b = c.visit_order[i], c.visit_order[i + 1]
            if b != a and t.parent[b] == a:
                assert R[i + 1] - R[i] == pytest.approx(m.increments[b, 0])
            else:
                assert R[i + 1] - R[i] == pytest.approx(-m.increments[a, 0])

    def test_head_function_tree_mismatch(self, rng):
        m = embed_brw(OrderedTree.path(3), gaussian_steps(np.eye(1)), rng)
        with pytest.raises(ConsistencyError):
            head_function(m, contour(OrderedTree.star(2)))


class TestLengthMeasure:
    def test_path(self):
        np.testing.assert_array_equal(discrete_length_measure(OrderedTree.path(3), np.ones(3)), [0, 1, 1])

    @given(trees)
    @settings(max_examples=30, deadline=None)
    def test_ball_mass_is_depth(self, t):
        mass = discrete_length_measure(t, np.ones(t.n))
        assert mass.sum() == t.n - 1
        for u in range(t.n):
            assert mass[t.path_to_root(u)].sum() == t.depth[u]

    def test_accumulate(self):
        t = OrderedTree.path(4)
        np.testing.assert_array_equal(accumulate_from_root(t, np.array([9.0, 1, 2, 3])), [0, 1, 3, 6])


def test_parent_round_trip(rng):
    t = random_tree(rng, 30)
    assert read_parent_array(io.StringIO(write_parent_array(t))).same_as(t)


def test_contour_csv(rng):
    t = random_tree(rng, 6)
    m = embed_brw(t, gaussian_steps(np.eye(2)), rng)
    lines = write_contour_csv(contour(t), m).splitlines()
    assert lines[0] == "i,C,vertex,R1,R2" and len(lines) == 2 * t.n
