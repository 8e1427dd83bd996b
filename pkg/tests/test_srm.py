import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sisvax.graph import (
    Graph, augment_graph, complete_graph, cycle_graph, generate_er, generate_partial_ktree, path_graph,
    random_tree, star_graph,
)
from sisvax.spectral import spectral_radius
from sisvax.srm import (
    DP_MODES, GUARD, _RadiusCache, _full_tables, baseline_largest_degree, baseline_random,
    baseline_walk, closed_walk_counts, dp_feasibility, dp_vaccinate, exhaustive_srm,
    greedy_vaccinate, tree_feasibility, tree_vaccinate,
)
from sisvax.treedec import TreeDecomposition, make_nice, nice_decomposition

EXACT_MODES = ["full", "pareto"]


def rho_without(g, removal):
    keep = np.ones(g.n, bool)
    keep[list(removal)] = False
    return spectral_radius(g, keep).value


def brute_optimum(g, K):
    # independent of exhaustive_srm: eigvalsh over every subset
    best = np.linalg.eigvalsh(g.dense)[-1] if g.n else 0.0
    for c in range(1, K + 1):
        for combo in combinations(range(g.n), c):
            keep = [v for v in range(g.n) if v not in combo]
            sub = g.dense[np.ix_(keep, keep)]
            val = np.abs(np.linalg.eigvalsh(sub)).max() if keep else 0.0
            best = min(best, val)
    return best


def ktree_instances(count, k, nmax, Kmax, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(k + 2, nmax + 1))
        g = generate_partial_ktree(n, k, 0.8, rng)
        out.append((g, int(rng.integers(1, Kmax + 1))))
    return out


class TestDpFeasibility:
    @pytest.mark.parametrize("mode", DP_MODES)
    def test_k4_one_removal(self, mode):
        g = complete_graph(4)
        ok, R = dp_feasibility(g, nice_decomposition(g), 1, 2.0, mode)
        assert ok and len(R) == 1

    @pytest.mark.parametrize("mode", DP_MODES)
    def test_k4_no_removal(self, mode):
        g = complete_graph(4)
        assert dp_feasibility(g, nice_decomposition(g), 0, 2.0, mode) == (False, frozenset())

    @pytest.mark.parametrize("mode", EXACT_MODES)
    def test_matches_exhaustive_on_partial_2trees(self, mode):
        for g, K in ktree_instances(30, 2, 12, 3, seed=1):
            ntd = nice_decomposition(g)
            for lam in (0.5, 1.0, 1.5, 2.0):
                ok, R = dp_feasibility(g, ntd, K, lam, mode)
                truth = exhaustive_srm(g, K).achieved_rho <= lam + GUARD
                assert ok == truth
                if ok:
                    assert len(R) <= K and rho_without(g, R) <= lam + 1e-8

    def test_rejects_invalid_decomposition(self):
        g = path_graph(3)
        bad = make_nice(TreeDecomposition((frozenset({0, 1}),), (None,)))
        with pytest.raises(ValueError):
            dp_feasibility(g, bad, 1, 1.0)

    @pytest.mark.parametrize("kw", [dict(K=-1, lam=1.0), dict(K=1, lam=-1.0)])
    def test_rejects_bad_arguments(self, kw):
        g = path_graph(3)
        with pytest.raises(ValueError):
            dp_feasibility(g, nice_decomposition(g), **kw)

    def test_unknown_mode(self):
        g = path_graph(3)
        with pytest.raises(ValueError):
            dp_feasibility(g, nice_decomposition(g), 1, 1.0, mode="magic")

    def test_table_entries_satisfy_triple(self):
        g = generate_partial_ktree(11, 2, 0.8, np.random.default_rng(7))
        ntd = nice_decomposition(g)
        radius = _RadiusCache(g)
        lam, K = 1.6, 3
        vt = [sum(1 << v for v in s) for s in ntd.subtree_vertices]
        checked = []

        def audit(t, table):
            for S, by_cost in table.items():
                for c, fam in by_cost.items():
                    for R in fam:
                        assert R.bit_count() == c <= K and not R & S
                        assert not R & ~vt[t]
                        gone = [v for v in range(g.n) if not vt[t] >> v & 1 or R >> v & 1]
                        assert rho_without(g, gone) <= lam + 1e-8
                        checked.append(t)

        _full_tables(g, ntd, K, lam, radius, False, audit)
        assert len(checked) > 100

    def test_beam_is_feasible_when_reported(self):
        g = augment_tree(30, seed=3)
        ntd = nice_decomposition(g)
        ok, R = dp_feasibility(g, ntd, 4, 2.2, "pareto", beam=1)
        if ok:
            assert len(R) <= 4 and rho_without(g, R) <= 2.2 + 1e-8


def augment_tree(n, seed):
    rng = np.random.default_rng(seed)
    return augment_graph(random_tree(n, rng), 0.05, rng)


class TestDpVaccinate:
    def test_star_center(self):
        r = dp_vaccinate(star_graph(9), 1, 1e-4)
        assert r.removal == (0,) and r.achieved_rho == pytest.approx(0, abs=1e-9)

    def test_p5_middle(self):
        r = dp_vaccinate(path_graph(5), 1, 1e-4)
        assert r.removal == (2,) and r.achieved_rho == pytest.approx(1.0, abs=1e-8)

    def test_p5_single_removal_oracle(self):
        radii = [rho_without(path_graph(5), [v]) for v in range(5)]
        assert int(np.argmin(radii)) == 2
        assert min(r for i, r in enumerate(radii) if i != 2) >= math.sqrt(2) - 1e-9

    def test_budget_zero(self):
        g = cycle_graph(5)
        r = dp_vaccinate(g, 0)
        assert r.removal == () and r.achieved_rho == pytest.approx(2.0, abs=1e-8)

    def test_epsilon_positive(self):
        with pytest.raises(ValueError):
            dp_vaccinate(path_graph(3), 1, 0)

    def test_budget_above_n(self):
        with pytest.raises(ValueError):
            dp_vaccinate(path_graph(3), 4)

    @pytest.mark.parametrize("mode", EXACT_MODES)
    def test_matches_exhaustive_on_partial_3trees(self, mode):
        eps = 1e-6
        for g, K in ktree_instances(30, 3, 12, 3, seed=2):
            r = dp_vaccinate(g, K, eps, mode=mode)
            opt = exhaustive_srm(g, K)
            assert abs(r.achieved_rho - opt.achieved_rho) <= eps + 1e-6
            assert r.k <= K
            assert abs(r.achieved_rho - rho_without(g, r.removal)) <= 1e-8

    def test_exhaustive_matches_eigvalsh_oracle(self):
        for g, K in ktree_instances(10, 2, 9, 2, seed=3):
            assert exhaustive_srm(g, K).achieved_rho == pytest.approx(brute_optimum(g, K), abs=1e-7)

    def test_binary_search_contract(self):
        g = generate_partial_ktree(10, 2, 0.8, np.random.default_rng(4))
        ntd = nice_decomposition(g)
        r = dp_vaccinate(g, 2, 1e-5, ntd=ntd)
        assert r.high - r.low <= 1e-5
        assert dp_feasibility(g, ntd, 2, r.high)[0]
        if r.low > 0:
            assert not dp_feasibility(g, ntd, 2, r.low)[0]
        assert r.achieved_rho <= r.high + 1e-8
        assert r.trace[0] == (float(g.degrees.max()), True)

    def test_monotone_in_budget(self):
        g = generate_partial_ktree(12, 3, 0.8, np.random.default_rng(5))
        radii = [dp_vaccinate(g, K, 1e-6).achieved_rho for K in range(5)]
        assert all(b <= a + 1e-9 for a, b in zip(radii, radii[1:]))

    def test_representative_never_beats_exact(self):
        for g, K in ktree_instances(10, 2, 10, 3, seed=6):
            exact = dp_vaccinate(g, K, 1e-6).achieved_rho
            rep = dp_vaccinate(g, K, 1e-6, mode="representative").achieved_rho
            assert rep >= exact - 1e-6

    def test_summary_line(self):
        r = dp_vaccinate(path_graph(5), 1, 1e-4)
        s = r.summary()
        assert s.startswith("solver=dp k=1 rho_before=") and "rho_after=1" in s and "width=1" in s


class TestTree:
    def test_p7_feasible_at_1_5(self):
        ok, R = tree_feasibility(path_graph(7), 1, 1.5)
        assert ok and len(R) == 1 and rho_without(path_graph(7), R) <= 1.5

    def test_k0_above_radius(self):
        t = random_tree(12, np.random.default_rng(1))
        assert tree_feasibility(t, 0, spectral_radius(t).value) == (True, frozenset())

    def test_star_infeasible(self):
        assert not tree_feasibility(star_graph(5), 0, 1.0)[0]

    def test_rejects_non_tree(self):
        with pytest.raises(ValueError):
            tree_feasibility(cycle_graph(4), 1, 1.0)
        with pytest.raises(ValueError):
            tree_vaccinate(Graph(3, [(0, 1)]), 1)

    def test_p7_vaccinate(self):
        r = tree_vaccinate(path_graph(7), 1, 1e-4)
        assert r.removal == (3,) and r.achieved_rho == pytest.approx(math.sqrt(2), abs=1e-8)

    def test_star_vaccinate(self):
        r = tree_vaccinate(star_graph(9), 1)
        assert r.removal == (0,) and r.achieved_rho == pytest.approx(0, abs=1e-9)

    def test_matches_exhaustive(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            n = int(rng.integers(3, 15))
            t = random_tree(n, rng)
            K = int(rng.integers(1, 4))
            r = tree_vaccinate(t, K, 1e-6)
            assert abs(r.achieved_rho - exhaustive_srm(t, K).achieved_rho) <= 2e-6
            assert r.k <= K


class TestGreedy:
    def test_star(self):
        assert greedy_vaccinate(star_graph(9), 1).removal == (0,)

    def test_p5(self):
        assert greedy_vaccinate(path_graph(5), 1).removal == (2,)

    def test_tie_smallest_id(self):
        assert greedy_vaccinate(complete_graph(5), 2).removal == (0, 1)

    def test_budget_zero_and_full(self):
        g = path_graph(4)
        assert greedy_vaccinate(g, 0).removal == ()
        assert sorted(greedy_vaccinate(g, 4).removal) == [0, 1, 2, 3]

    def test_dominance_chain(self):
        majority = 0
        cases = ktree_instances(30, 2, 12, 3, seed=9)
        for g, K in cases:
            ex = exhaustive_srm(g, K).achieved_rho
            dp = dp_vaccinate(g, K, 1e-6).achieved_rho
            gr = greedy_vaccinate(g, K).achieved_rho
            assert ex <= dp + 1e-8
            assert dp <= gr + 1e-6 + 1e-8
            rands = [baseline_random(g, K, np.random.default_rng(s)).achieved_rho for s in range(9)]
            others = min(baseline_largest_degree(g, K).achieved_rho,
                         baseline_walk(g, K).achieved_rho, float(np.median(rands)))
            majority += gr <= others + 1e-8
        assert majority > len(cases) / 2


class TestExhaustive:
    def test_k0(self):
        g = cycle_graph(6)
        r = exhaustive_srm(g, 0)
        assert r.removal == () and r.achieved_rho == pytest.approx(2.0)

    def test_k4_two(self):
        r = exhaustive_srm(complete_graph(4), 2)
        assert r.removal == (0, 1) and r.achieved_rho == pytest.approx(1.0)

    def test_smallest_zero_set(self):
        # K = n stops at the smallest size reaching radius zero
        r = exhaustive_srm(path_graph(4), 4)
        assert r.removal == (0, 2) and r.achieved_rho == 0.0

    def test_cap(self):
        with pytest.raises(ValueError):
            exhaustive_srm(path_graph(30), 10, cap=1000)


class TestBaselines:
    def test_random_extremes(self):
        g = path_graph(6)
        assert sorted(baseline_random(g, 6, np.random.default_rng(0)).removal) == list(range(6))
        assert baseline_random(g, 0, np.random.default_rng(0)).removal == ()

    def test_random_reproducible(self):
        g = path_graph(20)
        a = baseline_random(g, 5, np.random.default_rng(3)).removal
        assert a == baseline_random(g, 5, np.random.default_rng(3)).removal
        assert len(set(a)) == 5

    @pytest.mark.parametrize("fn", [baseline_random, baseline_largest_degree, baseline_walk])
    def test_budget_above_n(self, fn):
        args = (np.random.default_rng(0),) if fn is baseline_random else ()
        with pytest.raises(ValueError):
            fn(path_graph(3), 4, *args)

    def test_ld_star_and_regular(self):
        assert baseline_largest_degree(star_graph(5), 1).removal == (0,)
        assert baseline_largest_degree(cycle_graph(6), 3).removal == (0, 1, 2)

    def test_ld_p5(self):
        assert baseline_largest_degree(path_graph(5), 2).removal == (1, 2)

    def test_walk_len_two_is_degree(self):
        g = generate_er(15, 0.3, np.random.default_rng(2))
        assert closed_walk_counts(g, 2).tolist() == g.degrees.tolist()
        assert baseline_walk(star_graph(6), 1, 2).removal == (0,)

    def test_walk_triangle_tie(self):
        assert baseline_walk(complete_graph(3), 1, 2).removal == (0,)

    def test_p4_four_walks(self):
        # hand count of (A^4)_ii on 0-1-2-3: endpoints 2, interior 5
        assert closed_walk_counts(path_graph(4), 4).tolist() == [2, 5, 5, 2]
        assert set(baseline_walk(path_graph(4), 2, 4).removal) == {1, 2}

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 12), st.floats(0, 1), st.integers(0, 2**31), st.sampled_from([2, 4, 6, 8]))
    def test_walks_match_matrix_power(self, n, p, seed, L):
        g = generate_er(n, p, np.random.default_rng(seed))
        A = g.dense.astype(np.int64)
        assert closed_walk_counts(g, L).tolist() == np.diag(np.linalg.matrix_power(A, L)).tolist()

    @pytest.mark.parametrize("L", [0, 3, 5])
    def test_bad_walk_len(self, L):
        with pytest.raises(ValueError):
            closed_walk_counts(path_graph(3), L)
