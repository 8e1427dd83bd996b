import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sisvax.graph import Graph, complete_graph, cycle_graph, generate_er, generate_partial_ktree, path_graph, random_tree
from sisvax.treedec import (
    FORGET, INTRODUCE, JOIN, LEAF, TreeDecomposition, decomposition_from_ordering,
    elimination_ordering, make_nice, nice_decomposition, tree_decomposition,
    validate_decomposition, validate_nice,
)

METHODS = ["min_fill", "min_degree"]


def td(bags, parent):
    return TreeDecomposition(tuple(frozenset(b) for b in bags), tuple(parent))


class TestTreeDecomposition:
    @pytest.mark.parametrize("method", METHODS)
    def test_tree_width_one(self, method):
        g = random_tree(15, np.random.default_rng(0))
        d = tree_decomposition(g, method)
        assert validate_decomposition(g, d).ok and d.width == 1

    @pytest.mark.parametrize("method", METHODS)
    def test_clique(self, method):
        d = tree_decomposition(complete_graph(5), method)
        assert validate_decomposition(complete_graph(5), d).ok and d.width == 4

    @pytest.mark.parametrize("seed", range(5))
    def test_full_ktree_min_fill(self, seed):
        g = generate_partial_ktree(20, 3, 1.0, np.random.default_rng(seed))
        assert tree_decomposition(g, "min_fill").width == 3

    def test_cycle(self):
        assert tree_decomposition(cycle_graph(8)).width == 2

    def test_edgeless_and_single(self):
        for g in (Graph(1), Graph(4)):
            d = tree_decomposition(g)
            assert validate_decomposition(g, d).ok and d.width == 0

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            tree_decomposition(path_graph(3), "exact")

    def test_ordering_is_permutation(self):
        g = generate_er(12, 0.3, np.random.default_rng(1))
        for method in METHODS:
            assert sorted(elimination_ordering(g, method)) == list(range(12))

    def test_min_degree_tie_smallest_id(self):
        assert elimination_ordering(path_graph(4), "min_degree")[0] == 0

    def test_partial_ktree_width_bounded(self):
        for seed in range(5):
            g = generate_partial_ktree(16, 2, 0.7, np.random.default_rng(seed))
            assert tree_decomposition(g).width <= 2

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 14), st.floats(0, 1), st.integers(0, 2**31), st.sampled_from(METHODS))
    def test_always_valid(self, n, p, seed, method):
        g = generate_er(n, p, np.random.default_rng(seed))
        d = tree_decomposition(g, method)
        assert validate_decomposition(g, d).ok

    def test_any_ordering_gives_valid(self):
        g = generate_er(10, 0.4, np.random.default_rng(3))
        order = list(np.random.default_rng(4).permutation(10))
        assert validate_decomposition(g, decomposition_from_ordering(g, order)).ok


class TestValidate:
    def test_single_bag(self):
        g = complete_graph(4)
        assert validate_decomposition(g, td([range(4)], [None])).ok

    def test_missing_vertex(self):
        rep = validate_decomposition(path_graph(3), td([{0, 1}], [None]))
        assert not rep.ok and any("[2]" in v for v in rep.violations)

    def test_missing_edge(self):
        g = Graph(3, [(0, 1), (1, 2), (0, 2)])
        rep = validate_decomposition(g, td([{0, 1}, {1, 2}], [None, 0]))
        assert not rep and any("edge (0, 2)" in v for v in rep.violations)

    def test_disconnected_occurrence(self):
        g = path_graph(3)
        rep = validate_decomposition(g, td([{0, 1}, {1, 2}, {0}], [None, 0, 1]))
        assert any("vertex 0" in v and "disconnected" in v for v in rep.violations)

    def test_two_roots(self):
        rep = validate_decomposition(path_graph(2), td([{0, 1}, {1}], [None, None]))
        assert not rep.ok

    def test_parent_cycle(self):
        rep = validate_decomposition(path_graph(2), td([{0, 1}, {1}, {1}], [None, 2, 1]))
        assert not rep.ok


def check_nice(g, ntd):
    assert validate_nice(g, ntd).ok
    assert not ntd.bags[ntd.root]
    for t, kind in enumerate(ntd.node_type):
        kids = ntd.children[t]
        vt = ntd.subtree_vertices[t]
        if kind == LEAF:
            assert vt == frozenset()
        elif kind == INTRODUCE:
            assert vt == ntd.subtree_vertices[kids[0]] | ntd.bags[t]
        elif kind == FORGET:
            assert vt == ntd.subtree_vertices[kids[0]]
        else:
            assert vt == ntd.subtree_vertices[kids[0]] | ntd.subtree_vertices[kids[1]]


class TestMakeNice:
    def test_triangle_single_bag(self):
        g = complete_graph(3)
        ntd = make_nice(td([{0, 1, 2}], [None]))
        check_nice(g, ntd)
        kinds = [ntd.node_type[t] for t in ntd.postorder]
        assert kinds == [LEAF] + [INTRODUCE] * 3 + [FORGET] * 3
        assert ntd.width == 2

    def test_path_decomposition(self):
        g = path_graph(4)
        d = td([{0, 1}, {1, 2}, {2, 3}], [None, 0, 1])
        ntd = make_nice(d)
        check_nice(g, ntd)
        assert ntd.width == 1

    def test_star_needs_joins(self):
        g = Graph(4, [(0, 1), (0, 2), (0, 3)])
        d = td([{0}, {0, 1}, {0, 2}, {0, 3}], [None, 0, 0, 0])
        ntd = make_nice(d)
        check_nice(g, ntd)
        assert ntd.node_type.count(JOIN) == 2

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 16), st.floats(0, 1), st.integers(0, 2**31), st.sampled_from(METHODS))
    def test_width_and_size(self, n, p, seed, method):
        g = generate_er(n, p, np.random.default_rng(seed))
        d = tree_decomposition(g, method)
        ntd = make_nice(d)
        check_nice(g, ntd)
        assert ntd.width == d.width
        assert len(ntd) <= 4 * (d.width + 2) * n + 1

    def test_invalid_nice_rejected(self):
        g = path_graph(2)
        ntd = nice_decomposition(g)
        broken = type(ntd)(ntd.bags, ntd.parent, node_type=tuple(JOIN for _ in ntd.node_type),
                           vertex=ntd.vertex)
        assert not validate_nice(g, broken).ok

    def test_postorder_children_first(self):
        ntd = nice_decomposition(generate_partial_ktree(12, 2, 0.8, np.random.default_rng(2)))
        pos = {t: i for i, t in enumerate(ntd.postorder)}
        assert sorted(pos) == list(range(len(ntd)))
        for t, p in enumerate(ntd.parent):
            if p is not None:
                assert pos[t] < pos[p]
