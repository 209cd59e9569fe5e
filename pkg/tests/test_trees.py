import numpy as np
import pytest
from conftest import two_node
from hypothesis import given, settings
from hypothesis import strategies as st

from marginal_map import (
    ABSubtree,
    PairwiseModel,
    classify_edges,
    compute_rho,
    enumerate_type1,
    enumerate_type2,
    gen_ab_tree,
    gen_hmm,
    gen_ising,
    mix_collections,
    rho_trw1,
    rho_trw2,
)
from marginal_map.trees import TreeError, is_valid_subtree


def zero_model(cards, edges, partition) -> PairwiseModel:
    return PairwiseModel(
        cards, [np.zeros(c) for c in cards], edges, [np.zeros((cards[i], cards[j])) for i, j in edges], partition
    )


class TestType1:
    def test_hmm(self):
        m = gen_hmm(10, 3, 1.0, 0)
        trees = enumerate_type1(m)
        assert len(trees) == 10
        rho = compute_rho(m, trees).rho
        assert np.allclose(rho[:9], 1.0) and np.allclose(rho[9:], 0.1)

    def test_pair(self):
        trees = enumerate_type1(two_node())
        assert trees == [ABSubtree(frozenset({0}), 1.0)]

    def test_cyclic_sum_part_uses_spanning_forests(self):
        m = gen_ising(4, 4, sigma=1.0, seed=0).with_partition("S" * 15 + "M")
        trees = enumerate_type1(m, seed=3)
        assert all(is_valid_subtree(m, t.edges) for t in trees)
        rho = compute_rho(m, trees).rho[list(classify_edges(m).E_A)]
        # two subtrees, each carrying a spanning tree of the 15 SUM nodes
        assert rho.sum() == pytest.approx(14.0)
        assert np.any(rho < 1.0)

    def test_no_crossing_edges(self):
        with pytest.raises(TreeError):
            enumerate_type1(zero_model([2, 2], [(0, 1)], "SS"))


class TestType2:
    def test_hmm_single_tree(self):
        m = gen_hmm(10, 3, 1.0, 0)
        trees = enumerate_type2(m)
        assert len(trees) == 1
        rho = compute_rho(m, trees).rho
        assert np.allclose(rho[9:], 1.0) and np.allclose(rho[:9], 0.0)

    def test_pair(self):
        assert enumerate_type2(two_node()) == enumerate_type1(two_node())

    def test_shared_sum_endpoint(self):
        # SUM node 0 with crossing edges to MAX nodes 1 and 2
        m = zero_model([2, 2, 2], [(0, 1), (0, 2)], "SMM")
        trees = enumerate_type2(m)
        assert len(trees) == 2
        assert np.allclose(compute_rho(m, trees).rho, 0.5)


class TestMix:
    def test_alpha_one(self):
        m = gen_hmm(5, 2, 1.0, 0)
        c1 = enumerate_type1(m)
        assert mix_collections(c1, enumerate_type2(m), 1.0) == c1

    def test_trw2_hmm(self):
        m = gen_hmm(10, 3, 1.0, 0)
        rho = rho_trw2(m).rho
        assert np.allclose(rho[:9], 0.5) and np.allclose(rho[9:], 0.55)

    @pytest.mark.parametrize("alpha", [0.0, 0.3, 0.5, 1.0])
    def test_weights_sum_to_one(self, alpha):
        m = gen_ising(3, 3, sigma=1.0, seed=0)
        trees = mix_collections(enumerate_type1(m), enumerate_type2(m), alpha)
        assert sum(t.weight for t in trees) == pytest.approx(1.0, abs=1e-12)

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            mix_collections([], [], 1.5)


class TestRho:
    def test_single_tree(self):
        m = gen_hmm(3, 2, 1.0, 0)
        rho = compute_rho(m, [ABSubtree(frozenset({0, 1, 2}), 1.0)]).rho
        assert np.array_equal(rho, [1.0, 1.0, 1.0, 0.0, 0.0])

    def test_weights_must_sum_to_one(self):
        with pytest.raises(TreeError):
            compute_rho(two_node(), [ABSubtree(frozenset({0}), 0.5)])

    def test_invalid_tree_rejected(self):
        m = gen_hmm(3, 2, 1.0, 0)
        with pytest.raises(TreeError):
            compute_rho(m, [ABSubtree(frozenset({0, 1, 2, 3}), 1.0)])

    def test_max_edges_default(self):
        m = zero_model([2, 2, 2], [(0, 1), (1, 2)], "SMM")
        rho = rho_trw1(m).rho
        assert rho[1] == 0.5 and rho[0] == 1.0

    def test_sum_edges_full_when_connected(self):
        m = gen_hmm(10, 3, 1.0, 5)
        rho = rho_trw1(m).rho
        assert np.all(rho[list(classify_edges(m).E_A)] == 1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.integers(3, 10))
    def test_generated_trees_valid(self, seed, n):
        m = gen_ab_tree(n, 2, 1.0, seed)
        if not classify_edges(m).boundary:
            return
        for trees in (enumerate_type1(m, seed), enumerate_type2(m)):
            assert all(is_valid_subtree(m, t.edges) for t in trees)
            rho = compute_rho(m, trees).rho
            assert np.all((rho >= 0) & (rho <= 1))

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10_000))
    def test_grid_trees_valid(self, seed):
        m = gen_ising(4, 5, sigma=1.0, seed=seed)
        for trees in (enumerate_type1(m, seed), enumerate_type2(m)):
            assert all(is_valid_subtree(m, t.edges) for t in trees)


class TestValidity:
    def test_cycle_rejected(self):
        m = zero_model([2] * 3, [(0, 1), (1, 2), (0, 2)], "SSS")
        assert not is_valid_subtree(m, {0, 1, 2})
        assert is_valid_subtree(m, {0, 1})

    def test_sum_component_with_two_crossing(self):
        m = zero_model([2] * 3, [(0, 1), (0, 2)], "SMM")
        assert not is_valid_subtree(m, {0, 1})

    def test_max_edges_excluded(self):
        m = zero_model([2] * 2, [(0, 1)], "MM")
        assert not is_valid_subtree(m, {0})
