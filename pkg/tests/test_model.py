import struct

import numpy as np
import pytest
from conftest import two_node
from hypothesis import given, settings
from hypothesis import strategies as st

from marginal_map import (
    ModelError,
    NodeType,
    PairwiseModel,
    classify_edges,
    gen_hmm,
    gen_ising,
    is_ab_tree,
    load_model,
    save_model,
)

ONE_NODE = "MMAP-PAIRWISE\n1\n2\nM\n0\n0 0\n"


def same_model(a: PairwiseModel, b: PairwiseModel) -> bool:
    if (a.cardinalities, a.edges, a.partition) != (b.cardinalities, b.edges, b.partition):
        return False
    if any(not np.array_equal(x, y) for x, y in zip(a.node_potentials, b.node_potentials)):
        return False
    return all(np.array_equal(x, y) for x, y in zip(a.edge_potentials, b.edge_potentials))


@st.composite
def models(draw):
    n = draw(st.integers(1, 6))
    cards = draw(st.lists(st.integers(2, 4), min_size=n, max_size=n))
    labels = draw(st.lists(st.sampled_from("SM"), min_size=n, max_size=n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    real = st.floats(-1e6, 1e6, allow_nan=False)
    nodes = [draw(st.lists(real, min_size=c, max_size=c)) for c in cards]
    tables = [
        np.array(draw(st.lists(real, min_size=cards[i] * cards[j], max_size=cards[i] * cards[j]))).reshape(
            cards[i], cards[j]
        )
        for i, j in edges
    ]
    return PairwiseModel(cards, nodes, edges, tables, labels)


class TestLoadSave:
    def test_minimal_model(self):
        m = load_model(ONE_NODE)
        assert m.num_nodes == 1 and m.num_edges == 0
        assert m.partition == (NodeType.MAX,)

    def test_minimal_document_lines(self):
        # header, n, cards, labels, m, one line of node values
        m = load_model(ONE_NODE)
        assert len(save_model(m).splitlines()) == 6

    def test_roundtrip_text(self):
        m = load_model(ONE_NODE)
        assert same_model(load_model(save_model(m)), m)

    @settings(max_examples=60, deadline=None)
    @given(models())
    def test_roundtrip_property(self, m):
        assert same_model(load_model(save_model(m)), m)

    def test_bit_faithful_floats(self):
        v = 0.1 + 0.2  # not representable in short decimal
        m = PairwiseModel([2], [[v, -1 / 3]], [], [], "S")
        back = load_model(save_model(m))
        for a, b in zip(m.node_potentials[0], back.node_potentials[0]):
            assert struct.pack("<d", a) == struct.pack("<d", b)

    def test_hmm_file_structure(self):
        m = load_model(save_model(gen_hmm(10, 3, 0.8, seed=1)))
        assert m.num_nodes == 20 and m.num_edges == 19
        assert m.sum_nodes == tuple(range(10)) and m.max_nodes == tuple(range(10, 20))

    def test_comments_ignored(self):
        text = "# a comment\nMMAP-PAIRWISE\n1 # trailing\n2\nS\n0\n0.5 -0.5\n"
        assert load_model(text).node_potentials[0][0] == 0.5

    @pytest.mark.parametrize(
        "text, line",
        [
            ("NOPE\n1\n2\nM\n0\n0 0\n", 1),
            ("MMAP-PAIRWISE\n1\n1\nM\n0\n0\n", 3),
            ("MMAP-PAIRWISE\n1\n2\nX\n0\n0 0\n", 4),
            ("MMAP-PAIRWISE\n1\n2\nM\n0\n0 nan\n", 6),
            ("MMAP-PAIRWISE\n1\n2\nM\n0\n0 abc\n", 6),
            ("MMAP-PAIRWISE\n1\n2\nM\n0\n0\n", 7),
            ("MMAP-PAIRWISE\n2\n2 2\nM S\n1\n0 0\n0 0\n0 0\n0 0 0 0\n", 9),
            ("MMAP-PAIRWISE\n1\n2\nM\n0\n0 0 7\n", 6),
        ],
    )
    def test_errors_carry_line_numbers(self, text, line):
        with pytest.raises(ModelError) as exc:
            load_model(text)
        assert exc.value.line == line
        assert f"line {line}" in str(exc.value)


class TestValidation:
    def test_shape_mismatch(self):
        with pytest.raises(ModelError):
            PairwiseModel([2, 3], [[0, 0], [0, 0, 0]], [(0, 1)], [np.zeros((2, 2))], "SM")

    def test_duplicate_edge(self):
        with pytest.raises(ModelError):
            PairwiseModel([2, 2], [[0, 0]] * 2, [(0, 1), (1, 0)], [np.zeros((2, 2))] * 2, "SM")

    def test_non_finite(self):
        with pytest.raises(ModelError):
            PairwiseModel([2], [[0, np.inf]], [], [], "S")

    def test_reversed_edge_is_canonical(self):
        t = np.array([[1.0, 2.0], [3.0, 4.0]])
        m = PairwiseModel([2, 2], [[0, 0]] * 2, [(1, 0)], [t], "SM")
        assert m.edges == ((0, 1),)
        assert np.array_equal(m.edge_potentials[0], t.T)


class TestClassify:
    def test_all_sum(self):
        m = PairwiseModel([2] * 3, [[0, 0]] * 3, [(0, 1), (1, 2)], [np.zeros((2, 2))] * 2, "SSS")
        c = classify_edges(m)
        assert c.E_A == (0, 1) and c.E_B == () and c.boundary == ()

    def test_pair(self):
        assert classify_edges(two_node()).boundary == (0,)

    def test_hmm_counts(self):
        c = classify_edges(gen_hmm(10, 3, 1.0, seed=0))
        assert (len(c.E_A), len(c.boundary), len(c.E_B)) == (9, 10, 0)

    @settings(max_examples=60, deadline=None)
    @given(models())
    def test_partition_of_edges(self, m):
        c = classify_edges(m)
        parts = list(c.E_A) + list(c.E_B) + list(c.boundary)
        assert sorted(parts) == list(range(m.num_edges))


class TestABTree:
    def test_hmm_is_not(self):
        assert not is_ab_tree(gen_hmm(10, 3, 1.0, seed=0))

    def test_pair_is(self):
        assert is_ab_tree(two_node())

    def test_grid_is_not(self):
        assert not is_ab_tree(gen_ising(10, 10, sigma=1.0, seed=0))

    def test_sum_component_with_two_boundary_edges(self):
        # M - S - M path: the single SUM component touches two crossing edges
        m = PairwiseModel([2] * 3, [[0, 0]] * 3, [(0, 1), (1, 2)], [np.zeros((2, 2))] * 2, "MSM")
        assert not is_ab_tree(m)

    def test_sum_leaves_on_max_path(self):
        m = PairwiseModel([2] * 4, [[0, 0]] * 4, [(0, 1), (0, 2), (1, 3)], [np.zeros((2, 2))] * 3, "MMSS")
        assert is_ab_tree(m)
