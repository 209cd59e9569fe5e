"""Seeded random instances: hidden Markov chains, chessboard Ising grids, A-B trees.

Node potentials are drawn from N(0, 0.1) and off-diagonal edge entries
from N(0, sigma); diagonal edge entries are exactly 0. Both 0.1 and sigma
are used as standard deviations.
"""

from __future__ import annotations

import numpy as np

from .model import PairwiseModel

NODE_SCALE = 0.1


def _edge_table(rng: np.random.Generator, k: int, sigma: float) -> np.ndarray:
    t = rng.normal(0.0, sigma, size=(k, k)) if sigma > 0 else np.zeros((k, k))
    np.fill_diagonal(t, 0.0)
    return t


def _node_tables(rng: np.random.Generator, cards) -> list[np.ndarray]:
    return [rng.normal(0.0, NODE_SCALE, size=c) for c in cards]


def gen_hmm(num_pairs: int = 10, states: int = 3, sigma: float = 1.0, seed: int = 0) -> PairwiseModel:
    """Chain of SUM nodes 0..P-1, each with a MAX leaf P+i attached.

    Edges are listed chain first, then leaves.
    """
    if num_pairs < 1 or states < 2:
        raise ValueError("need num_pairs >= 1 and states >= 2")
    if not sigma >= 0:
        raise ValueError("sigma must be non-negative")
    P = num_pairs
    rng = np.random.default_rng(seed)
    cards = [states] * (2 * P)
    nodes = _node_tables(rng, cards)
    edges = [(i, i + 1) for i in range(P - 1)] + [(i, i + P) for i in range(P)]
    tables = [_edge_table(rng, states, sigma) for _ in edges]
    return PairwiseModel(cards, nodes, edges, tables, "S" * P + "M" * P)


def attractive_table(t: np.ndarray) -> np.ndarray:
    """Binary table with zero off-diagonal and |t01|, |t10| on the diagonal.

    theta(0,0) = |theta(0,1)|, theta(1,1) = |theta(1,0)|, so agreeing
    states are never penalized relative to disagreeing ones.
    """
    out = np.zeros((2, 2))
    out[0, 0] = abs(t[0, 1])
    out[1, 1] = abs(t[1, 0])
    return out


def gen_ising(
    rows: int = 10, cols: int = 10, mode: str = "mixed", sigma: float = 1.0, seed: int = 0
) -> PairwiseModel:
    """Binary 4-connected grid; node r*cols+c is SUM when r+c is even."""
    if rows < 2 or cols < 2:
        raise ValueError("grid needs at least 2 rows and 2 columns")
    if mode not in ("mixed", "attractive"):
        raise ValueError(f"unknown coupling mode {mode!r}")
    if not sigma >= 0:
        raise ValueError("sigma must be non-negative")
    rng = np.random.default_rng(seed)
    n = rows * cols
    cards = [2] * n
    nodes = _node_tables(rng, cards)
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    tables = [_edge_table(rng, 2, sigma) for _ in edges]
    if mode == "attractive":
        tables = [attractive_table(t) for t in tables]
    part = ["S" if (v // cols + v % cols) % 2 == 0 else "M" for v in range(n)]
    return PairwiseModel(cards, nodes, edges, tables, part)


def gen_ab_tree(num_nodes: int = 8, states: int = 2, sigma: float = 1.0, seed: int = 0) -> PairwiseModel:
    """Random A-B tree: a random tree on the MAX nodes with SUM subtrees hung off it.

    Each SUM group is a random tree joined to one MAX node by a single
    edge, so every SUM component meets exactly one crossing edge.
    """
    if num_nodes < 2 or states < 2:
        raise ValueError("need at least 2 nodes and 2 states")
    rng = np.random.default_rng(seed)
    n_max = int(rng.integers(1, num_nodes))
    n_sum = num_nodes - n_max
    perm = rng.permutation(num_nodes)
    max_ids, sum_ids = list(perm[:n_max]), list(perm[n_max:])
    edges = []
    for k in range(1, n_max):
        edges.append((max_ids[k], max_ids[int(rng.integers(k))]))
    # split the SUM nodes into consecutive groups
    cuts = sorted(rng.choice(np.arange(1, n_sum), size=int(rng.integers(0, n_sum)), replace=False)) if n_sum > 1 else []
    groups = np.split(np.array(sum_ids), cuts) if n_sum else []
    for g in groups:
        for k in range(1, len(g)):
            edges.append((g[k], g[int(rng.integers(k))]))
        edges.append((g[int(rng.integers(len(g)))], max_ids[int(rng.integers(n_max))]))
    edges = [(int(min(i, j)), int(max(i, j))) for i, j in edges]
    cards = [states] * num_nodes
    nodes = _node_tables(rng, cards)
    tables = [_edge_table(rng, states, sigma) for _ in edges]
    part = ["M" if v in set(int(x) for x in max_ids) else "S" for v in range(num_nodes)]
    return PairwiseModel(cards, nodes, edges, tables, part)
