"""Weighted collections of A-B subtrees and their edge appearance probabilities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .beliefs import check_provably_concave
from .model import PairwiseModel, classify_edges, sum_subgraph

DEFAULT_RHO_MAX = 0.5


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class ABSubtree:
    edges: frozenset[int]
    weight: float


@dataclass(frozen=True, eq=False)
class EdgeAppearance:
    """Per-edge weights rho_ij aligned with ``model.edges``."""

    rho: np.ndarray

    def __post_init__(self):
        r = np.array(self.rho, dtype=float)
        if not np.all(np.isfinite(r)) or np.any(r < 0):
            raise ValueError("edge appearance weights must be finite and non-negative")
        r.setflags(write=False)
        object.__setattr__(self, "rho", r)

    def __getitem__(self, k: int) -> float:
        return float(self.rho[k])

    def as_dict(self, m: PairwiseModel) -> dict[tuple[int, int], float]:
        return {e: float(r) for e, r in zip(m.edges, self.rho)}

    def with_max_edges(self, m: PairwiseModel, rho_max: float = DEFAULT_RHO_MAX) -> EdgeAppearance:
        """Fill MAX-MAX edges, which tree collections never weight."""
        r = self.rho.copy()
        r[list(classify_edges(m).max_edges)] = rho_max
        return EdgeAppearance(r)


def is_valid_subtree(m: PairwiseModel, edges) -> bool:
    """No cycles, no MAX-MAX edges, and each SUM component meets at most one crossing edge."""
    cls = classify_edges(m)
    edges = set(edges)
    if edges & set(cls.max_edges):
        return False
    g = nx.Graph()
    g.add_edges_from(m.edges[k] for k in edges)
    if g.number_of_edges() and not nx.is_forest(g):
        return False
    sub_a = nx.Graph()
    sub_a.add_nodes_from(m.sum_nodes)
    sub_a.add_edges_from(m.edges[k] for k in edges if k in set(cls.sum_edges))
    comp = {}
    for c, nodes in enumerate(nx.connected_components(sub_a)):
        comp.update(dict.fromkeys(nodes, c))
    used = set()
    for k in edges & set(cls.boundary):
        i, j = m.edges[k]
        c = comp[i] if i in comp else comp[j]
        if c in used:
            return False
        used.add(c)
    return True


def _spanning_forest(m: PairwiseModel, rng: np.random.Generator | None) -> frozenset[int]:
    g = sum_subgraph(m)
    if nx.is_forest(g):
        return frozenset(classify_edges(m).sum_edges)
    # cyclic sum part: one uniformly random spanning tree per component
    chosen = set()
    for nodes in nx.connected_components(g):
        sub = g.subgraph(nodes)
        seed = None if rng is None else int(rng.integers(2**31))
        t = nx.random_spanning_tree(sub, seed=seed)
        chosen.update(m.edge_index[(min(i, j), max(i, j))] for i, j in t.edges)
    return frozenset(chosen)


def enumerate_type1(m: PairwiseModel, seed: int = 0) -> list[ABSubtree]:
    """One subtree per crossing edge: a spanning forest of the sum part plus that edge."""
    cls = classify_edges(m)
    if not cls.boundary:
        raise TreeError("type-I subtrees need at least one crossing edge")
    rng = np.random.default_rng(seed)
    w = 1.0 / len(cls.boundary)
    return [ABSubtree(_spanning_forest(m, rng) | {k}, w) for k in cls.boundary]


def enumerate_type2(m: PairwiseModel) -> list[ABSubtree]:
    """Sets of crossing edges with pairwise distinct SUM endpoints covering every crossing edge.

    Greedy conflict colouring: each round takes every still-uncovered edge
    whose SUM endpoint is free, then tops the round up with already covered
    edges so the set is maximal.
    """
    cls = classify_edges(m)
    if not cls.boundary:
        raise TreeError("type-II subtrees need at least one crossing edge")
    sum_end = {}
    for k in cls.boundary:
        i, j = m.edges[k]
        sum_end[k] = i if m.partition[i].value == "S" else j
    uncovered = list(cls.boundary)
    rounds = []
    while uncovered:
        taken, used = [], set()
        for k in uncovered:
            if sum_end[k] not in used:
                taken.append(k)
                used.add(sum_end[k])
        for k in cls.boundary:
            if sum_end[k] not in used:
                taken.append(k)
                used.add(sum_end[k])
        rounds.append(frozenset(taken))
        uncovered = [k for k in uncovered if k not in rounds[-1]]
    w = 1.0 / len(rounds)
    return [ABSubtree(r, w) for r in rounds]


def mix_collections(c1: list[ABSubtree], c2: list[ABSubtree], alpha: float) -> list[ABSubtree]:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    out = [ABSubtree(t.edges, alpha * t.weight) for t in c1]
    out += [ABSubtree(t.edges, (1.0 - alpha) * t.weight) for t in c2]
    return [t for t in out if t.weight > 0]


def compute_rho(m: PairwiseModel, trees: list[ABSubtree]) -> EdgeAppearance:
    total = math.fsum(t.weight for t in trees)
    if abs(total - 1.0) > 1e-9:
        raise TreeError(f"tree weights sum to {total}, not 1")
    parts: list[list[float]] = [[] for _ in range(m.num_edges)]
    for t in trees:
        if t.weight < 0 or not is_valid_subtree(m, t.edges):
            raise TreeError(f"invalid A-B subtree {sorted(t.edges)}")
        for k in t.edges:
            parts[k].append(t.weight)
    # exact summation so that edges in every tree get rho == 1.0
    rho = np.array([math.fsum(p) for p in parts])
    return EdgeAppearance(np.minimum(rho, 1.0))


# ---------------------------------------------------------------------------
# named weightings used by the solvers and benchmark

def rho_bethe(m: PairwiseModel, rho_max: float = DEFAULT_RHO_MAX) -> EdgeAppearance:
    return EdgeAppearance(np.ones(m.num_edges)).with_max_edges(m, rho_max)


def rho_trw1(m: PairwiseModel, rho_max: float = DEFAULT_RHO_MAX, seed: int = 0) -> EdgeAppearance:
    return compute_rho(m, enumerate_type1(m, seed)).with_max_edges(m, rho_max)


def rho_trw2(m: PairwiseModel, rho_max: float = DEFAULT_RHO_MAX, seed: int = 0) -> EdgeAppearance:
    trees = mix_collections(enumerate_type1(m, seed), enumerate_type2(m), 0.5)
    return compute_rho(m, trees).with_max_edges(m, rho_max)


def max_edges_concave(m: PairwiseModel, rho: EdgeAppearance) -> bool:
    return check_provably_concave(m, rho.rho) is not None
