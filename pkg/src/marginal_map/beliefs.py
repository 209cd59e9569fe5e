"""Local-polytope beliefs, entropies and weighted free energies.

Every free energy handled here has the form

    <theta, tau> + sum_i w_i H_i - sum_ij w_ij I_ij

so the truncated Bethe, truncated TRW and ordinary Bethe objectives differ
only in their :class:`FreeEnergyWeights`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import networkx as nx
import numpy as np

from .model import PairwiseModel, classify_edges

LOG_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class Beliefs:
    """Node and edge pseudo-marginals, zero-padded to a common state count.

    ``node[i, :card_i]`` holds tau_i and ``edge[k, :card_i, :card_j]`` holds
    tau_ij for canonical edge ``k = (i, j)``.
    """

    node: np.ndarray
    edge: np.ndarray
    cardinalities: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]

    def node_belief(self, i: int) -> np.ndarray:
        return self.node[i, : self.cardinalities[i]]

    def edge_belief(self, k: int) -> np.ndarray:
        i, j = self.edges[k]
        return self.edge[k, : self.cardinalities[i], : self.cardinalities[j]]

    @classmethod
    def from_tables(cls, model: PairwiseModel, node_tables, edge_tables):
        pk = model.arrays
        node = np.zeros((pk.n, pk.K))
        edge = np.zeros((pk.m, pk.K, pk.K))
        for i, t in enumerate(node_tables):
            node[i, : len(t)] = t
        for k, t in enumerate(edge_tables):
            t = np.asarray(t)
            edge[k, : t.shape[0], : t.shape[1]] = t
        return cls(node, edge, model.cardinalities, model.edges)

    @classmethod
    def uniform(cls, model: PairwiseModel):
        pk = model.arrays
        node = pk.valid / pk.card[:, None]
        edge = pk.pair_valid / (pk.card[pk.edge_i] * pk.card[pk.edge_j])[:, None, None]
        return cls(node.astype(float), edge.astype(float), model.cardinalities, model.edges)

    def copy_with(self, node=None, edge=None):
        return type(self)(
            self.node if node is None else node,
            self.edge if edge is None else edge,
            self.cardinalities,
            self.edges,
        )


class MixedMarginals(Beliefs):
    """Belief tables induced by the mixed message scheme."""


@dataclass(frozen=True, eq=False)
class FreeEnergyWeights:
    node: np.ndarray
    edge: np.ndarray

    def __post_init__(self):
        node = np.array(self.node, dtype=float)
        edge = np.array(self.edge, dtype=float)
        if not (np.all(np.isfinite(node)) and np.all(np.isfinite(edge))):
            raise ValueError("weights must be finite")
        if np.any(node < 0) or np.any(edge < 0):
            raise ValueError("weights must be non-negative")
        node.setflags(write=False)
        edge.setflags(write=False)
        object.__setattr__(self, "node", node)
        object.__setattr__(self, "edge", edge)

    def __sub__(self, other: FreeEnergyWeights) -> FreeEnergyWeights:
        return FreeEnergyWeights(self.node - other.node, self.edge - other.edge)

    def __add__(self, other: FreeEnergyWeights) -> FreeEnergyWeights:
        return FreeEnergyWeights(self.node + other.node, self.edge + other.edge)


# ---------------------------------------------------------------------------
# entropy terms

def node_entropy(tau_i) -> float:
    t = np.asarray(tau_i, dtype=float)
    nz = t[t > 0]
    return float(-np.sum(nz * np.log(nz)))


def mutual_info(tau_ij, tau_i, tau_j) -> float:
    t = np.asarray(tau_ij, dtype=float)
    prod = np.outer(tau_i, tau_j)
    mask = t > 0
    return float(np.sum(t[mask] * (np.log(t[mask]) - np.log(np.maximum(prod[mask], LOG_FLOOR)))))


def _entropies(b: Beliefs) -> tuple[np.ndarray, np.ndarray]:
    """All node entropies and edge mutual informations at once."""
    tn = b.node
    with np.errstate(divide="ignore", invalid="ignore"):
        H = -np.sum(np.where(tn > 0, tn * np.log(np.maximum(tn, LOG_FLOOR)), 0.0), axis=1)
        if len(b.edges) == 0:
            return H, np.zeros(0)
        e = np.array(b.edges)
        prod = tn[e[:, 0]][:, :, None] * tn[e[:, 1]][:, None, :]
        te = b.edge
        ratio = np.log(np.maximum(te, LOG_FLOOR)) - np.log(np.maximum(prod, LOG_FLOOR))
        I = np.sum(np.where(te > 0, te * ratio, 0.0), axis=(1, 2))
    return H, I


def expected_energy(b: Beliefs, m: PairwiseModel) -> float:
    pk = m.arrays
    return float(np.sum(pk.theta_node0 * b.node) + np.sum(pk.theta_edge0 * b.edge))


def eval_free_energy(b: Beliefs, m: PairwiseModel, w: FreeEnergyWeights) -> float:
    _check_shapes(b, m)
    if w.node.shape != (m.num_nodes,) or w.edge.shape != (m.num_edges,):
        raise ValueError("weights do not match the model")
    H, I = _entropies(b)
    return expected_energy(b, m) + float(w.node @ H) - float(w.edge @ I)


def _check_shapes(b: Beliefs, m: PairwiseModel) -> None:
    pk = m.arrays
    if b.node.shape != (pk.n, pk.K) or b.edge.shape != (pk.m, pk.K, pk.K):
        raise ValueError("beliefs are not shape-compatible with the model")
    if b.edges != m.edges or b.cardinalities != m.cardinalities:
        raise ValueError("beliefs belong to a different graph")


def consistency_residual(b: Beliefs) -> float:
    """Largest violation of normalization and marginalization constraints."""
    res = float(np.max(np.abs(b.node.sum(axis=1) - 1.0), initial=0.0))
    if b.edges:
        e = np.array(b.edges)
        res = max(res, float(np.max(np.abs(b.edge.sum(axis=(1, 2)) - 1.0))))
        res = max(res, float(np.max(np.abs(b.edge.sum(axis=2) - b.node[e[:, 0]]))))
        res = max(res, float(np.max(np.abs(b.edge.sum(axis=1) - b.node[e[:, 1]]))))
    return res


# ---------------------------------------------------------------------------
# weightings

def weights_sum_bethe(m: PairwiseModel) -> FreeEnergyWeights:
    return FreeEnergyWeights(np.ones(m.num_nodes), np.ones(m.num_edges))


def weights_bethe_truncated(m: PairwiseModel) -> FreeEnergyWeights:
    node = np.where(m.is_max, 0.0, 1.0)
    edge = np.ones(m.num_edges)
    edge[list(classify_edges(m).max_edges)] = 0.0
    return FreeEnergyWeights(node, edge)


def weights_trw_truncated(m: PairwiseModel, rho) -> FreeEnergyWeights:
    """Truncated TRW weighting: rho on SUM-SUM and crossing edges, 0 on MAX-MAX."""
    r = _rho_array(m, rho)
    node = np.where(m.is_max, 0.0, 1.0)
    edge = r.copy()
    edge[list(classify_edges(m).max_edges)] = 0.0
    return FreeEnergyWeights(node, edge)


def _rho_array(m: PairwiseModel, rho) -> np.ndarray:
    r = getattr(rho, "rho", rho)
    if isinstance(r, dict):
        missing = [e for e in m.edges if e not in r]
        if missing:
            raise ValueError(f"rho is missing edge {missing[0]}")
        return np.array([r[e] for e in m.edges], dtype=float)
    r = np.asarray(r, dtype=float)
    if r.shape != (m.num_edges,):
        raise ValueError(f"rho has {r.size} entries for {m.num_edges} edges")
    return r


# ---------------------------------------------------------------------------
# concavity certificate

@dataclass(frozen=True)
class ConcavityCertificate:
    """Exact split of MAX-MAX edge weights onto their endpoints.

    ``kappa_directed[(i, j)]`` is the share of rho_ij charged to node ``i``.
    """

    kappa_node: dict[int, Fraction]
    kappa_directed: dict[tuple[int, int], Fraction]

    def satisfied(self, rho_b: dict[tuple[int, int], Fraction]) -> bool:
        load = dict.fromkeys(self.kappa_node, Fraction(0))
        for (i, j), k in self.kappa_directed.items():
            if k < 0:
                return False
            load[i] += k
        if any(self.kappa_node[i] + load[i] != 1 or self.kappa_node[i] < 0 for i in load):
            return False
        return all(
            self.kappa_directed[(i, j)] + self.kappa_directed[(j, i)] == r
            for (i, j), r in rho_b.items()
        )


def check_provably_concave(m: PairwiseModel, rho_b) -> ConcavityCertificate | None:
    """Find kappa >= 0 with kappa_i + sum_j kappa_ij = 1 and kappa_ij + kappa_ji = rho_ij.

    The system is a transportation problem: every MAX-MAX edge ships rho_ij
    to its two endpoints, each of which absorbs at most 1. It is decided by
    an exact max-flow over rationals; returns None when infeasible.
    """
    r = _rho_array(m, rho_b)
    max_edges = classify_edges(m).max_edges
    rho_exact = {m.edges[k]: Fraction(float(r[k])) for k in max_edges}
    if any(v < 0 for v in rho_exact.values()):
        raise ValueError("rho on MAX-MAX edges must be non-negative")

    g = nx.DiGraph()
    g.add_node("s")
    g.add_node("t")
    for (i, j), v in rho_exact.items():
        g.add_edge("s", ("e", i, j), capacity=v)
        g.add_edge(("e", i, j), ("n", i))
        g.add_edge(("e", i, j), ("n", j))
    for i in m.max_nodes:
        g.add_edge(("n", i), "t", capacity=Fraction(1))
    total = sum(rho_exact.values(), Fraction(0))
    if total == 0:
        flow = {}
    else:
        value, flow = nx.maximum_flow(g, "s", "t", flow_func=nx.algorithms.flow.edmonds_karp)
        if value != total:
            return None

    directed = {}
    for (i, j) in rho_exact:
        f = flow.get(("e", i, j), {})
        directed[(i, j)] = Fraction(f.get(("n", i), 0))
        directed[(j, i)] = Fraction(f.get(("n", j), 0))
    node = {}
    for i in m.max_nodes:
        node[i] = 1 - sum((v for (a, _), v in directed.items() if a == i), Fraction(0))
    return ConcavityCertificate(node, directed)

