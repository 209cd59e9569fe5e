"""Exact inference by enumeration and by elimination on forest sum parts.

These routines are the ground truth for tests, certificates and benchmark
scoring. MAX assignments are tuples ordered like ``model.max_nodes``.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy.special import logsumexp

from .beliefs import Beliefs
from .model import PairwiseModel, classify_edges, sum_part_is_forest, sum_subgraph

JOINT_CAP = 2**24
MAX_CAP = 2**20
CHUNK = 2**18


class StateSpaceExceeded(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ExactResult:
    phi_ab: float
    argmax_b: tuple[int, ...]
    q_values: np.ndarray | None = None


def _space(cards: Sequence[int]) -> int:
    return int(np.prod([int(c) for c in cards], dtype=object))


def _configs(cards: Sequence[int], chunk: int = CHUNK) -> Iterator[np.ndarray]:
    """All assignments in lexicographic order (first variable most significant)."""
    cards = tuple(int(c) for c in cards)
    total = _space(cards)
    if not cards:
        yield np.zeros((1, 0), dtype=np.int64)
        return
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        yield np.stack(np.unravel_index(idx, cards), axis=1)


def _energy_rows(m: PairwiseModel, X: np.ndarray) -> np.ndarray:
    e = np.zeros(len(X))
    for i, t in enumerate(m.node_potentials):
        e += t[X[:, i]]
    for (i, j), t in zip(m.edges, m.edge_potentials):
        e += t[X[:, i], X[:, j]]
    return e


def log_partition_bruteforce(m: PairwiseModel, cap: int = JOINT_CAP) -> float:
    if _space(m.cardinalities) > cap:
        raise StateSpaceExceeded(f"joint space {_space(m.cardinalities)} exceeds cap {cap}")
    parts = [logsumexp(_energy_rows(m, X)) for X in _configs(m.cardinalities)]
    return float(logsumexp(parts))


def map_bruteforce(m: PairwiseModel, cap: int = JOINT_CAP) -> tuple[float, tuple[int, ...]]:
    """Joint MAP over all nodes (ignores the partition); first maximizer wins."""
    if _space(m.cardinalities) > cap:
        raise StateSpaceExceeded(f"joint space {_space(m.cardinalities)} exceeds cap {cap}")
    best, arg = -np.inf, None
    for X in _configs(m.cardinalities):
        e = _energy_rows(m, X)
        k = int(np.argmax(e))
        if e[k] > best:
            best, arg = float(e[k]), tuple(int(v) for v in X[k])
    return best, arg


# ---------------------------------------------------------------------------
# Q(x_B) for batches of MAX assignments

def _max_part(m: PairwiseModel, XB: np.ndarray) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Energy terms not involving SUM nodes, and SUM-node unaries given x_B."""
    col = {b: c for c, b in enumerate(m.max_nodes)}
    cls = classify_edges(m)
    const = np.zeros(len(XB))
    for b in m.max_nodes:
        const += m.node_potentials[b][XB[:, col[b]]]
    for k in cls.max_edges:
        i, j = m.edges[k]
        const += m.edge_potentials[k][XB[:, col[i]], XB[:, col[j]]]
    unary = {a: np.tile(m.node_potentials[a], (len(XB), 1)) for a in m.sum_nodes}
    for k in cls.boundary:
        i, j = m.edges[k]
        t = m.edge_potentials[k]
        if i in col:
            unary[j] += t[XB[:, col[i]], :]
        else:
            unary[i] += t[:, XB[:, col[j]]].T
    return const, unary


def _q_forest(m: PairwiseModel, XB: np.ndarray) -> np.ndarray:
    const, unary = _max_part(m, XB)
    g = sum_subgraph(m)
    total = const
    for comp in nx.connected_components(g):
        root = min(comp)
        parent = nx.dfs_predecessors(g, root)
        for v in nx.dfs_postorder_nodes(g, root):
            if v == root:
                continue
            p = parent[v]
            k = m.edge_index[(min(v, p), max(v, p))]
            t = m.edge_potentials[k] if v < p else m.edge_potentials[k].T
            unary[p] = unary[p] + logsumexp(unary[v][:, :, None] + t[None], axis=1)
        total = total + logsumexp(unary[root], axis=1)
    return total


def _q_enumerate(m: PairwiseModel, XB: np.ndarray, cap: int) -> np.ndarray:
    A = m.sum_nodes
    cardsA = [m.cardinalities[a] for a in A]
    if _space(cardsA) > cap:
        raise StateSpaceExceeded(f"sum-part space {_space(cardsA)} exceeds cap {cap}")
    const, _ = _max_part(m, XB)
    col_b = {b: c for c, b in enumerate(m.max_nodes)}
    col_a = {a: c for c, a in enumerate(A)}
    cls = classify_edges(m)
    rows_per = max(1, CHUNK // max(1, len(XB)))
    parts = []
    for XA in _configs(cardsA, rows_per):
        e = np.zeros((len(XA), len(XB)))
        eA = np.zeros(len(XA))
        for a in A:
            eA += m.node_potentials[a][XA[:, col_a[a]]]
        for k in cls.sum_edges:
            i, j = m.edges[k]
            eA += m.edge_potentials[k][XA[:, col_a[i]], XA[:, col_a[j]]]
        e += eA[:, None]
        for k in cls.boundary:
            i, j = m.edges[k]
            t = m.edge_potentials[k]
            if i in col_a:
                e += t[XA[:, col_a[i]][:, None], XB[:, col_b[j]][None, :]]
            else:
                e += t[XB[:, col_b[i]][None, :], XA[:, col_a[j]][:, None]]
        parts.append(logsumexp(e, axis=0))
    return const + logsumexp(np.array(parts), axis=0)


def q_batch(m: PairwiseModel, XB, cap: int = JOINT_CAP, method: str = "auto") -> np.ndarray:
    """Q(x_B; theta) for each row of ``XB``."""
    XB = np.atleast_2d(np.asarray(XB, dtype=np.int64))
    if XB.shape[1] != len(m.max_nodes):
        raise ValueError(f"assignment has {XB.shape[1]} entries for {len(m.max_nodes)} MAX nodes")
    for c, b in enumerate(m.max_nodes):
        if XB.size and (XB[:, c].min() < 0 or XB[:, c].max() >= m.cardinalities[b]):
            raise ValueError(f"state out of range for node {b}")
    if method == "auto":
        method = "eliminate" if sum_part_is_forest(m) else "enumerate"
    if method == "eliminate":
        if not sum_part_is_forest(m):
            raise ValueError("elimination requires a forest sum part")
        return _q_forest(m, XB)
    return _q_enumerate(m, XB, cap)


def q_of_xb(m: PairwiseModel, x_b, cap: int = JOINT_CAP, method: str = "auto") -> float:
    return float(q_batch(m, [list(x_b)], cap, method)[0])


def marginal_map_bruteforce(
    m: PairwiseModel, max_cap: int = MAX_CAP, sum_cap: int = JOINT_CAP, keep_q: bool = True
) -> ExactResult:
    cardsB = [m.cardinalities[b] for b in m.max_nodes]
    if _space(cardsB) > max_cap:
        raise StateSpaceExceeded(f"max-part space {_space(cardsB)} exceeds cap {max_cap}")
    chunk = CHUNK if sum_part_is_forest(m) else max(1, CHUNK // 64)
    qs = [q_batch(m, XB, sum_cap) for XB in _configs(cardsB, chunk)]
    q = np.concatenate(qs)
    k = int(np.argmax(q))
    xb = tuple(int(v) for v in np.unravel_index(k, cardsB)) if cardsB else ()
    return ExactResult(float(q[k]), xb, q if keep_q else None)


def exact_marginals(m: PairwiseModel, cap: int = JOINT_CAP) -> Beliefs:
    if _space(m.cardinalities) > cap:
        raise StateSpaceExceeded(f"joint space {_space(m.cardinalities)} exceeds cap {cap}")
    logZ = log_partition_bruteforce(m, cap)
    K = max(m.cardinalities)
    node = np.zeros((m.num_nodes, K))
    edge = np.zeros((m.num_edges, K * K))
    for X in _configs(m.cardinalities):
        p = np.exp(_energy_rows(m, X) - logZ)
        for i in range(m.num_nodes):
            node[i] += np.bincount(X[:, i], weights=p, minlength=K)
        for k, (i, j) in enumerate(m.edges):
            edge[k] += np.bincount(X[:, i] * K + X[:, j], weights=p, minlength=K * K)
    edge = edge.reshape(m.num_edges, K, K)
    return Beliefs(node, edge, m.cardinalities, m.edges)
