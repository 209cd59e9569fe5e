"""Discrete pairwise models with a sum/max node partition.

Potentials are stored in the log domain: ``theta_i(x_i)`` per node and
``theta_ij(x_i, x_j)`` per edge, with edges kept canonically as ``(i, j)``
with ``i < j``.
"""

from __future__ import annotations

import enum
import io
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property

import networkx as nx
import numpy as np

HEADER = "MMAP-PAIRWISE"


class NodeType(str, enum.Enum):
    SUM = "S"
    MAX = "M"


SUM = NodeType.SUM
MAX = NodeType.MAX


class ModelError(ValueError):
    """Invalid model contents or malformed model text."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PairwiseModel:
    cardinalities: tuple[int, ...]
    node_potentials: tuple[np.ndarray, ...]
    edges: tuple[tuple[int, int], ...]
    edge_potentials: tuple[np.ndarray, ...]
    partition: tuple[NodeType, ...]

    def __init__(self, cardinalities, node_potentials, edges, edge_potentials, partition):
        cards = tuple(int(c) for c in cardinalities)
        n = len(cards)
        if any(c < 2 for c in cards):
            raise ModelError("every cardinality must be at least 2")
        if len(node_potentials) != n:
            raise ModelError(f"expected {n} node tables, got {len(node_potentials)}")
        if len(partition) != n:
            raise ModelError(f"expected {n} partition labels, got {len(partition)}")
        if len(edges) != len(edge_potentials):
            raise ModelError("edge list and edge tables differ in length")
        try:
            labels = tuple(NodeType(p) for p in partition)
        except ValueError as exc:
            raise ModelError(f"bad partition label: {exc}") from None

        nodes = []
        for i, (c, t) in enumerate(zip(cards, node_potentials)):
            t = _frozen(t)
            if t.shape != (c,):
                raise ModelError(f"node {i}: table shape {t.shape} != ({c},)")
            if not np.all(np.isfinite(t)):
                raise ModelError(f"node {i}: non-finite potential")
            nodes.append(t)

        canon_edges, tables, seen = [], [], set()
        for (i, j), t in zip(edges, edge_potentials):
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n):
                raise ModelError(f"edge ({i},{j}) references a missing node")
            if i == j:
                raise ModelError(f"self-loop on node {i}")
            t = np.array(t, dtype=float)
            if i > j:
                i, j, t = j, i, t.T
            if (i, j) in seen:
                raise ModelError(f"duplicate edge ({i},{j})")
            seen.add((i, j))
            if t.shape != (cards[i], cards[j]):
                raise ModelError(f"edge ({i},{j}): table shape {t.shape} != ({cards[i]},{cards[j]})")
            if not np.all(np.isfinite(t)):
                raise ModelError(f"edge ({i},{j}): non-finite potential")
            canon_edges.append((i, j))
            tables.append(_frozen(t))

        object.__setattr__(self, "cardinalities", cards)
        object.__setattr__(self, "node_potentials", tuple(nodes))
        object.__setattr__(self, "edges", tuple(canon_edges))
        object.__setattr__(self, "edge_potentials", tuple(tables))
        object.__setattr__(self, "partition", labels)

    @property
    def num_nodes(self) -> int:
        return len(self.cardinalities)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def sum_nodes(self) -> tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.partition) if p is SUM)

    @cached_property
    def max_nodes(self) -> tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.partition) if p is MAX)

    @cached_property
    def is_max(self) -> np.ndarray:
        a = np.array([p is MAX for p in self.partition], dtype=bool)
        a.setflags(write=False)
        return a

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: k for k, e in enumerate(self.edges)}

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return tuple(tuple(v) for v in nbrs)

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.num_nodes))
        g.add_edges_from(self.edges)
        return g

    @cached_property
    def is_forest(self) -> bool:
        return nx.is_forest(self.graph()) if self.num_nodes else True

    @cached_property
    def classification(self) -> EdgeClassification:
        return _classify(self)

    @cached_property
    def sum_is_forest(self) -> bool:
        g = sum_subgraph(self)
        return g.number_of_nodes() == 0 or nx.is_forest(g)

    @cached_property
    def arrays(self) -> PackedModel:
        return PackedModel(self)

    def with_potentials(self, node_potentials=None, edge_potentials=None) -> PairwiseModel:
        return PairwiseModel(
            self.cardinalities,
            self.node_potentials if node_potentials is None else node_potentials,
            self.edges,
            self.edge_potentials if edge_potentials is None else edge_potentials,
            self.partition,
        )

    def with_partition(self, partition: Sequence) -> PairwiseModel:
        return PairwiseModel(
            self.cardinalities, self.node_potentials, self.edges, self.edge_potentials, partition
        )

    def energy(self, x: Sequence[int]) -> float:
        """theta(x) for a full joint assignment."""
        val = sum(t[x[i]] for i, t in enumerate(self.node_potentials))
        val += sum(t[x[i], x[j]] for (i, j), t in zip(self.edges, self.edge_potentials))
        return float(val)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PairwiseModel):
            return NotImplemented
        return (
            self.cardinalities == other.cardinalities
            and self.edges == other.edges
            and self.partition == other.partition
            and all(np.array_equal(a, b) for a, b in zip(self.node_potentials, other.node_potentials))
            and all(np.array_equal(a, b) for a, b in zip(self.edge_potentials, other.edge_potentials))
        )

    __hash__ = object.__hash__


class PackedModel:
    """Padded array view of a model used by the vectorized solvers.

    States are padded to the largest cardinality ``K``. Directed edge ``2k``
    runs ``i -> j`` for canonical edge ``k = (i, j)``; ``2k + 1`` runs back.
    ``theta_dir[d, x_src, x_dst]`` is the edge table seen from the source.
    """

    def __init__(self, model: PairwiseModel):
        n, m = model.num_nodes, model.num_edges
        K = max(model.cardinalities)
        self.n, self.m, self.K = n, m, K
        self.card = np.array(model.cardinalities)
        self.valid = np.arange(K)[None, :] < self.card[:, None]
        self.is_max = np.array(model.is_max)

        self.theta_node = np.full((n, K), -np.inf)
        for i, t in enumerate(model.node_potentials):
            self.theta_node[i, : len(t)] = t
        self.theta_edge = np.full((m, K, K), -np.inf)
        for k, ((i, j), t) in enumerate(zip(model.edges, model.edge_potentials)):
            self.theta_edge[k, : t.shape[0], : t.shape[1]] = t

        e = np.array(model.edges, dtype=int).reshape(m, 2)
        self.edge_i, self.edge_j = e[:, 0], e[:, 1]
        self.src = np.empty(2 * m, dtype=int)
        self.dst = np.empty(2 * m, dtype=int)
        self.src[0::2], self.dst[0::2] = e[:, 0], e[:, 1]
        self.src[1::2], self.dst[1::2] = e[:, 1], e[:, 0]
        self.rev = np.arange(2 * m) ^ 1
        self.edge_of = np.arange(2 * m) // 2
        self.theta_dir = np.empty((2 * m, K, K))
        self.theta_dir[0::2] = self.theta_edge
        self.theta_dir[1::2] = self.theta_edge.transpose(0, 2, 1)
        # incidence used to gather incoming messages at each node
        self.incoming = np.zeros((n, 2 * m))
        self.incoming[self.dst, np.arange(2 * m)] = 1.0
        self.valid_dir = self.valid[self.dst]
        self.valid_src = self.valid[self.src]

        # zero-padded copies for expectations
        self.theta_node0 = np.where(self.valid, self.theta_node, 0.0)
        pair_valid = self.valid[self.edge_i][:, :, None] & self.valid[self.edge_j][:, None, :]
        self.pair_valid = pair_valid
        self.theta_edge0 = np.where(pair_valid, self.theta_edge, 0.0)

        for a in vars(self).values():
            if isinstance(a, np.ndarray):
                a.setflags(write=False)


@dataclass(frozen=True)
class EdgeClassification:
    sum_edges: tuple[int, ...]
    max_edges: tuple[int, ...]
    boundary: tuple[int, ...]

    @property
    def E_A(self):
        return self.sum_edges

    @property
    def E_B(self):
        return self.max_edges


def classify_edges(m: PairwiseModel) -> EdgeClassification:
    """Split edge indices into SUM-SUM, MAX-MAX and crossing edges."""
    return m.classification


def _classify(m: PairwiseModel) -> EdgeClassification:
    sums, maxes, cross = [], [], []
    for k, (i, j) in enumerate(m.edges):
        a, b = m.partition[i], m.partition[j]
        if a is SUM and b is SUM:
            sums.append(k)
        elif a is MAX and b is MAX:
            maxes.append(k)
        else:
            cross.append(k)
    return EdgeClassification(tuple(sums), tuple(maxes), tuple(cross))


def sum_subgraph(m: PairwiseModel) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(m.sum_nodes)
    g.add_edges_from(m.edges[k] for k in classify_edges(m).sum_edges)
    return g


def sum_part_is_forest(m: PairwiseModel) -> bool:
    return m.sum_is_forest


def is_ab_tree(m: PairwiseModel) -> bool:
    """Whether the graph is a tree along a sum-first elimination order.

    Requires a forest, at most one crossing edge per connected SUM
    component, and a forest quotient once each SUM component is contracted.
    """
    g = m.graph()
    if not nx.is_forest(g):
        return False
    cls = classify_edges(m)
    comp_of = {}
    for c, nodes in enumerate(nx.connected_components(sum_subgraph(m))):
        for v in nodes:
            comp_of[v] = c
    touches = np.zeros(len(set(comp_of.values())), dtype=int)
    for k in cls.boundary:
        i, j = m.edges[k]
        touches[comp_of[i if i in comp_of else j]] += 1
    if np.any(touches > 1):
        return False
    q = nx.MultiGraph()
    q.add_nodes_from(("B", v) for v in m.max_nodes)
    q.add_nodes_from(("A", c) for c in set(comp_of.values()))
    for k in cls.max_edges:
        i, j = m.edges[k]
        q.add_edge(("B", i), ("B", j))
    for k in cls.boundary:
        i, j = m.edges[k]
        a, b = (i, j) if i in comp_of else (j, i)
        q.add_edge(("A", comp_of[a]), ("B", b))
    return q.number_of_nodes() == 0 or nx.is_forest(q)


# ---------------------------------------------------------------------------
# text format

def _tokens(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        for tok in line.split():
            yield lineno, tok


def load_model(text: str | io.TextIOBase) -> PairwiseModel:
    if not isinstance(text, str):
        text = text.read()
    toks = _tokens(text)
    last = [0]

    def nxt(what: str) -> tuple[int, str]:
        try:
            lineno, tok = next(toks)
        except StopIteration:
            raise ModelError(f"unexpected end of input while reading {what}", last[0] + 1) from None
        last[0] = lineno
        return lineno, tok

    def integer(what: str) -> int:
        lineno, tok = nxt(what)
        try:
            return int(tok)
        except ValueError:
            raise ModelError(f"expected integer for {what}, got {tok!r}", lineno) from None

    def real(what: str) -> float:
        lineno, tok = nxt(what)
        try:
            v = float(tok)
        except ValueError:
            raise ModelError(f"expected real for {what}, got {tok!r}", lineno) from None
        if not math.isfinite(v):
            raise ModelError(f"non-finite value {tok!r} in {what}", lineno)
        return v

    lineno, head = nxt("header")
    if head != HEADER:
        raise ModelError(f"expected {HEADER}, got {head!r}", lineno)
    n = integer("node count")
    if n < 1:
        raise ModelError("node count must be positive", last[0])
    cards = []
    for i in range(n):
        c = integer(f"cardinality of node {i}")
        if c < 2:
            raise ModelError(f"cardinality of node {i} must be >= 2", last[0])
        cards.append(c)
    labels = []
    for i in range(n):
        lineno, tok = nxt(f"label of node {i}")
        if tok not in ("S", "M"):
            raise ModelError(f"partition label must be S or M, got {tok!r}", lineno)
        labels.append(tok)
    ne = integer("edge count")
    if ne < 0:
        raise ModelError("edge count must be non-negative", last[0])
    edges = []
    for k in range(ne):
        i = integer(f"edge {k} endpoint")
        j = integer(f"edge {k} endpoint")
        if not (0 <= i < n and 0 <= j < n):
            raise ModelError(f"edge ({i},{j}) references a missing node", last[0])
        edges.append((i, j))
    node_tables = [[real(f"theta of node {i}") for _ in range(cards[i])] for i in range(n)]
    edge_tables = []
    for i, j in edges:
        vals = [real(f"theta of edge ({i},{j})") for _ in range(cards[i] * cards[j])]
        edge_tables.append(np.array(vals).reshape(cards[i], cards[j]))
    extra = next(toks, None)
    if extra is not None:
        raise ModelError(f"trailing token {extra[1]!r}", extra[0])
    try:
        return PairwiseModel(cards, node_tables, edges, edge_tables, labels)
    except ModelError as exc:
        raise ModelError(str(exc), last[0]) from None


def _fmt(v: float) -> str:
    return repr(float(v))


def save_model(m: PairwiseModel) -> str:
    out = [
        HEADER,
        str(m.num_nodes),
        " ".join(map(str, m.cardinalities)),
        " ".join(p.value for p in m.partition),
        str(m.num_edges),
    ]
    out += [f"{i} {j}" for i, j in m.edges]
    out += [" ".join(_fmt(v) for v in t) for t in m.node_potentials]
    out += [" ".join(_fmt(v) for v in t.ravel()) for t in m.edge_potentials]
    return "\n".join(out) + "\n"


def uniform_model(cardinalities: Iterable[int], edges, partition) -> PairwiseModel:
    cards = list(cardinalities)
    return PairwiseModel(
        cards,
        [np.zeros(c) for c in cards],
        edges,
        [np.zeros((cards[i], cards[j])) for i, j in edges],
        partition,
    )
