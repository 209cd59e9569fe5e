"""Slow, independent reference computations used only by the tests.

Plain itertools enumeration and a chain forward pass; nothing here shares
code with the package's exact oracle.
"""

import itertools
import math

import numpy as np


def joint_energy(m, x):
    e = sum(float(m.node_potentials[i][x[i]]) for i in range(m.num_nodes))
    e += sum(float(t[x[i], x[j]]) for (i, j), t in zip(m.edges, m.edge_potentials))
    return e


def _lse(values):
    mx = max(values)
    return mx + math.log(sum(math.exp(v - mx) for v in values))


def log_partition(m):
    spaces = [range(c) for c in m.cardinalities]
    return _lse([joint_energy(m, x) for x in itertools.product(*spaces)])


def q_value(m, x_b):
    x = [0] * m.num_nodes
    for b, s in zip(m.max_nodes, x_b):
        x[b] = s
    vals = []
    for xa in itertools.product(*[range(m.cardinalities[a]) for a in m.sum_nodes]):
        for a, s in zip(m.sum_nodes, xa):
            x[a] = s
        vals.append(joint_energy(m, x))
    return _lse(vals)


def marginal_map(m):
    """(phi, argmax) with the lexicographically first maximizer."""
    best, arg = -math.inf, None
    for xb in itertools.product(*[range(m.cardinalities[b]) for b in m.max_nodes]):
        q = q_value(m, xb)
        if q > best + 1e-12:
            best, arg = q, xb
    return best, arg


def hmm_q_all(m, num_pairs):
    """Q for every MAX assignment of a chain-plus-leaves model by a forward pass.

    Rows follow lexicographic order of (x_P, ..., x_{2P-1}).
    """
    P = num_pairs
    k = m.cardinalities[0]
    XB = np.array(list(itertools.product(range(k), repeat=P)))
    chain = {(i, i + 1): m.edge_potentials[m.edge_index[(i, i + 1)]] for i in range(P - 1)}
    leaf = [m.edge_potentials[m.edge_index[(i, i + P)]] for i in range(P)]
    const = sum(np.asarray(m.node_potentials[P + i])[XB[:, i]] for i in range(P))
    alpha = None
    for i in range(P):
        local = np.asarray(m.node_potentials[i])[None, :] + leaf[i][:, XB[:, i]].T
        if alpha is None:
            alpha = local
        else:
            t = chain[(i - 1, i)]
            msg = np.log(np.exp(alpha[:, :, None] + t[None]).sum(axis=1))
            alpha = msg + local
    return const + np.log(np.exp(alpha).sum(axis=1)), XB


def loopy_messages(m, max_rule: bool, iterations: int = 5000, tol: float = 1e-14):
    """Plain synchronous sum- or max-product on linear-domain messages.

    Returns node beliefs, one normalized array per node.
    """
    psi_n = [np.exp(np.asarray(t) - np.max(t)) for t in m.node_potentials]
    psi_e = {}
    for (i, j), t in zip(m.edges, m.edge_potentials):
        e = np.exp(np.asarray(t) - np.max(t))
        psi_e[(i, j)] = e
        psi_e[(j, i)] = e.T
    nbrs = {i: [] for i in range(m.num_nodes)}
    for i, j in m.edges:
        nbrs[i].append(j)
        nbrs[j].append(i)
    msg = {d: np.full(m.cardinalities[d[1]], 1.0 / m.cardinalities[d[1]]) for d in psi_e}
    for _ in range(iterations):
        new = {}
        for (i, j) in msg:
            pre = psi_n[i].copy()
            for k in nbrs[i]:
                if k != j:
                    pre = pre * msg[(k, i)]
            t = pre[:, None] * psi_e[(i, j)]
            out = t.max(axis=0) if max_rule else t.sum(axis=0)
            new[(i, j)] = out / out.sum()
        delta = max(float(np.max(np.abs(new[d] - msg[d]))) for d in msg) if msg else 0.0
        msg = new
        if delta < tol:
            break
    beliefs = []
    for i in range(m.num_nodes):
        b = psi_n[i].copy()
        for k in nbrs[i]:
            b = b * msg[(k, i)]
        beliefs.append(b / b.sum())
    return beliefs
