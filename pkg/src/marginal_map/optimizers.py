"""Proximal (CCCP) maximization of truncated free energies, and EM.

CCCP splits the entropy weights as omega+ - omega-, keeps the concave
omega+ part exact and linearizes the omega- part at the current beliefs.
Each outer step is then a weighted message passing problem with weights
omega+ on potentials shifted by omega- log tau:

    theta_i  <- theta_i  + omega-_i  log tau_i
    theta_ij <- theta_ij + omega-_ij log(tau_ij / (tau_i tau_j))

The shift is always applied to the original potentials, so the outer
iterates monotonically increase the target free energy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .beliefs import (
    Beliefs,
    FreeEnergyWeights,
    check_provably_concave,
    eval_free_energy,
    weights_bethe_truncated,
)
from .exact import JOINT_CAP, MAX_CAP, StateSpaceExceeded, _configs, _space
from .mixed_mp import (
    SolveConfig,
    SolveReport,
    SolverError,
    _to_beliefs,
    decode_with_ties,
    logsumexp,
    max_beliefs_integral,
    q_if_tractable,
    run_mixed,
    run_weighted,
)
from .model import PairwiseModel, classify_edges, sum_part_is_forest

log = logging.getLogger(__name__)

# inner tolerance relative to the last outer improvement
INNER_FACTOR = 1e-3


@dataclass(frozen=True)
class EntropyDecomposition:
    """Entropy weights split as ``plus - minus``, both non-negative."""

    plus: FreeEnergyWeights
    minus: FreeEnergyWeights
    concave_target: bool = False

    @property
    def target(self) -> FreeEnergyWeights:
        return self.plus - self.minus


def default_decomposition(m: PairwiseModel, target: FreeEnergyWeights | None = None) -> EntropyDecomposition:
    """All-ones concave part; the remainder is subtracted."""
    target = target or weights_bethe_truncated(m)
    plus = FreeEnergyWeights(np.ones(m.num_nodes), np.ones(m.num_edges))
    dn, de = plus.node - target.node, plus.edge - target.edge
    if np.any(dn < 0) or np.any(de < 0):
        raise ValueError("target weights exceed the all-ones concave part")
    return EntropyDecomposition(plus, FreeEnergyWeights(dn, de))


def trw_decomposition(
    m: PairwiseModel, rho, node_weight: float | None = None, eps: float = 0.0
) -> EntropyDecomposition:
    """Concave split of the truncated TRW entropy, optionally plus ``eps`` H_B.

    The truncated TRW entropy is concave on its own, so the subtracted part
    only has to make MAX-MAX edges usable by weighted message passing:

        minus = sum_B (L_b + d - eps) H_b - (1 - eps) sum_EB rho_ij I_ij

    with L_b the load a concavity certificate puts on node b (or the full
    incident weight when no certificate exists). Both parts are concave for
    any d >= eps. Small d makes each outer step close to the target problem
    itself; by default d_b is the total rho on b's crossing edges, which
    makes a MAX leaf's outgoing message independent of its incoming one.
    """
    if node_weight is not None and node_weight <= 0:
        raise ValueError("node_weight must be positive")
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    r = np.asarray(getattr(rho, "rho", rho), dtype=float)
    if np.any(r <= 0):
        raise ValueError("rho must be positive on every edge")
    mb = list(classify_edges(m).max_edges)
    load = np.zeros(m.num_nodes)
    cert = check_provably_concave(m, r)
    if cert is not None:
        for b, kappa in cert.kappa_node.items():
            load[b] = 1.0 - float(kappa)
    else:
        for k in mb:
            i, j = m.edges[k]
            load[i] += r[k]
            load[j] += r[k]
    if node_weight is None:
        d = np.zeros(m.num_nodes)
        for k in classify_edges(m).boundary:
            d[list(m.edges[k])] += r[k]
        d = np.where(d + load > 0, d, 1.0)
    else:
        d = np.full(m.num_nodes, float(node_weight))
    d = np.maximum(d, eps)
    plus_node = np.where(m.is_max, load + d, 1.0)
    minus_node = np.where(m.is_max, load + d - eps, 0.0)
    minus_edge = np.zeros(m.num_edges)
    minus_edge[mb] = (1.0 - eps) * r[mb]
    plus = FreeEnergyWeights(plus_node, r)
    return EntropyDecomposition(plus, FreeEnergyWeights(minus_node, minus_edge), concave_target=True)


def degree_decomposition(m: PairwiseModel) -> EntropyDecomposition:
    """Ordinary Bethe entropy as sum of pair entropies minus (degree - 1) node entropies."""
    deg = np.array([len(nb) for nb in m.neighbors], dtype=float)
    plus = FreeEnergyWeights(np.maximum(deg, 1.0), np.ones(m.num_edges))
    minus = FreeEnergyWeights(np.maximum(deg, 1.0) - 1.0, np.zeros(m.num_edges))
    return EntropyDecomposition(plus, minus)


def _shifted(pk, lt, le, minus: FreeEnergyWeights):
    wn = minus.node[:, None]
    node = pk.theta_node + np.where(wn > 0, wn * np.where(pk.valid, lt, 0.0), 0.0)
    with np.errstate(invalid="ignore"):
        ratio = le - lt[pk.edge_i][:, :, None] - lt[pk.edge_j][:, None, :]
    we = minus.edge[:, None, None]
    ratio = np.where(pk.pair_valid & np.isfinite(ratio), ratio, 0.0)
    edge = pk.theta_edge + np.where(we > 0, we * ratio, 0.0)
    return node, edge


def _clamped_node(pk, m: PairwiseModel, x_b):
    node = pk.theta_node.copy()
    for b, s in zip(m.max_nodes, x_b):
        keep = node[b, s]
        node[b, :] = -np.inf
        node[b, s] = keep
    return node


def cccp_solve(
    m: PairwiseModel,
    decomp: EntropyDecomposition | None = None,
    cfg: SolveConfig | None = None,
    outer_tol: float = 1e-8,
    max_outer: int = 500,
    polish: bool = True,
    algorithm: str = "cccp",
) -> tuple[Beliefs, SolveReport]:
    """Maximize the target free energy of ``decomp`` by CCCP.

    After the outer loop the MAX nodes are optionally clamped to the
    decoded assignment and the concave part solved once more; the clamped
    point is kept only when it scores higher.
    """
    decomp = decomp or default_decomposition(m)
    cfg = cfg or SolveConfig(tolerance=1e-10)
    target = decomp.target
    pk = m.arrays

    lt, le, run = run_weighted(m, decomp.plus, cfg)
    logm = run.logm
    inner, all_converged = run.iterations, run.converged
    b = _to_beliefs(m, lt, le)
    trace = [eval_free_energy(b, m, target)]
    converged = False
    outer = 0
    for outer in range(1, max_outer + 1):
        tn, te = _shifted(pk, lt, le, decomp.minus)
        try:
            step = trace[-1] - trace[-2] if len(trace) > 1 else 1.0
            icfg = replace(cfg, tolerance=float(np.clip(INNER_FACTOR * abs(step), cfg.tolerance, 1e-4)))
            lt2, le2, run = run_weighted(m, decomp.plus, icfg, tn, te, logm0=logm)
        except SolverError as exc:
            raise SolverError(f"inner solver failed at outer iteration {outer}: {exc}") from None
        inner += run.iterations
        all_converged &= run.converged
        b2 = _to_beliefs(m, lt2, le2)
        f = eval_free_energy(b2, m, target)
        lt, le, logm, b = lt2, le2, run.logm, b2
        trace.append(f)
        if abs(trace[-1] - trace[-2]) < outer_tol:
            converged = True
            break

    notes = []
    if not converged and len(trace) > 1:
        log.info("CCCP stopped after %d outer steps; last change %.3g", outer, abs(trace[-1] - trace[-2]))
    x_b, ties = decode_with_ties(b, m)
    if polish and m.max_nodes:
        try:
            lt3, le3, run = run_weighted(m, decomp.plus, cfg, _clamped_node(pk, m, x_b), pk.theta_edge)
            bc = _to_beliefs(m, lt3, le3)
            fc = eval_free_energy(bc, m, target)
            inner += run.iterations
            # strict improvement only; ties keep the unclamped beliefs
            if fc > trace[-1] + 1e-12 * max(1.0, abs(trace[-1])):
                b = bc
                trace.append(fc)
                notes.append("accepted clamped MAX assignment")
        except SolverError as exc:
            notes.append(f"clamped re-solve failed: {exc}")
        x_b, ties = decode_with_ties(b, m)

    report = SolveReport(
        algorithm=algorithm,
        x_b=x_b,
        objective=max(trace),
        q_hat=q_if_tractable(m, x_b),
        upper_bound=decomp.concave_target and converged and all_converged,
        converged=converged,
        iterations=outer,
        residual=abs(trace[-1] - trace[-2]) if len(trace) > 1 else 0.0,
        ties=ties,
        integral=max_beliefs_integral(b, m),
        trace=trace,
        inner_iterations=inner,
        notes=notes,
    )
    return b, report


def mix_bethe_cccp(m: PairwiseModel, cfg: SolveConfig | None = None):
    return cccp_solve(m, default_decomposition(m), cfg, algorithm="mix-bethe-cccp")


def mix_trw_cccp(m: PairwiseModel, rho, cfg: SolveConfig | None = None, algorithm: str = "mix-trw-cccp"):
    return cccp_solve(m, trw_decomposition(m, rho), cfg, algorithm=algorithm)


# ---------------------------------------------------------------------------
# EM over the MAX nodes

@dataclass
class EmState:
    x_b: tuple[int, ...]
    q_a: dict[int, np.ndarray] = field(default_factory=dict)
    trace: list[float] = field(default_factory=list)
    fractional: bool = False
    restart_traces: list[list[float]] = field(default_factory=list)


def _e_step_mp(m: PairwiseModel, x_b, cfg: SolveConfig) -> dict[int, np.ndarray]:
    pk = m.arrays
    ones = FreeEnergyWeights(np.ones(m.num_nodes), np.ones(m.num_edges))
    lt, _, _ = run_weighted(m, ones, cfg, _clamped_node(pk, m, x_b), pk.theta_edge)
    return {a: np.exp(lt[a, : m.cardinalities[a]]) for a in m.sum_nodes}


def _e_step_enumerate(m: PairwiseModel, x_b, cap: int) -> dict[int, np.ndarray]:
    A = m.sum_nodes
    cards = [m.cardinalities[a] for a in A]
    if _space(cards) > cap:
        raise StateSpaceExceeded(f"sum-part space {_space(cards)} exceeds cap {cap}")
    x = np.zeros(m.num_nodes, dtype=np.int64)
    x[list(m.max_nodes)] = x_b
    chunks, energies = [], []
    for XA in _configs(cards):
        X = np.tile(x, (len(XA), 1))
        X[:, list(A)] = XA
        e = np.zeros(len(X))
        for i, t in enumerate(m.node_potentials):
            e += t[X[:, i]]
        for (i, j), t in zip(m.edges, m.edge_potentials):
            e += t[X[:, i], X[:, j]]
        chunks.append(XA)
        energies.append(e)
    XA = np.concatenate(chunks)
    e = np.concatenate(energies)
    p = np.exp(e - logsumexp(e))
    return {a: np.bincount(XA[:, c], weights=p, minlength=m.cardinalities[a]) for c, a in enumerate(A)}


def _expected_model(m: PairwiseModel, q_a: dict[int, np.ndarray]):
    """Unaries and MAX-MAX tables of the expected energy as a function of x_B."""
    unary = {b: np.array(m.node_potentials[b], dtype=float) for b in m.max_nodes}
    cls = classify_edges(m)
    for k in cls.boundary:
        i, j = m.edges[k]
        t = m.edge_potentials[k]
        if m.is_max[i]:
            unary[i] = unary[i] + t @ q_a[j]
        else:
            unary[j] = unary[j] + q_a[i] @ t
    return unary, cls.max_edges


def _m_step(m: PairwiseModel, q_a, x_old, cap: int, cfg: SolveConfig):
    unary, max_edges = _expected_model(m, q_a)
    B = m.max_nodes
    col = {b: c for c, b in enumerate(B)}
    if not max_edges:
        x = []
        for b, s in zip(B, x_old):
            u = unary[b]
            x.append(s if u[s] >= u.max() - 1e-12 else int(np.argmax(u)))
        return tuple(x), False

    def score(X):
        X = np.atleast_2d(X)
        e = np.zeros(len(X))
        for b in B:
            e += unary[b][X[:, col[b]]]
        for k in max_edges:
            i, j = m.edges[k]
            e += m.edge_potentials[k][X[:, col[i]], X[:, col[j]]]
        return e

    cards = [m.cardinalities[b] for b in B]
    if _space(cards) <= cap:
        best, arg = -np.inf, None
        for X in _configs(cards):
            e = score(X)
            k = int(np.argmax(e))
            if e[k] > best:
                best, arg = e[k], X[k]
        if score(np.array(x_old))[0] >= best - 1e-12:
            return tuple(x_old), False
        return tuple(int(v) for v in arg), False

    # large MAX part: max-product on the expected model over B
    sub = _max_submodel(m, unary, max_edges)
    mp_cfg = SolveConfig(damping=0.1, max_iterations=50, tolerance=cfg.tolerance)
    lt, _, run = run_mixed(sub, np.ones(sub.num_edges), mp_cfg, is_max=np.ones(sub.num_nodes, dtype=bool))
    x = tuple(int(np.argmax(lt[c, : cards[c]])) for c in range(len(B)))
    if score(np.array(x))[0] <= score(np.array(x_old))[0] + 1e-12:
        return tuple(x_old), not run.converged
    return x, not run.converged


def _max_submodel(m: PairwiseModel, unary, max_edges) -> PairwiseModel:
    B = m.max_nodes
    col = {b: c for c, b in enumerate(B)}
    edges = [(col[m.edges[k][0]], col[m.edges[k][1]]) for k in max_edges]
    tabs = [m.edge_potentials[k] for k in max_edges]
    return PairwiseModel(
        [m.cardinalities[b] for b in B], [unary[b] for b in B], edges, tabs, "M" * len(B)
    )


def _em_run(m, x0, mode, max_iterations, cap, cfg) -> EmState:
    exact_e = mode == "exact"
    forest = sum_part_is_forest(m)
    x = tuple(int(v) for v in x0)
    seen = {x}
    state = EmState(x)
    fractional = False
    for _ in range(max_iterations):
        if not exact_e or forest:
            q_a = _e_step_mp(m, x, cfg)
        else:
            q_a = _e_step_enumerate(m, x, cap)
        state.q_a = q_a
        state.trace.append(_q_or_nan(m, x))
        x_new, frac = _m_step(m, q_a, x, MAX_CAP, cfg)
        fractional |= frac
        if x_new in seen:
            break
        seen.add(x_new)
        x = x_new
        state.x_b = x
    state.fractional = fractional
    return state


def _q_or_nan(m, x) -> float:
    q = q_if_tractable(m, x, cap=JOINT_CAP)
    return float("nan") if q is None else q


def em_solve(
    m: PairwiseModel,
    restarts: int = 10,
    seed: int = 0,
    mode: str = "exact",
    max_iterations: int = 100,
    cap: int = JOINT_CAP,
    cfg: SolveConfig | None = None,
) -> tuple[EmState, SolveReport]:
    """Coordinate ascent between SUM marginals and a MAX assignment.

    ``mode="exact"`` uses exact conditional marginals (a forest sum part or
    enumeration within ``cap``); ``mode="bethe"`` uses sum-product on the
    clamped model and a max-product M-step. Each restart starts from a
    seeded uniform random MAX assignment; the best final Q wins.
    """
    if mode not in ("exact", "bethe"):
        raise ValueError(f"unknown EM mode {mode!r}")
    if restarts < 1:
        raise ValueError("restarts must be positive")
    cfg = cfg or SolveConfig()
    rng = np.random.default_rng(seed)
    cards = [m.cardinalities[b] for b in m.max_nodes]
    best, total_iters, traces = None, 0, []
    for _ in range(restarts):
        x0 = [int(rng.integers(c)) for c in cards]
        st = _em_run(m, x0, mode, max_iterations, cap, cfg)
        traces.append(st.trace)
        total_iters += len(st.trace)
        key = st.trace[-1] if st.trace and not np.isnan(st.trace[-1]) else -np.inf
        if best is None or key > best[0]:
            best = (key, st)
    state = best[1]
    state.restart_traces = traces
    q = _q_or_nan(m, state.x_b)
    report = SolveReport(
        algorithm="em" if mode == "exact" else "em-bethe",
        x_b=state.x_b,
        objective=q,
        q_hat=None if np.isnan(q) else q,
        converged=len(state.trace) < max_iterations,
        iterations=total_iters,
        residual=0.0,
        integral=not state.fractional,
        trace=state.trace,
    )
    return state, report

