"""Weighted and mixed message passing for marginal MAP.

All messages live in the log domain, padded to the largest cardinality,
and are normalized to sum to one after every update. Updates are
synchronous: each round is computed from the previous round's messages.

Weighted messages (positive weights w_i, w_ij):

    m_ij(x_j) <- [ sum_xi (psi_i m_~i)^(1/w_i) (psi_ij / m_ji)^(1/w_ij) ]^w_ij

Mixed messages are the zero-temperature limit on the MAX nodes: sum nodes
send sum-product messages, MAX->MAX edges send max-product messages and
MAX->SUM edges sum only over the argmax set of psi_i m_~i.
"""

from __future__ import annotations

import itertools
import logging
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from .beliefs import (
    LOG_FLOOR,
    Beliefs,
    FreeEnergyWeights,
    MixedMarginals,
    check_provably_concave,
    eval_free_energy,
    weights_trw_truncated,
)
from .exact import JOINT_CAP, StateSpaceExceeded, q_batch
from .model import (
    PackedModel,
    PairwiseModel,
    classify_edges,
    is_ab_tree,
    sum_part_is_forest,
)
from .trees import EdgeAppearance

log = logging.getLogger(__name__)

TIE_TOL = 1e-9


def logsumexp(a: np.ndarray, axis=None, keepdims: bool = False) -> np.ndarray:
    """log(sum(exp(a))) along ``axis``; -inf where every entry is -inf.

    A lean replacement for scipy's version, whose per-call overhead
    dominates on the small arrays of the message loops.
    """
    mx = np.max(a, axis=axis, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - mx), axis=axis, keepdims=True)) + mx
    return out if keepdims else np.squeeze(out, axis=axis)


class SolverError(RuntimeError):
    pass


class _Underflow(ArithmeticError):
    pass


@dataclass
class SolveConfig:
    damping: float | None = None  # None: 0 on forests, 0.1 otherwise
    tolerance: float = 1e-9
    max_iterations: int = 2000
    rho: EdgeAppearance | None = None
    rho_max: float = 0.5
    epsilon: float | None = None
    argmax_inclusion_tol: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.damping is not None and not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass
class SolveReport:
    algorithm: str
    x_b: tuple[int, ...]
    objective: float
    q_hat: float | None = None
    upper_bound: bool = False
    converged: bool = False
    iterations: int = 0
    residual: float = float("inf")
    ties: tuple[int, ...] = ()
    integral: bool = False
    consistency: dict[str, float] = field(default_factory=dict)
    certificates: dict[str, str] = field(default_factory=dict)
    trace: list[float] = field(default_factory=list)
    inner_iterations: int = 0
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "x_b": list(self.x_b),
            "objective": self.objective,
            "q_hat": self.q_hat,
            "upper_bound": self.upper_bound,
            "converged": self.converged,
            "iterations": self.iterations,
            "inner_iterations": self.inner_iterations,
            "residual": self.residual,
            "ties": list(self.ties),
            "integral": self.integral,
            "consistency": self.consistency,
            "certificates": self.certificates,
            "notes": self.notes,
        }


def default_damping(m: PairwiseModel) -> float:
    return 0.0 if m.is_forest else 0.1


# ---------------------------------------------------------------------------
# kernels on packed arrays

def _normalize(pk: PackedModel, logm: np.ndarray) -> np.ndarray:
    """Normalize each message; padded entries must already be -inf and come back as 0."""
    z = logsumexp(logm, axis=1, keepdims=True)
    if not np.all(np.isfinite(z)):
        raise _Underflow("message with no positive entry")
    return np.where(pk.valid_dir, logm - z, 0.0)


def _node_sums(pk: PackedModel, theta_node: np.ndarray, logm: np.ndarray) -> np.ndarray:
    """log(psi_i m_~i), -inf on padded states."""
    return theta_node + pk.incoming @ logm


def _weighted_step(pk, theta_node, theta_dir, w_node, w_dir):
    """Update closure with the per-run constants hoisted out of the loop."""
    inv_src = (1.0 / w_node[pk.src])[:, None]
    inv_dir = (1.0 / w_dir)[:, None]
    tdw = theta_dir * inv_dir[:, :, None]
    scale = w_dir[:, None]
    src, rev, incoming = pk.src, pk.rev, pk.incoming

    def step(logm):
        S = theta_node + incoming @ logm
        pre = (S[src] * inv_src)[:, :, None] + tdw - (logm[rev] * inv_dir)[:, :, None]
        return _normalize(pk, scale * logsumexp(pre, axis=1))

    return step


def _mixed_update(pk, theta_node, theta_dir, logm, rho_dir, is_max, band, hybrid=False):
    S = _node_sums(pk, theta_node, logm)
    Ss = S[pk.src]
    base = theta_dir - logm[pk.rev][:, :, None]
    r = rho_dir[:, None]
    with np.errstate(invalid="ignore"):
        sum_msg = r * logsumexp(Ss[:, :, None] + base / r[:, :, None], axis=1)
        max_msg = np.max(r[:, :, None] * Ss[:, :, None] + base, axis=1)
        top = np.max(Ss, axis=1, keepdims=True)
        in_arg = Ss >= top - band
        arg_msg = r * logsumexp(np.where(in_arg[:, :, None], base / r[:, :, None], -np.inf), axis=1)
    src_max = is_max[pk.src][:, None]
    dst_max = is_max[pk.dst][:, None]
    to_sum = max_msg if hybrid else arg_msg
    new = np.where(src_max, np.where(dst_max, max_msg, to_sum), sum_msg)
    return _normalize(pk, new)


def _beliefs(pk, theta_node, theta_edge, logm, w_node, w_edge):
    """Log node and edge beliefs; w_node = 1 and w_edge = rho give mixed-marginals."""
    S = _node_sums(pk, theta_node, logm)
    with np.errstate(invalid="ignore"):
        lt = S / w_node[:, None]
        lt = lt - logsumexp(lt, axis=1, keepdims=True)
        le = (
            lt[pk.edge_i][:, :, None]
            + lt[pk.edge_j][:, None, :]
            + (theta_edge - logm[0::2][:, None, :] - logm[1::2][:, :, None]) / w_edge[:, None, None]
        )
        le = le - logsumexp(le, axis=(1, 2), keepdims=True)
    return lt, le


def _to_beliefs(m: PairwiseModel, lt, le, cls=Beliefs):
    node = np.exp(lt)
    edge = np.exp(le)
    return cls(node, edge, m.cardinalities, m.edges)


@dataclass
class _Run:
    logm: np.ndarray
    iterations: int
    converged: bool
    residual: float
    history: list[np.ndarray]


def _iterate(pk, step: Callable[[np.ndarray], np.ndarray], logm0, damping, tol, max_iter) -> _Run:
    logm = logm0
    lin = np.exp(logm)
    history: list[np.ndarray] = []
    res = float("inf")
    for it in range(1, max_iter + 1):
        new = step(logm)
        if damping > 0:
            new = _normalize(pk, np.where(pk.valid_dir, (1.0 - damping) * new + damping * logm, -np.inf))
        new_lin = np.exp(new)
        # padded entries are 0 in log space on both sides
        res = float(np.max(np.abs(new_lin - lin), initial=0.0))
        logm, lin = new, new_lin
        history.append(logm)
        if len(history) > 10:
            history.pop(0)
        if res <= tol:
            return _Run(logm, it, True, res, history)
    return _Run(logm, max_iter, False, res, history)


def uniform_messages(pk: PackedModel) -> np.ndarray:
    return _normalize(pk, np.where(pk.valid_dir, 0.0, -np.inf))


# ---------------------------------------------------------------------------
# weighted message passing

def _dir_weights(pk: PackedModel, edge_w: np.ndarray) -> np.ndarray:
    return np.asarray(edge_w, dtype=float)[pk.edge_of]


def run_weighted(
    m: PairwiseModel,
    w: FreeEnergyWeights,
    cfg: SolveConfig,
    theta_node: np.ndarray | None = None,
    theta_edge: np.ndarray | None = None,
    logm0: np.ndarray | None = None,
):
    """Weighted message passing on (possibly adjusted) padded potentials.

    Returns ``(log_node, log_edge, run)``. Adjusted potentials may hold
    -inf on valid states to clamp a node.
    """
    pk = m.arrays
    if np.any(w.node <= 0) or np.any(w.edge <= 0):
        raise ValueError("weighted message passing needs strictly positive weights")
    tn = pk.theta_node if theta_node is None else theta_node
    te = pk.theta_edge if theta_edge is None else theta_edge
    tdir = np.empty((2 * pk.m, pk.K, pk.K))
    tdir[0::2] = te
    tdir[1::2] = te.transpose(0, 2, 1)
    wd = _dir_weights(pk, w.edge)
    damping = default_damping(m) if cfg.damping is None else cfg.damping
    start = uniform_messages(pk) if logm0 is None else logm0

    step = _weighted_step(pk, tn, tdir, np.asarray(w.node, dtype=float), wd)
    try:
        run = _iterate(pk, step, start, damping, cfg.tolerance, cfg.max_iterations)
    except _Underflow as exc:
        raise SolverError(str(exc)) from None
    if not run.converged and len(run.history) > 1:
        def value(lm):
            lt, le = _beliefs(pk, tn, te, lm, w.node, w.edge)
            return eval_free_energy(_to_beliefs(m, lt, le), m, w)

        run.logm = max(run.history, key=value)
    lt, le = _beliefs(pk, tn, te, run.logm, w.node, w.edge)
    return lt, le, run


def weighted_mp_fixed_point(m: PairwiseModel, w: FreeEnergyWeights, cfg: SolveConfig | None = None):
    """Stationary point of <theta,tau> + sum w_i H_i - sum w_ij I_ij via weighted messages."""
    cfg = cfg or SolveConfig()
    lt, le, run = run_weighted(m, w, cfg)
    b = _to_beliefs(m, lt, le)
    x_b, ties = decode_with_ties(b, m)
    report = SolveReport(
        algorithm="weighted-mp",
        x_b=x_b,
        objective=eval_free_energy(b, m, w),
        q_hat=q_if_tractable(m, x_b),
        converged=run.converged,
        iterations=run.iterations,
        residual=run.residual,
        ties=ties,
        integral=max_beliefs_integral(b, m),
    )
    return b, report


# ---------------------------------------------------------------------------
# mixed message passing

def _check_rho(m: PairwiseModel, rho) -> np.ndarray:
    r = np.asarray(getattr(rho, "rho", rho), dtype=float)
    if r.shape != (m.num_edges,):
        raise ValueError(f"rho has {r.size} entries for {m.num_edges} edges")
    if np.any(r <= 0):
        raise ValueError("mixed message passing needs rho > 0 on every edge")
    return r


def run_mixed(
    m: PairwiseModel,
    rho,
    cfg: SolveConfig,
    is_max: np.ndarray | None = None,
    hybrid: bool = False,
    logm0: np.ndarray | None = None,
):
    """Mixed message passing; ``is_max`` overrides the model partition (baselines)."""
    pk = m.arrays
    r = _check_rho(m, rho)
    rd = _dir_weights(pk, r)
    is_max = pk.is_max if is_max is None else np.asarray(is_max, dtype=bool)
    band = -np.log1p(-cfg.argmax_inclusion_tol)
    damping = default_damping(m) if cfg.damping is None else cfg.damping
    start = uniform_messages(pk) if logm0 is None else logm0

    def step(lm):
        return _mixed_update(pk, pk.theta_node, pk.theta_dir, lm, rd, is_max, band, hybrid)

    try:
        run = _iterate(pk, step, start, damping, cfg.tolerance, cfg.max_iterations)
    except _Underflow:
        # one restart with heavier damping before giving up
        retry = max(0.5, damping)
        log.warning("mixed messages underflowed; restarting with damping %.2f", retry)
        try:
            run = _iterate(pk, step, uniform_messages(pk), retry, cfg.tolerance, cfg.max_iterations)
        except _Underflow as exc:
            raise SolverError(f"mixed messages underflowed twice: {exc}") from None
    lt, le = _beliefs(pk, pk.theta_node, pk.theta_edge, run.logm, np.ones(pk.n), r)
    return lt, le, run


def mixed_mp_fixed_point(
    m: PairwiseModel, rho, cfg: SolveConfig | None = None, hybrid: bool = False
) -> tuple[MixedMarginals, SolveReport]:
    cfg = cfg or SolveConfig()
    r = _check_rho(m, rho)
    lt, le, run = run_mixed(m, r, cfg, hybrid=hybrid)
    if not run.converged and len(run.history) > 1:
        pk = m.arrays

        def value(lm):
            a, b_ = _beliefs(pk, pk.theta_node, pk.theta_edge, lm, np.ones(pk.n), r)
            return _limit_value(m, _to_beliefs(m, a, b_, MixedMarginals), r)

        run.logm = max(run.history, key=value)
        lt, le = _beliefs(pk, pk.theta_node, pk.theta_edge, run.logm, np.ones(pk.n), r)
    b = _to_beliefs(m, lt, le, MixedMarginals)
    x_b, ties = decode_with_ties(b, m)
    report = SolveReport(
        algorithm="jiang-hybrid" if hybrid else "mixed-mp",
        x_b=x_b,
        objective=_limit_value(m, b, r),
        q_hat=q_if_tractable(m, x_b),
        converged=run.converged,
        iterations=run.iterations,
        residual=run.residual,
        ties=ties,
        integral=not ties,
    )
    if not hybrid:
        report.consistency = check_reparam(b, m, r, cfg.argmax_inclusion_tol)
    return b, report


def limit_beliefs(b: MixedMarginals, m: PairwiseModel, band: float = 1e-12) -> Beliefs:
    """Zero-temperature beliefs behind a set of mixed-marginals.

    MAX nodes become uniform on their argmax set; edge tables touching a
    MAX node are restricted to those rows/columns and renormalized.
    """
    node = b.node.copy()
    keep = np.ones_like(node, dtype=bool)
    for i in m.max_nodes:
        bi = b.node_belief(i)
        on = bi >= bi.max() * (1.0 - band)
        keep[i, : len(bi)] = on
        keep[i, len(bi):] = False
        node[i] = 0.0
        node[i, : len(bi)] = on / on.sum()
    edge = b.edge.copy()
    if m.num_edges:
        pk = m.arrays
        mask = keep[pk.edge_i][:, :, None] & keep[pk.edge_j][:, None, :]
        edge = np.where(mask, edge, 0.0)
        cls = classify_edges(m)
        for k in cls.max_edges:
            i, j = m.edges[k]
            edge[k] = np.outer(node[i], node[j])
        s = edge.sum(axis=(1, 2), keepdims=True)
        edge = edge / np.where(s > 0, s, 1.0)
    return Beliefs(node, edge, m.cardinalities, m.edges)


def _limit_value(m: PairwiseModel, b: MixedMarginals, rho: np.ndarray) -> float:
    return eval_free_energy(limit_beliefs(b, m), m, weights_trw_truncated(m, rho))


# ---------------------------------------------------------------------------
# decoding

def decode_with_ties(b: Beliefs, m: PairwiseModel, tol: float = TIE_TOL):
    x, ties = [], []
    for i in m.max_nodes:
        bi = b.node_belief(i)
        k = int(np.argmax(bi))
        x.append(k)
        if np.sum(bi >= bi[k] - tol * max(bi[k], LOG_FLOOR)) > 1:
            ties.append(i)
    return tuple(x), tuple(ties)


def decode(b: Beliefs, m: PairwiseModel) -> tuple[int, ...]:
    """Per-MAX-node argmax, lowest state index on ties."""
    return decode_with_ties(b, m)[0]


def max_beliefs_integral(b: Beliefs, m: PairwiseModel, tol: float = 1e-6) -> bool:
    return all(b.node_belief(i).max() >= 1.0 - tol for i in m.max_nodes)


def q_if_tractable(m: PairwiseModel, x_b, cap: int = 2**16) -> float | None:
    try:
        if sum_part_is_forest(m):
            return float(q_batch(m, [list(x_b)], method="eliminate")[0])
        return float(q_batch(m, [list(x_b)], cap=cap, method="enumerate")[0])
    except StateSpaceExceeded:
        return None


# ---------------------------------------------------------------------------
# reparameterization / mixed-consistency

def _normed(v: np.ndarray) -> np.ndarray:
    s = v.sum()
    return v / s if s > 0 else v


def check_reparam(
    b: MixedMarginals,
    m: PairwiseModel,
    rho,
    argmax_tol: float = 1e-12,
    samples: int = 256,
    seed: int = 0,
) -> dict[str, float]:
    """Residuals of admissibility and the three mixed-consistency families.

    Consistency holds up to a per-edge constant, so each projected edge
    table is renormalized before comparing with the node belief.
    """
    r = np.asarray(getattr(rho, "rho", rho), dtype=float)
    res = {"admissibility": 0.0, "sum": 0.0, "max": 0.0, "argmax": 0.0}
    for k, (i, j) in enumerate(m.edges):
        t = b.edge_belief(k)
        for src, dst, tab in ((i, j, t), (j, i, t.T)):
            bd = b.node_belief(dst)
            if not m.is_max[src]:
                fam, proj = "sum", tab.sum(axis=0)
            elif m.is_max[dst]:
                fam, proj = "max", tab.max(axis=0)
            else:
                bs = b.node_belief(src)
                on = bs >= bs.max() * (1.0 - argmax_tol)
                fam, proj = "argmax", tab[on].sum(axis=0)
            res[fam] = max(res[fam], float(np.max(np.abs(_normed(proj) - bd))))

    rng = np.random.default_rng(seed)
    X = np.stack([rng.integers(c, size=samples) for c in m.cardinalities], axis=1)
    lb = lambda a: np.log(np.maximum(a, LOG_FLOOR))
    val = np.zeros(samples)
    for i in range(m.num_nodes):
        val += lb(b.node_belief(i))[X[:, i]] - m.node_potentials[i][X[:, i]]
    for k, (i, j) in enumerate(m.edges):
        ratio = lb(b.edge_belief(k)) - lb(b.node_belief(i))[:, None] - lb(b.node_belief(j))[None, :]
        val += r[k] * ratio[X[:, i], X[:, j]] - m.edge_potentials[k][X[:, i], X[:, j]]
    res["admissibility"] = float(val.max() - val.min())
    return res


# ---------------------------------------------------------------------------
# annealing and the zero-temperature limit map

DEFAULT_SCHEDULE = (1.0, 0.3, 0.1, 0.03, 0.01)


def annealed_weights(m: PairwiseModel, fhat: FreeEnergyWeights, rho_b, eps: float) -> FreeEnergyWeights:
    r = np.asarray(getattr(rho_b, "rho", rho_b), dtype=float)
    node = np.where(m.is_max, eps, fhat.node)
    edge = fhat.edge.copy()
    mb = list(classify_edges(m).max_edges)
    edge[mb] = eps * r[mb]
    return FreeEnergyWeights(node, edge)


def anneal_solve(
    m: PairwiseModel,
    fhat_weights: FreeEnergyWeights,
    rho_b,
    eps_schedule: Sequence[float] = DEFAULT_SCHEDULE,
    cfg: SolveConfig | None = None,
):
    """Solve F^eps = F + eps * H_B for a decreasing schedule of eps.

    Returns the per-eps beliefs and a report on the last one; messages are
    warm-started from the previous temperature. Small eps makes plain
    weighted message passing stiff, so a temperature whose run does not
    converge is re-solved by CCCP on a concave split of the same objective.
    """
    cfg = cfg or SolveConfig()
    eps_schedule = list(eps_schedule)
    if any(e <= 0 for e in eps_schedule) or any(
        a <= b for a, b in zip(eps_schedule, eps_schedule[1:])
    ):
        raise ValueError("eps schedule must be positive and strictly decreasing")
    notes = []
    if check_provably_concave(m, rho_b) is None:
        msg = "rho on MAX-MAX edges is not provably concave"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    seq, logm, runs = [], None, []
    for eps in eps_schedule:
        w = annealed_weights(m, fhat_weights, rho_b, eps)
        lt, le, run = run_weighted(m, w, cfg, logm0=logm)
        b = _to_beliefs(m, lt, le)
        if not run.converged and eps <= 1.0:
            b, run = _anneal_cccp(m, fhat_weights, rho_b, eps, cfg)
            notes.append(f"eps={eps:g}: solved by CCCP")
        else:
            logm = run.logm
        runs.append(run)
        seq.append(b)
    final = seq[-1]
    x_b, ties = decode_with_ties(final, m)
    report = SolveReport(
        algorithm="anneal",
        x_b=x_b,
        objective=eval_free_energy(final, m, fhat_weights),
        q_hat=q_if_tractable(m, x_b),
        converged=all(r.converged for r in runs),
        iterations=sum(r.iterations for r in runs),
        residual=runs[-1].residual,
        ties=ties,
        integral=max_beliefs_integral(final, m),
        trace=[eval_free_energy(b, m, fhat_weights) for b in seq],
        notes=notes,
    )
    return seq, report


def _anneal_cccp(m, fhat: FreeEnergyWeights, rho_b, eps: float, cfg: SolveConfig):
    from .optimizers import (  # optimizers builds on this module
        cccp_solve,
        trw_decomposition,
    )

    r = np.asarray(getattr(rho_b, "rho", rho_b), dtype=float)
    mb = list(classify_edges(m).max_edges)
    edge = fhat.edge.copy()
    edge[mb] = r[mb]
    d = trw_decomposition(m, edge, eps=eps)
    plus = FreeEnergyWeights(np.where(m.is_max, d.plus.node, fhat.node), d.plus.edge)
    d = replace(d, plus=plus)
    b, rep = cccp_solve(m, d, replace(cfg, tolerance=min(cfg.tolerance, 1e-10)), polish=False)
    run = _Run(None, rep.inner_iterations, rep.converged, rep.residual, [])
    return b, run


def limit_map(tau: Beliefs, m: PairwiseModel, eps: float) -> MixedMarginals:
    """Mixed-marginals implied by a weighted fixed point at temperature eps."""
    lf = lambda a: np.log(np.maximum(a, LOG_FLOOR))
    pk = m.arrays
    ln = np.where(pk.valid, lf(tau.node), -np.inf)
    ln = np.where(pk.is_max[:, None], eps * ln, ln)
    ln = ln - logsumexp(ln, axis=1, keepdims=True)
    edge = np.zeros_like(tau.edge)
    if m.num_edges:
        tn = tau.node
        ratio = lf(tau.edge) - lf(tn[pk.edge_i])[:, :, None] - lf(tn[pk.edge_j])[:, None, :]
        both_max = pk.is_max[pk.edge_i] & pk.is_max[pk.edge_j]
        scale = np.where(both_max, eps, 1.0)[:, None, None]
        le = ln[pk.edge_i][:, :, None] + ln[pk.edge_j][:, None, :] + scale * ratio
        le = np.where(pk.pair_valid, le, -np.inf)
        le = le - logsumexp(le, axis=(1, 2), keepdims=True)
        edge = np.exp(le)
    return MixedMarginals(np.exp(ln), edge, m.cardinalities, m.edges)


# ---------------------------------------------------------------------------
# certificates

GLOBAL, UNKNOWN = "GLOBAL", "UNKNOWN"


@dataclass(frozen=True)
class Verdict:
    status: str
    reason: str

    def __bool__(self) -> bool:
        return self.status == GLOBAL


def certify_global(m: PairwiseModel, report: SolveReport, rho, tol: float = 1e-6) -> Verdict:
    """Global optimality of a decoded solution from a relaxation that bounds Phi_AB.

    Clause (i): Q(x_hat) matches an objective value known to upper-bound
    Phi_AB. Clause (ii): integral MAX beliefs at the maximum of a concave
    weighting. Mixed-MP runs on A-B trees qualify through the local
    optimality theorem with C = B.
    """
    r = np.asarray(getattr(rho, "rho", rho), dtype=float)
    cls = classify_edges(m)
    if not sum_part_is_forest(m):
        return Verdict(UNKNOWN, "G_A not a forest")
    if cls.sum_edges and np.any(np.abs(r[list(cls.sum_edges)] - 1.0) > 1e-12):
        return Verdict(UNKNOWN, "rho != 1 on SUM-SUM edges")
    if not report.converged:
        return Verdict(UNKNOWN, "solver did not converge")

    if report.algorithm == "mixed-mp" and is_ab_tree(m):
        if report.ties:
            return Verdict(UNKNOWN, "tied mixed-marginals")
        if cls.boundary and np.any(r[list(cls.boundary)] > 1.0):
            return Verdict(UNKNOWN, "rho > 1 on crossing edges")
        if check_provably_concave(m, r) is None:
            return Verdict(UNKNOWN, "rho on MAX-MAX edges not provably concave")
        return Verdict(GLOBAL, "A-B tree: mixed-consistent fixed point with unique maxima")

    if not report.upper_bound:
        return Verdict(UNKNOWN, "objective is not a certified upper bound")
    if report.q_hat is not None and abs(report.q_hat - report.objective) <= tol:
        return Verdict(GLOBAL, "clause (i): Q(x_hat) equals the upper bound")
    if report.integral:
        return Verdict(GLOBAL, "clause (ii): integral MAX beliefs at a concave maximum")
    if report.q_hat is None:
        return Verdict(UNKNOWN, "Q(x_hat) intractable and MAX beliefs fractional")
    return Verdict(UNKNOWN, "clause (ii) failed: fractional MAX beliefs")


def hamming_ball(x_b: Sequence[int], cards: Sequence[int], radius: int):
    """All assignments within Hamming distance ``radius`` of ``x_b``."""
    x_b = list(x_b)
    yield tuple(x_b)
    for r in range(1, radius + 1):
        for pos in itertools.combinations(range(len(x_b)), r):
            choices = [[s for s in range(cards[p]) if s != x_b[p]] for p in pos]
            for vals in itertools.product(*choices):
                y = list(x_b)
                for p, v in zip(pos, vals):
                    y[p] = v
                yield tuple(y)


def certify_local(m: PairwiseModel, x_b, radius: int = 1, cap: int = 2**20, tol: float = 1e-9) -> bool:
    """Brute-force check that no assignment within ``radius`` flips has larger Q."""
    cards = [m.cardinalities[b] for b in m.max_nodes]
    radius = min(radius, len(cards))
    count = 0
    for r in range(radius + 1):
        combos = 0
        for pos in itertools.combinations(range(len(cards)), r):
            combos += int(np.prod([cards[p] - 1 for p in pos]))
        count += combos
    if count > cap:
        raise StateSpaceExceeded(f"{count} neighbours exceed cap {cap}")
    ball = np.array(list(hamming_ball(x_b, cards, radius)), dtype=np.int64).reshape(-1, len(cards))
    q = q_batch(m, ball, cap=JOINT_CAP)
    return bool(q[0] >= q.max() - tol)


def with_config(cfg: SolveConfig | None, **kw) -> SolveConfig:
    return replace(cfg or SolveConfig(), **kw)
