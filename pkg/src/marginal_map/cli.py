"""Command-line front end: ``mmap solve|exact|gen|bench``.

Exit status is 0 on success, 1 on usage or input errors and 2 when a
solver fails.
"""

from __future__ import annotations

import argparse
import json
import sys

from .bench import ALGORITHMS, run_algorithm, run_benchmark
from .exact import StateSpaceExceeded, marginal_map_bruteforce
from .generators import gen_hmm, gen_ising
from .mixed_mp import SolveConfig, SolverError
from .model import ModelError, load_model, save_model
from .trees import EdgeAppearance, rho_bethe


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mmap", description="Marginal MAP by truncated free energies.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("solve", help="run one algorithm on a model file")
    s.add_argument("model")
    s.add_argument("--algo", default="mix-bethe-cccp", choices=ALGORITHMS)
    s.add_argument("--rho-file", help="lines 'i j rho' overriding edge weights")
    s.add_argument("--damping", type=float)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--max-iters", type=int, default=2000)
    s.add_argument("--seed", type=int, default=0)

    e = sub.add_parser("exact", help="brute-force marginal MAP")
    e.add_argument("model")

    g = sub.add_parser("gen", help="write a random instance")
    gsub = g.add_subparsers(dest="family", parser_class=_Parser)
    gsub.required = True
    gh = gsub.add_parser("hmm")
    gh.add_argument("--pairs", type=int, default=10)
    gh.add_argument("--states", type=int, default=3)
    gi = gsub.add_parser("ising")
    gi.add_argument("--rows", type=int, default=10)
    gi.add_argument("--cols", type=int, default=10)
    gi.add_argument("--mode", choices=("mixed", "attractive"), default="mixed")
    for q in (gh, gi):
        q.add_argument("--sigma", type=float, default=1.0)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("-o", "--output")

    b = sub.add_parser("bench", help="run a benchmark sweep and write CSV")
    bsub = b.add_subparsers(dest="family", parser_class=_Parser)
    bsub.required = True
    bh = bsub.add_parser("hmm")
    bh.add_argument("--pairs", type=int, default=10)
    bh.add_argument("--states", type=int, default=3)
    bi = bsub.add_parser("ising")
    bi.add_argument("--rows", type=int, default=10)
    bi.add_argument("--cols", type=int, default=10)
    bi.add_argument("--mode", choices=("mixed", "attractive"), default="mixed")
    for q in (bh, bi):
        q.add_argument("--sigmas", type=_floats, default=[0.3, 0.8, 1.3])
        q.add_argument("--instances", type=int, default=10)
        q.add_argument("--algos", default=",".join(ALGORITHMS))
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--workers", type=int, default=1)
        q.add_argument("--timing", action="store_true", help="record wall time (output no longer reproducible)")
        q.add_argument("-o", "--output")
    return p


def read_rho_file(path: str, m) -> EdgeAppearance:
    """Edge weights from 'i j rho' lines; unlisted edges keep the Bethe default."""
    rho = rho_bethe(m).rho.copy()
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ModelError("expected 'i j rho'", n)
            try:
                i, j, r = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise ModelError(f"malformed entry {line!r}", n) from None
            key = (min(i, j), max(i, j))
            if key not in m.edge_index:
                raise ModelError(f"edge {key} not in model", n)
            rho[m.edge_index[key]] = r
    return EdgeAppearance(rho)


def _load(path: str):
    with open(path) as fh:
        return load_model(fh)


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_solve(a) -> None:
    m = _load(a.model)
    rho = read_rho_file(a.rho_file, m) if a.rho_file else None
    cfg = SolveConfig(damping=a.damping, tolerance=a.tol, max_iterations=a.max_iters, seed=a.seed)
    report = run_algorithm(m, a.algo, cfg, rho=rho, seed=a.seed)
    print(json.dumps(report.summary(), indent=2, default=float))


def _cmd_exact(a) -> None:
    m = _load(a.model)
    r = marginal_map_bruteforce(m, keep_q=False)
    print(json.dumps({"phi_ab": r.phi_ab, "argmax_b": list(r.argmax_b), "max_nodes": list(m.max_nodes)}, indent=2))


def _cmd_gen(a) -> None:
    if a.family == "hmm":
        m = gen_hmm(a.pairs, a.states, a.sigma, a.seed)
    else:
        m = gen_ising(a.rows, a.cols, a.mode, a.sigma, a.seed)
    _emit(save_model(m), a.output)


def _cmd_bench(a) -> None:
    algos = [s.strip() for s in a.algos.split(",") if s.strip()]
    unknown = [s for s in algos if s not in ALGORITHMS]
    if unknown:
        raise UsageError(f"unknown algorithm {unknown[0]!r}; choose from {', '.join(ALGORITHMS)}")
    if a.family == "hmm":
        params = {"num_pairs": a.pairs, "states": a.states}
    else:
        params = {"rows": a.rows, "cols": a.cols, "mode": a.mode}
    res = run_benchmark(
        a.family, a.sigmas, a.instances, algos, seed=a.seed, params=params, timing=a.timing, workers=a.workers
    )
    _emit(res.to_csv(), a.output)


COMMANDS = {"solve": _cmd_solve, "exact": _cmd_exact, "gen": _cmd_gen, "bench": _cmd_bench}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ModelError, ValueError, OSError) as exc:
        print(f"mmap: error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, StateSpaceExceeded, ArithmeticError) as exc:
        print(f"mmap: solver failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
