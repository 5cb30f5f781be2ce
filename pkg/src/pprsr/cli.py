"""Command-line interface.

Every subcommand prints one JSON report (or writes it to ``--output``).
Exit codes: 0 ok, 1 parse/usage error, 2 invariant violation or failed
verification, 3 PPR non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pprsr.equivalence import check_equivalence
from pprsr.errors import InvariantError, ParseError
from pprsr.graph import (
    DanglingPolicy,
    TransitionMatrix,
    build_gridworld,
    load_edge_list,
    load_embeddings,
    to_transition_matrix,
)
from pprsr.ppr import (
    NonConvergenceWarning,
    PPRConfig,
    as_distribution,
    one_hot,
    ppr_exact,
    ppr_power_iteration,
)
from pprsr.retrieval import compare_retrieval, ppr_retrieve, topk_cosine
from pprsr.successor import SRConfig, successor_matrix, value_function

EXIT_OK, EXIT_PARSE, EXIT_INVARIANT, EXIT_NONCONVERGED = 0, 1, 2, 3


class CommandFailed(Exception):
    """Report is complete but the command must exit nonzero."""

    def __init__(self, code):
        super().__init__(code)
        self.code = code


@dataclass
class RunReport:
    command: str
    inputs: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    timing_ms: float = 0.0
    # which outputs entry --csv prints; not serialized
    vector_key: str | None = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "inputs": self.inputs,
            "config": self.config,
            "outputs": self.outputs,
            "timing_ms": self.timing_ms,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls(**json.loads(text))


def _read_text(path: str) -> tuple[str, dict]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise ParseError(f"{path} is not valid UTF-8") from None
    return text, {"path": path, "sha256": hashlib.sha256(raw).hexdigest()}


def load_vector(text: str) -> np.ndarray:
    """Whitespace- or comma-separated reals; ``#`` starts a comment."""
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].replace(",", " ")
        for tok in line.split():
            try:
                values.append(float(tok))
            except ValueError:
                raise ParseError(f"not a number: {tok!r}", lineno) from None
    if not values:
        raise ParseError("empty vector file")
    return np.array(values)


def load_obstacles(text: str) -> list[tuple[int, int]]:
    """One ``row col`` pair per line (comma or whitespace separated)."""
    cells = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].replace(",", " ").split()
        if not line:
            continue
        if len(line) != 2:
            raise ParseError("expected 'row col'", lineno)
        try:
            cells.append((int(line[0]), int(line[1])))
        except ValueError:
            raise ParseError(f"bad cell {' '.join(line)!r}", lineno) from None
    return cells


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _restart(args, n, inputs) -> np.ndarray:
    if getattr(args, "restart_file", None):
        text, digest = _read_text(args.restart_file)
        inputs["restart"] = digest
        return as_distribution(load_vector(text), n)
    if getattr(args, "restart_node", None) is not None:
        return one_hot(n, args.restart_node)
    return np.full(n, 1.0 / n)


def _graph(args, inputs, restart_needed=True):
    text, inputs["graph"] = _read_text(args.graph_file)
    g = load_edge_list(text)
    p = _restart(args, g.node_count, inputs) if restart_needed else None
    policy = DanglingPolicy(getattr(args, "dangling", "uniform"))
    return to_transition_matrix(g, policy, p), p


def _run_ppr(P: TransitionMatrix, p, args, report: RunReport):
    cfg = PPRConfig(args.alpha, args.tol, args.max_iters)
    report.config.update(
        alpha=cfg.alpha, tolerance=cfg.tolerance, max_iters=cfg.max_iters,
        method="exact" if args.exact else "power",
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        sol = (ppr_exact if args.exact else ppr_power_iteration)(P, cfg, p)
    report.outputs.update(
        pi=_floats(sol.pi),
        iterations=sol.iterations,
        final_residual=sol.final_residual,
        converged=sol.converged,
    )
    report.vector_key = report.vector_key or "pi"
    if not sol.converged:
        raise CommandFailed(EXIT_NONCONVERGED)


def _run_sr(T: TransitionMatrix, args, report: RunReport):
    cfg = SRConfig(args.gamma, args.method, args.horizon, args.eta, args.steps, args.seed)
    report.config.update(gamma=cfg.gamma, method=cfg.method)
    if cfg.method == "series":
        report.config["horizon"] = cfg.horizon
    if cfg.method == "td":
        report.config.update(eta=cfg.eta, steps=cfg.steps, seed=cfg.seed)
    M = successor_matrix(T, cfg)
    report.outputs.update(M=_floats(M.entries), row_sum_error=M.row_sum_error())
    if args.reward_file:
        text, report.inputs["reward"] = _read_text(args.reward_file)
        V = value_function(M, load_vector(text))
        report.outputs["V"] = _floats(V)
        report.vector_key = "V"


def cmd_ppr(args, report):
    P, p = _graph(args, report.inputs)
    _run_ppr(P, p, args, report)


def cmd_sr(args, report):
    T, _ = _graph(args, report.inputs, restart_needed=False)
    _run_sr(T, args, report)


def cmd_verify(args, report):
    P, p = _graph(args, report.inputs)
    rep = check_equivalence(P, args.alpha, p, args.tol)
    report.config.update(alpha=args.alpha, tolerance=args.tol)
    report.outputs.update(rep.to_dict())
    if not rep.passed:
        raise CommandFailed(EXIT_INVARIANT)


def cmd_gridworld(args, report):
    obstacles = []
    if args.obstacles_file:
        text, report.inputs["obstacles"] = _read_text(args.obstacles_file)
        obstacles = load_obstacles(text)
    T = build_gridworld(args.width, args.height, obstacles)
    blocked = set(obstacles)
    cells = [
        [r, c] for r in range(args.height) for c in range(args.width) if (r, c) not in blocked
    ]
    report.config.update(width=args.width, height=args.height, emit=args.emit)
    report.outputs["cells"] = cells
    if args.emit == "graph":
        report.outputs["P"] = _floats(T.dense())
    elif args.emit == "sr":
        _run_sr(T, args, report)
    else:
        _run_ppr(T, _restart(args, T.n, report.inputs), args, report)


def cmd_retrieve(args, report):
    text, report.inputs["embeddings"] = _read_text(args.embeddings_file)
    e = load_embeddings(text, labels=args.labels)
    if args.query_file:
        qtext, report.inputs["query"] = _read_text(args.query_file)
        query = load_vector(qtext)
    elif args.query_index is not None:
        if not 0 <= args.query_index < e.m:
            raise InvariantError(f"query index {args.query_index} out of range [0, {e.m})")
        query = e.vectors[args.query_index]
    else:
        raise ParseError("one of --query-file or --query-index is required")
    k = min(args.k, e.m)
    report.config.update(alpha=args.alpha, k_graph=args.k_graph, k=k, compare=args.compare)
    labels = e.labels
    ranked = ppr_retrieve(e, query, args.alpha, args.k_graph, k)
    report.outputs["ppr"] = ranked.to_records(labels)
    if args.compare:
        report.outputs["cosine"] = topk_cosine(e, query, k).to_records(labels)
        cmp = compare_retrieval(e, query, args.alpha, args.k_graph)
        report.outputs["cosine_rank"] = list(cmp.cosine_rank)
        report.outputs["ppr_rank"] = list(cmp.ppr_rank)
        report.outputs["rank_improvements"] = list(cmp.rank_improvements)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def _add_common(p):
    p.add_argument("-o", "--output", help="write the report here instead of stdout")
    p.add_argument("--csv", action="store_true", help="print the output vector as index,value lines")


def _add_restart(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--restart-node", type=int, help="one-hot restart on this node")
    g.add_argument("--restart-file", help="restart distribution, one value per entry")


def _add_ppr_opts(p, alpha_default=0.85):
    p.add_argument("--alpha", type=float, default=alpha_default)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--exact", action="store_true", help="direct linear solve")


def _add_sr_opts(p, gamma_required=True):
    p.add_argument("--gamma", type=float, required=gamma_required, default=None if gamma_required else 0.9)
    p.add_argument("--method", choices=("invert", "series", "td"), default="invert")
    p.add_argument("--horizon", type=int, default=100)
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reward-file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pprsr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ppr", help="personalized PageRank of an edge-list graph")
    p.add_argument("graph_file")
    _add_restart(p)
    _add_ppr_opts(p)
    p.add_argument("--dangling", choices=("uniform", "teleport"), default="uniform")
    _add_common(p)
    p.set_defaults(func=cmd_ppr)

    p = sub.add_parser("sr", help="successor matrix of an edge-list graph")
    p.add_argument("graph_file")
    _add_sr_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_sr)

    p = sub.add_parser("verify", help="check PPR == (1-alpha) M^T p*")
    p.add_argument("graph_file")
    p.add_argument("--alpha", type=float, default=0.85)
    _add_restart(p)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--dangling", choices=("uniform", "teleport"), default="uniform")
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gridworld", help="grid-world random walk, its SR or its PPR")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--obstacles-file")
    p.add_argument("--emit", choices=("graph", "sr", "ppr"), default="graph")
    _add_restart(p)
    _add_ppr_opts(p)
    _add_sr_opts(p, gamma_required=False)
    _add_common(p)
    p.set_defaults(func=cmd_gridworld)

    p = sub.add_parser("retrieve", help="PPR retrieval over an embedding set")
    p.add_argument("embeddings_file")
    p.add_argument("--labels", action="store_true", help="first CSV column is a label")
    q = p.add_mutually_exclusive_group()
    q.add_argument("--query-file")
    q.add_argument("--query-index", type=int)
    p.add_argument("--alpha", type=float, default=0.85)
    p.add_argument("--k-graph", type=int, default=5)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--compare", action="store_true", help="also rank by cosine")
    _add_common(p)
    p.set_defaults(func=cmd_retrieve)
    return parser


def _csv(report: RunReport) -> str:
    key = report.vector_key
    if key is None:
        raise ParseError(f"--csv needs a vector output; '{report.command}' emits none")
    return "".join(f"{i},{v!r}\n" for i, v in enumerate(report.outputs[key]))


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    report = RunReport(args.command)
    start = time.perf_counter()
    code = EXIT_OK
    try:
        args.func(args, report)
    except CommandFailed as exc:
        code = exc.code
    except ParseError as exc:
        print(f"pprsr: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InvariantError, ValueError) as exc:
        print(f"pprsr: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    report.timing_ms = round((time.perf_counter() - start) * 1000.0, 3)
    try:
        text = _csv(report) if args.csv else report.to_json()
    except ParseError as exc:
        print(f"pprsr: {exc}", file=sys.stderr)
        return EXIT_PARSE
    _emit(text, args.output)
    return code


if __name__ == "__main__":
    sys.exit(main())
