"""Command-line front end.

Exit codes: 0 consistent / no COC, 1 violation / COC found, 2 input or usage
error, 3 inconclusive (search budget exhausted).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .broadcast import check_integrity, check_total_order, read_log
from .coc import DEFAULT_BUDGET as COC_BUDGET
from .coc import CocOutcome, detect_coc, detect_coc_with_fixed_orders, render_witness
from .errors import ConsistencyToolError, HistoryFormatError, PreconditionError, WellFormednessError
from .files import read_history
from .history import complete, is_well_formed, operations_of
from .orders import build_union_graph, to_dot
from .osc import DEFAULT_BUDGET, Outcome, SubsetPolicy, check_osc
from .sim import SimConfig, extract_object_orders, run_simulation, transfer_precedes_remap, write_run

OK, VIOLATION, USAGE, INCONCLUSIVE = 0, 1, 2, 3


def worst(codes) -> int:
    """Combine per-file exit codes: usage errors beat violations beat inconclusive results."""
    codes = set(codes)
    for code in (USAGE, VIOLATION, INCONCLUSIVE):
        if code in codes:
            return code
    return OK


def _load(path):
    h = read_history(path)
    if not is_well_formed(h):
        raise WellFormednessError("history is not well-formed")
    return h


def _policy(mode: str, subset_a: str, subset_file) -> SubsetPolicy:
    if mode == "linearizable":
        return SubsetPolicy.all()
    if mode == "sequential":
        return SubsetPolicy.none()
    if subset_a == "file":
        if subset_file is None:
            raise PreconditionError("--subset-a file needs --subset-file")
        text = Path(subset_file).read_text(encoding="utf-8")
        return SubsetPolicy.explicit(int(tok) for tok in text.replace(",", " ").split())
    return {"all": SubsetPolicy.all(), "writes": SubsetPolicy.writes_only(), "none": SubsetPolicy.none()}[subset_a]


def check_one(path, mode, subset_a, subset_file, budget) -> tuple[int, str]:
    try:
        h = _load(path)
        policy = _policy(mode, subset_a, subset_file)
        verdict = check_osc(h, policy, budget)
    except (ConsistencyToolError, OSError) as exc:
        return USAGE, f"{path}: error: {exc}"
    if verdict.outcome is Outcome.CONSISTENT:
        by_id = {op.op_id: op for op in operations_of(complete(verdict.extension))}
        order = " ; ".join(str(by_id[i]) for i in verdict.witness.order)
        return OK, f"{path}: CONSISTENT ({mode}, A={policy})\n  serialization: {order}"
    if verdict.outcome is Outcome.INCONCLUSIVE:
        return INCONCLUSIVE, f"{path}: INCONCLUSIVE ({verdict.reason})"
    return VIOLATION, f"{path}: VIOLATION ({mode}): {verdict.reason}"


def detect_one(path, budget, dot_path=None) -> tuple[int, str]:
    try:
        h = _load(path)
        report = detect_coc(h, budget)
    except (ConsistencyToolError, OSError) as exc:
        return USAGE, f"{path}: error: {exc}"
    if report.outcome is CocOutcome.INCONCLUSIVE:
        return INCONCLUSIVE, f"{path}: INCONCLUSIVE (budget of {budget} exhausted)"
    if report.outcome is CocOutcome.L4_UNSATISFIABLE:
        return VIOLATION, (f"{path}: L4 UNSATISFIABLE: object {report.unsatisfiable_object!r} "
                           f"has no legal serialization")
    if dot_path is not None:
        Path(dot_path).write_text(to_dot(build_union_graph(complete(report.extension), report.orders)))
    if report.outcome is CocOutcome.NO_COC:
        orders = "; ".join(f"{x}: {list(o)}" for x, o in report.orders.items())
        return OK, f"{path}: NO COC\n  acyclic object orders: {orders}"
    ops = operations_of(complete(report.extension))
    trace = render_witness(report.witness, ops)
    return VIOLATION, (f"{path}: CONTAINS COC (cycle of length {len(report.witness)})\n"
                       + "\n".join("  " + line for line in trace.splitlines()))


def _fan_out(fn, jobs, arglists):
    if jobs > 1 and len(arglists) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, *zip(*arglists)))
    return [fn(*args) for args in arglists]


def cmd_check(args) -> int:
    results = _fan_out(check_one, args.jobs,
                       [(p, args.mode, args.subset_a, args.subset_file, args.budget) for p in args.paths])
    for _, text in results:
        print(text)
    return worst(code for code, _ in results)


def cmd_detect_coc(args) -> int:
    if args.dot and len(args.paths) > 1:
        print("error: --dot takes a single history", file=sys.stderr)
        return USAGE
    results = _fan_out(detect_one, args.jobs, [(p, args.budget, args.dot) for p in args.paths])
    for _, text in results:
        print(text)
    return worst(code for code, _ in results)


def _config_from(args) -> SimConfig:
    data = {}
    if args.config:
        data.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    for flag, key in (("processes", "process_count"), ("objects", "object_count"), ("ops", "op_count"),
                      ("seed", "seed"), ("read_probability", "read_probability"),
                      ("change_node_rate", "change_node_rate"), ("max_staleness", "max_staleness")):
        value = getattr(args, flag)
        if value is not None:
            data[key] = value
    cfg = SimConfig.from_dict(data)
    cfg.validate()
    return cfg


def self_check(run) -> list[str]:
    problems = []
    if not check_integrity(run.broadcast_log):
        problems.append("broadcast log fails integrity")
    if not check_total_order(run.broadcast_log):
        problems.append("broadcast log fails total order")
    if not transfer_precedes_remap(run):
        problems.append("a state-transfer write follows its remap")
    report = detect_coc_with_fixed_orders(run.history, extract_object_orders(run))
    if not report.no_coc:
        problems.append(f"composition order cycle: {report.witness}")
    return problems


def cmd_simulate(args) -> int:
    try:
        cfg = _config_from(args)
    except (ConsistencyToolError, OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    run = run_simulation(cfg)
    manifest = write_run(run, args.out)
    print(f"wrote {manifest['operations']} operations, {manifest['messages']} messages to {args.out}")
    for name, digest in sorted(manifest["files"].items()):
        print(f"  {name}  sha256={digest}")
    if args.self_check:
        problems = self_check(run)
        for p in problems:
            print(f"self-check: {p}")
        if problems:
            return VIOLATION
        print("self-check: ok")
    return OK


def cmd_verify_broadcast(args) -> int:
    try:
        log = read_log(args.path)
    except (HistoryFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    integrity = check_integrity(log)
    order = check_total_order(log)
    print(f"integrity: {'ok' if integrity else 'VIOLATED'}")
    print(f"total order: {'ok' if order else 'VIOLATED'}")
    return OK if integrity and order else VIOLATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coppar-check", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="decide linearizability, sequential consistency or OSC")
    p.add_argument("paths", nargs="+", help="history files (JSON lines)")
    p.add_argument("--mode", choices=("linearizable", "sequential", "osc"), default="osc")
    p.add_argument("--subset-a", choices=("all", "writes", "none", "file"), default="writes",
                   help="real-time subset A for --mode osc")
    p.add_argument("--subset-file", help="op ids forming A, whitespace or comma separated")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("detect-coc", help="look for a composition order cycle")
    p.add_argument("paths", nargs="+")
    p.add_argument("--budget", type=int, default=COC_BUDGET)
    p.add_argument("--dot", help="write the dependency graph in DOT format to this file")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_detect_coc)

    p = sub.add_parser("simulate", help="run the broadcast simulator and write its artifacts")
    p.add_argument("--config", help="JSON file with simulator settings; flags override it")
    p.add_argument("--processes", type=int)
    p.add_argument("--objects", type=int)
    p.add_argument("--ops", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--read-probability", type=float)
    p.add_argument("--change-node-rate", type=float)
    p.add_argument("--max-staleness", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--self-check", action="store_true", help="fail unless the run is free of composition cycles")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-broadcast", help="check integrity and total order of a broadcast log")
    p.add_argument("path")
    p.set_defaults(func=cmd_verify_broadcast)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
