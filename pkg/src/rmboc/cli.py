"""Command-line front end: run, analyze, verify.

Exit codes: 0 success, 1 configuration or input errors, 2 property or
audit violations. The default output directory is taken from the
RMBOC_OUT_DIR environment variable when set.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import analysis
from .engine import Engine, RunConfig
from .errors import InvalidParameter, RmbocError
from .scenario import parse_scenario
from .topology import build_1d, build_2d
from .verify import run_campaign

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATION = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rmboc",
        description="Cycle-accurate simulator of a segmented-bus circuit-switched NoC",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario file")
    p_run.add_argument("--topo", choices=("1d", "2d"), required=True)
    p_run.add_argument("--n", type=int, required=True,
                       help="PE count (1d) or mesh side (2d)")
    p_run.add_argument("--k", type=int, required=True, help="segments per link")
    p_run.add_argument("--w", type=int, default=16, help="data word width in bits")
    p_run.add_argument("--scenario", required=True, help="scenario file path")
    p_run.add_argument("--fifo-depth", type=int, default=None)
    p_run.add_argument("--pe-latency", type=int, default=2)
    p_run.add_argument("--relay-latency", type=int, default=2)
    p_run.add_argument("--timeout", type=int, default=None)
    p_run.add_argument("--retry-limit", type=int, default=8,
                       help="retransmissions before giving up; -1 retries forever")
    p_run.add_argument("--max-cycles", type=int, default=100_000)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--out-dir", default=None)
    p_run.add_argument("--trace", default="trace.txt", help="trace file name")
    p_run.add_argument("--stats", default="stats.csv", help="stats CSV file name")
    p_run.add_argument("--audit", action="store_true",
                       help="per-cycle invariant audit; violations exit nonzero")
    p_run.add_argument("--figures", action="store_true",
                       help="render PNG figures next to the CSV output")

    p_an = sub.add_parser("analyze", help="tabulate command-load bounds against the oracle")
    p_an.add_argument("--n", required=True, help="a PE count or an inclusive range like 2..8")
    p_an.add_argument("--mesh-demand", action="store_true",
                      help="also report all-pairs mesh segment demand for N=2..4")
    p_an.add_argument("--out-dir", default=None)
    p_an.add_argument("--figures", action="store_true")

    p_ver = sub.add_parser("verify", help="randomized protocol-safety campaign")
    p_ver.add_argument("--scenarios", type=int, default=1000)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--fifo-depth", type=int, default=None,
                       help="force one side-FIFO depth for every scenario")
    return parser


def _out_dir(arg) -> str:
    return arg or os.environ.get("RMBOC_OUT_DIR", ".")


def cmd_run(args) -> int:
    if args.topo == "1d":
        topology = build_1d(args.n, args.k, args.w)
    else:
        topology = build_2d(args.n, args.k, args.w)
    with open(args.scenario, "r", encoding="utf-8") as fh:
        events = parse_scenario(fh.read(), topology)
    config = RunConfig(
        fifo_depth=args.fifo_depth,
        pe_latency=args.pe_latency,
        relay_latency=args.relay_latency,
        timeout=args.timeout,
        retry_limit=None if args.retry_limit < 0 else args.retry_limit,
        max_cycles=args.max_cycles,
        seed=args.seed,
        audit=args.audit,
    )
    result = Engine(topology, events, config).run()

    out_dir = _out_dir(args.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    trace_path = os.path.join(out_dir, args.trace)
    with open(trace_path, "w", encoding="utf-8") as fh:
        for line in result.trace:
            fh.write(line + "\n")
    stats_path = os.path.join(out_dir, args.stats)
    with open(stats_path, "w", encoding="utf-8") as fh:
        fh.write(result.stats.to_csv())
    print(f"trace: {trace_path}")
    print(f"stats: {stats_path}")
    if args.figures:
        from .report import run_figures

        for path in run_figures(result.stats, topology, out_dir):
            print(f"figure: {path}")

    c = result.stats.counters
    state = "quiescent" if result.quiescent else "cycle-capped"
    print(
        f"{state} after {result.stats.cycles_run} cycles: "
        f"{c['established']} established, {c['closed']} closed, "
        f"{c['words_delivered']}/{c['words_sent']} words delivered"
    )
    if args.audit and not result.audit.ok:
        for cycle, kind, detail in result.audit.violations:
            print(f"audit violation at cycle {cycle}: {kind}: {detail}", file=sys.stderr)
        for leak in result.audit.leaked:
            print(f"leaked segment at quiescence: {leak}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def _parse_n_range(text: str) -> list:
    if ".." in text:
        lo, hi = text.split("..", 1)
        values = list(range(int(lo), int(hi) + 1))
    else:
        values = [int(text)]
    if not values or min(values) < 2:
        raise InvalidParameter(f"analysis needs n >= 2, got {text!r}")
    return values


def cmd_analyze(args) -> int:
    values = _parse_n_range(args.n)
    rows = []
    print("n, max_total_comm, oracle, worst_case_latency, match")
    for n in values:
        closed = analysis.max_total_comm(n)
        oracle = analysis.oracle_max_total_comm(n)
        wcl = analysis.worst_case_latency(n)
        ok = "ok" if closed == oracle else "MISMATCH"
        rows.append((n, closed, oracle, wcl, ok))
        print(f"{n}, {closed}, {oracle}, {wcl}, {ok}")
    if args.mesh_demand:
        print("N, max_link_segments, ordered_pairs")
        for side in (2, 3, 4):
            d = analysis.segment_demand_2d(side)
            print(f"{side}, {d.max_link_load}, {d.pair_count}")
    if args.figures:
        from .report import analyze_figures

        for path in analyze_figures(rows, _out_dir(args.out_dir)):
            print(f"figure: {path}")
    return EXIT_OK if all(r[4] == "ok" for r in rows) else EXIT_VIOLATION


def cmd_verify(args) -> int:
    report = run_campaign(
        scenarios=args.scenarios, seed=args.seed, fifo_depth=args.fifo_depth
    )
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_VIOLATION


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "analyze":
            return cmd_analyze(args)
        return cmd_verify(args)
    except (RmbocError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
