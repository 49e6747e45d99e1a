"""Command line entry point: ``btdsim validate|run|sweep FILE``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import List, Optional

from .config import ParseError, ScenarioFile, ValidationError, parse_scenario
from .geometry import InvalidGeometry, build_topology
from .sim.scenario import NonTermination, run_scenario
from .sweep import default_workers, emit_report, emit_trace, run_sweep, summarize, SweepReport

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NONTERMINATION = 3

log = logging.getLogger("btdsim")


def _load(path: str, strict: bool) -> ScenarioFile:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    sf = parse_scenario(text, strict_interference=strict)
    for w in sf.warnings:
        log.warning("%s: %s", path, w)
    return sf


def cmd_validate(args, sf: ScenarioFile) -> int:
    topo = build_topology(sf.topology)
    print(f"ok: N={topo.N} d_0={topo.d_0:.4f} m, {len(sf.cells())} obstacle cell(s), mode={sf.obstacle.mode}")
    return EXIT_OK


def cmd_run(args, sf: ScenarioFile) -> int:
    out_dir = sf.output.resolved_dir()
    trace_dir = args.trace_dir or out_dir
    report = SweepReport()
    for i, ob in enumerate(sf.obstacles()):
        res, trace = run_scenario(sf.topology, ob, deadline_ticks=args.deadline_ticks)
        path = emit_trace(trace, os.path.join(trace_dir, f"trace_{i:05d}.tsv"))
        cell = summarize(i, ob, res)
        report.cells.append(cell)
        print(f"cell {i}: oracle={cell.oracle} detected={cell.detected} agree={int(cell.agree)} "
              f"outcome={cell.outcome} path={cell.path} trace={path}")
    emit_report(report, out_dir, sf.output.table, sf.output.summary)
    return EXIT_OK


def cmd_sweep(args, sf: ScenarioFile) -> int:
    out_dir = sf.output.resolved_dir()
    report = run_sweep(sf, workers=args.workers, cache=not args.no_cache, deadline_ticks=args.deadline_ticks)
    if args.trace_dir:
        for i, ob in enumerate(sf.obstacles()):
            _, trace = run_scenario(sf.topology, ob, deadline_ticks=args.deadline_ticks)
            emit_trace(trace, os.path.join(args.trace_dir, f"trace_{i:05d}.tsv"))
    tpath, spath = emit_report(report, out_dir, sf.output.table, sf.output.summary)
    sys.stdout.write(report.summary())
    print(f"table: {tpath}\nsummary: {spath}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="btdsim", description="Blockage detection and recovery simulator for mmWave relay chains.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("file", help="scenario file")
        sp.add_argument("--strict-interference", action="store_true",
                        help="reject (instead of warn about) layouts that violate the interference-free condition")

    sp = sub.add_parser("validate", help="parse and check a scenario file")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    for name, func, helptext in (("run", cmd_run, "simulate each obstacle and write its trace"),
                                 ("sweep", cmd_sweep, "simulate a grid or random batch and write a report")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--trace-dir", default=None, help="directory for per-scenario trace files")
        sp.add_argument("--deadline-ticks", type=int, default=None,
                        help="absolute tick after which an unsettled run counts as non-terminating")
        if name == "sweep":
            sp.add_argument("--workers", type=int, default=1,
                            help=f"parallel worker processes (this machine has {default_workers()})")
            sp.add_argument("--no-cache", action="store_true",
                            help="simulate every cell even when its blocked-link set was already seen")
        sp.set_defaults(func=func)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        sf = _load(args.file, args.strict_interference)
        return args.func(args, sf)
    except (ParseError, ValidationError, InvalidGeometry) as exc:
        log.error("invalid scenario: %s", exc)
        return EXIT_INVALID
    except NonTermination as exc:
        log.error("%s", exc)
        return EXIT_NONTERMINATION


if __name__ == "__main__":
    sys.exit(main())
