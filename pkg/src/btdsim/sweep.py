"""Batch runs over many obstacle placements, and their reports."""

from __future__ import annotations

import collections
import multiprocessing
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .config import ScenarioFile
from .geometry import Obstacle, TopologyConfig, blocked_links, build_topology
from .sim.engine import Trace
from .sim.scenario import NonTermination, ScenarioResult, run_scenario

COLUMNS = ("cell", "x", "y", "radius", "oracle", "detected", "agree", "outcome",
           "onset", "detect_latency", "recover_latency", "path")


@dataclass(frozen=True)
class CellResult:
    cell: int
    x: float
    y: float
    radius: float
    oracle: str
    detected: str
    agree: bool
    single: bool
    outcome: str
    onset: Optional[int]
    detect_latency: Optional[int]
    recover_latency: Optional[int]
    path: str
    types: Tuple[str, ...] = ()

    def row(self) -> List[str]:
        def opt(v):
            return "-" if v is None else str(v)

        return [str(self.cell), repr(self.x), repr(self.y), repr(self.radius), self.oracle,
                self.detected, "1" if self.agree else "0", self.outcome, opt(self.onset),
                opt(self.detect_latency), opt(self.recover_latency), self.path]


def summarize(cell: int, ob: Obstacle, res: ScenarioResult) -> CellResult:
    return CellResult(
        cell=cell,
        x=ob.center[0],
        y=ob.center[1],
        radius=ob.radius,
        oracle=res.oracle.summary(),
        detected=res.detected.summary(),
        agree=res.agreement,
        single=res.oracle.is_single,
        outcome=res.outcome,
        onset=res.onset,
        detect_latency=res.detection_latency,
        recover_latency=res.recovery_latency,
        path="-".join(map(str, res.path)),
        types=tuple(str(e.type) for e in res.oracle.entries),
    )


@dataclass
class SweepReport:
    cells: List[CellResult] = field(default_factory=list)

    def blockage_cells(self) -> List[CellResult]:
        return [c for c in self.cells if c.oracle != "none"]

    @property
    def agreement_rate(self) -> Optional[float]:
        hit = self.blockage_cells()
        if not hit:
            return None
        return sum(c.agree for c in hit) / len(hit)

    @property
    def single_type_agreement(self) -> Optional[float]:
        hit = [c for c in self.cells if c.single]
        if not hit:
            return None
        return sum(c.agree for c in hit) / len(hit)

    def histogram(self) -> Dict[str, int]:
        """Oracle type per blockage cell; cells with several entries count as 'mixed'."""
        h = collections.Counter(c.types[0] if len(c.types) == 1 else "mixed" for c in self.blockage_cells())
        return dict(sorted(h.items()))

    @staticmethod
    def _mean(values) -> Optional[float]:
        values = [v for v in values if v is not None]
        return sum(values) / len(values) if values else None

    @property
    def mean_detection_latency(self) -> Optional[float]:
        return self._mean(c.detect_latency for c in self.cells)

    @property
    def mean_recovery_latency(self) -> Optional[float]:
        return self._mean(c.recover_latency for c in self.cells)

    def table(self) -> str:
        lines = ["\t".join(COLUMNS)] + ["\t".join(c.row()) for c in self.cells]
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        rate = self.agreement_rate
        single = self.single_type_agreement
        lat_d, lat_r = self.mean_detection_latency, self.mean_recovery_latency
        lines = [
            f"cells: {len(self.cells)}",
            f"blockage cells: {len(self.blockage_cells())}",
            "agreement rate: " + ("no blockages" if rate is None else f"{rate:.4f}"),
            "single-type agreement rate: " + ("no blockages" if single is None else f"{single:.4f}"),
            "type histogram: " + (", ".join(f"{k}={v}" for k, v in self.histogram().items()) or "-"),
            "mean detection latency: " + ("-" if lat_d is None else f"{lat_d:.2f} ticks"),
            "mean recovery latency: " + ("-" if lat_r is None else f"{lat_r:.2f} ticks"),
        ]
        return "\n".join(lines) + "\n"


# --- execution ---------------------------------------------------------------


def _run_one(args) -> Tuple[str, object]:
    cfg, ob, deadline = args
    try:
        res, _ = run_scenario(cfg, ob, deadline_ticks=deadline, record=False)
    except NonTermination as exc:
        return ("error", (exc.deadline, exc.now, str(exc)))
    return ("ok", res)


def run_sweep(scenario: ScenarioFile, workers: int = 1, cache: bool = True,
              deadline_ticks: Optional[int] = None) -> SweepReport:
    """Run every cell; the report is identical for any worker count.

    With ``cache`` on, cells whose obstacle blocks exactly the same set of
    links share one simulation: the protocol only ever sees which links are
    blocked, never where the disk sits.
    """
    cfg = scenario.topology
    topo = build_topology(cfg)
    obstacles = scenario.obstacles()
    keys = [blocked_links(topo, ob) if cache else i for i, ob in enumerate(obstacles)]
    first: Dict[object, int] = {}
    for i, key in enumerate(keys):
        first.setdefault(key, i)
    jobs = sorted(first.values())
    tasks = [(cfg, obstacles[i], deadline_ticks) for i in jobs]

    if workers > 1 and len(tasks) > 1:
        ctx = multiprocessing.get_context("fork" if "fork" in multiprocessing.get_all_start_methods() else None)
        with ctx.Pool(workers) as pool:
            outcomes = pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * workers)))
    else:
        outcomes = [_run_one(t) for t in tasks]

    results: Dict[int, ScenarioResult] = {}
    for i, (status, value) in zip(jobs, outcomes):
        if status == "error":
            deadline, now, msg = value
            ob = obstacles[i]
            raise NonTermination(deadline, now, f"cell {i} (x={ob.center[0]}, y={ob.center[1]}, r={ob.radius}): {msg}")
        results[i] = value

    report = SweepReport()
    for i, (ob, key) in enumerate(zip(obstacles, keys)):
        report.cells.append(summarize(i, ob, results[first[key]]))
    return report


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


# --- persistence -------------------------------------------------------------


def emit_report(report: SweepReport, directory: str, table: str = "results.tsv",
                summary: str = "summary.txt") -> Tuple[str, str]:
    os.makedirs(directory, exist_ok=True)
    tpath = os.path.join(directory, table)
    spath = os.path.join(directory, summary)
    with open(tpath, "w", encoding="utf-8") as fh:
        fh.write(report.table())
    with open(spath, "w", encoding="utf-8") as fh:
        fh.write(report.summary())
    return tpath, spath


def emit_trace(trace: Trace, path: str) -> str:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(trace.dumps())
    return path


def load_trace(path: str) -> Trace:
    with open(path, encoding="utf-8") as fh:
        return Trace.loads(fh.read())
