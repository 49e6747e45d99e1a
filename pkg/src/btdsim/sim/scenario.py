"""End-to-end runs: steady flow, obstacle, detection, recovery."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

from ..geometry import (
    BlockageVerdict,
    InvalidGeometry,
    Obstacle,
    Topology,
    TopologyConfig,
    VerdictEntry,
    blocked_by_all,
    build_topology,
    classify_oracle,
)
from ..protocol.messages import BtdpPayload, PrmPayload
from ..protocol.node import BtdNode, Phase
from .engine import EventKind, Simulator, Trace


class NonTermination(RuntimeError):
    """The protocol failed to settle before the hard deadline."""

    def __init__(self, deadline: int, now: int, detail: str = ""):
        super().__init__(f"no recovery by tick {deadline} (clock {now}){': ' + detail if detail else ''}")
        self.deadline = deadline
        self.now = now


@dataclass
class SessionInfo:
    leader: int
    t0: int
    npt: int
    btdp: Optional[BtdpPayload] = None
    verdict: Optional[BlockageVerdict] = None
    verdict_time: Optional[int] = None
    prm: Optional[PrmPayload] = None
    unreachable: bool = False
    deferred: bool = False


@dataclass
class ScenarioResult:
    N: int
    blocked: frozenset
    oracle: BlockageVerdict
    detected: BlockageVerdict
    onset: Optional[int]
    path: Tuple[int, ...]
    recovery_time: Optional[int]
    outcome: str  # "no blockage", "recovered", "unreachable"
    sessions: List[SessionInfo] = field(default_factory=list)
    idle: Tuple[int, ...] = ()
    deadline: Optional[int] = None

    @property
    def agreement(self) -> bool:
        return self.detected.keys() == self.oracle.keys()

    @property
    def detection_latency(self) -> Optional[int]:
        done = [s.verdict_time for s in self.sessions if s.verdict_time is not None]
        if self.onset is None or not done:
            return None
        return max(done) - self.onset

    @property
    def recovery_latency(self) -> Optional[int]:
        if self.onset is None or self.recovery_time is None:
            return None
        return self.recovery_time - self.onset


def check_timing(config: TopologyConfig, topology: Topology) -> None:
    """Control traffic along the whole chain must fit inside one data slot."""
    if topology.N * config.control_slot >= config.slot:
        raise InvalidGeometry(
            f"N*T_s' = {topology.N * config.control_slot} must stay below T_s = {config.slot}"
        )
    if config.slot // 3 <= config.control_slot:
        raise InvalidGeometry("a retransmission interval (T_s/3) must exceed one control slot")


class _Run:
    def __init__(self, config: TopologyConfig, obstacles: Sequence[Obstacle],
                 deadline_ticks: Optional[int], record: bool):
        self.cfg = config
        self.topology = build_topology(config)
        check_timing(config, self.topology)
        self.obstacles = list(obstacles)
        self.sim = Simulator(self.topology, record=record)
        N = self.topology.N
        delta = config.detection_interval
        self.nodes = [BtdNode(i, N, config.slot, config.control_slot, delta, self.sim) for i in range(N)]
        self.sim.attach(self.nodes)
        self.sim.on_note = self._on_note
        self.fixed_deadline = deadline_ticks
        self.deadline: Optional[int] = None
        self.sessions: List[SessionInfo] = []
        self.by_leader: dict = {}
        self.prm_time: Optional[int] = None
        self.sink_times: List[int] = []
        self.onset: Optional[int] = None

    def _on_note(self, kind: str, info: dict) -> None:
        cfg = self.cfg
        if kind == "onset":
            s = SessionInfo(info["node"], info["t0"], info["npt"])
            self.sessions.append(s)
            self.by_leader[info["node"]] = s
            if self.onset is None:
                self.onset = info["t0"]
            delta = cfg.detection_interval
            dtl = 6 * delta + 2 * cfg.control_slot
            limit = info["t0"] + info["npt"] + 2 * cfg.control_slot + dtl + (self.topology.N + 2) * cfg.slot
            self.deadline = limit if self.deadline is None else max(self.deadline, limit)
        elif kind == "defer":
            self.by_leader[info["node"]].deferred = True
        elif kind == "session":
            self.by_leader[info["node"]].btdp = info["btdp"]
        elif kind == "verdict":
            s = self.by_leader[info["node"]]
            s.verdict, s.verdict_time = info["verdict"], info["t"]
        elif kind == "prm":
            self.by_leader[info["node"]].prm = info["prm"]
        elif kind == "unreachable":
            self.by_leader[info["node"]].unreachable = True
        elif kind == "sink":
            if self.sessions:
                self.sink_times.append(info["t"])

    def _last_finish(self) -> Optional[int]:
        ends = [s.btdp.finish for s in self.sessions if s.btdp is not None]
        return max(ends) if ends else None

    @property
    def sink_after(self) -> Optional[int]:
        """First DATA at the sink after the most recent detection finished."""
        last = self._last_finish()
        if last is None:
            return None
        later = [t for t in self.sink_times if t >= last]
        return later[0] if later else None

    def _busy(self) -> bool:
        return any(n.phase in (Phase.PREPARING, Phase.DETECTING, Phase.RECONFIGURING)
                   and n.leader is not None and not n.deferred for n in self.nodes)

    def _settled(self) -> bool:
        if not self.sessions:
            last_appear = max((ob.appear_time for ob in self.obstacles), default=0)
            return self.sim.now >= last_appear + 2 * self.cfg.slot
        open_ = [s for s in self.sessions if not s.deferred and s.verdict is None]
        if open_ or self._busy():
            return False
        if self.sink_after is not None:
            return True
        last = self.sessions[-1]
        return last.unreachable and self.sim.now >= last.btdp.finish

    def run(self) -> Tuple[ScenarioResult, Trace]:
        sim = self.sim
        for ob in self.obstacles:
            sim.inject(ob, frozenset(self._links(ob)))
        sim.schedule(0, EventKind.SLOT, payload=0)
        slot = self.cfg.slot
        t = 0
        while True:
            sim.run_until(t)
            if self._settled():
                break
            limit = self.fixed_deadline if self.fixed_deadline is not None else self.deadline
            if limit is not None and t > limit:
                raise NonTermination(limit, t, f"{len(self.sessions)} session(s) started")
            t += slot
        return self._result(), sim.trace

    def _links(self, ob: Obstacle) -> frozenset:
        return blocked_by_all(self.topology, [ob])

    def _result(self) -> ScenarioResult:
        blocked = blocked_by_all(self.topology, self.obstacles)
        oracle = classify_oracle(self.topology, blocked)
        merged: dict = {}
        order = []
        for s in self.sessions:
            if s.verdict is None:
                continue
            for e in s.verdict.entries:
                if e.key() not in merged:
                    merged[e.key()] = set()
                    order.append(e.key())
                merged[e.key()] |= e.evidence
        detected = BlockageVerdict(tuple(VerdictEntry(t, n, frozenset(merged[(t, n)])) for t, n in order))
        if not self.sessions:
            outcome = "no blockage"
        elif self.sink_after is not None:
            outcome = "recovered"
        else:
            outcome = "unreachable"
        idle = tuple(n.index for n in self.nodes if n.phase == Phase.IDLE)
        return ScenarioResult(
            N=self.topology.N,
            blocked=blocked,
            oracle=oracle,
            detected=detected,
            onset=self.onset,
            path=self._final_path(),
            recovery_time=self.sink_after,
            outcome=outcome,
            sessions=self.sessions,
            idle=idle,
            deadline=self.deadline,
        )

    def _final_path(self) -> Tuple[int, ...]:
        prms = [s.prm for s in self.sessions if s.prm is not None]
        if not prms:
            return tuple(range(self.topology.N))
        return max(prms, key=lambda p: p.std).route


def run_scenario(config: TopologyConfig, obstacles: Union[Obstacle, Sequence[Obstacle]],
                 deadline_ticks: Optional[int] = None, record: bool = True) -> Tuple[ScenarioResult, Trace]:
    """Simulate one road segment with one (or, experimentally, several) obstacles."""
    if isinstance(obstacles, Obstacle):
        obstacles = [obstacles]
    return _Run(config, obstacles, deadline_ticks, record).run()
