"""Discrete-event core: queue, channel gating, trace."""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, List, Mapping, Optional, Tuple

from ..geometry import Link, Obstacle, Topology
from ..protocol.messages import MULTICAST, Message
from ..protocol.node import OMNI, Antenna, antenna_str


class EventKind(str, enum.Enum):
    SLOT = "SlotBoundary"
    DELIVER = "Deliver"
    TIMER = "TimerFire"
    OBSTACLE = "ObstacleAppear"


@dataclass(frozen=True)
class SimEvent:
    time: int
    seq: int
    kind: EventKind
    node: int = -1
    payload: Any = None
    tag: str = ""


class EventQueue:
    """Min-heap keyed on (time, seq); seq follows insertion order."""

    def __init__(self) -> None:
        self._heap: List[Tuple[int, int, SimEvent]] = []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, time: int, kind: EventKind, node: int = -1, payload: Any = None, tag: str = "") -> SimEvent:
        ev = SimEvent(time, self._seq, kind, node, payload, tag)
        self._seq += 1
        heapq.heappush(self._heap, (time, ev.seq, ev))
        return ev

    def peek_time(self) -> Optional[int]:
        return self._heap[0][0] if self._heap else None

    def pop(self) -> SimEvent:
        return heapq.heappop(self._heap)[2]


# --- trace -----------------------------------------------------------------


@dataclass(frozen=True)
class TraceRecord:
    time: int
    node: int
    phase: str
    action: str
    detail: str

    def line(self) -> str:
        return f"{self.time}\t{self.node}\t{self.phase}\t{self.action}\t{self.detail}"

    @classmethod
    def parse(cls, line: str) -> "TraceRecord":
        time, node, phase, action, detail = line.rstrip("\n").split("\t", 4)
        return cls(int(time), int(node), phase, action, detail)


@dataclass
class Trace:
    records: List[TraceRecord] = field(default_factory=list)

    def append(self, rec: TraceRecord) -> None:
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def dumps(self) -> str:
        return "".join(r.line() + "\n" for r in self.records)

    @classmethod
    def loads(cls, text: str) -> "Trace":
        return cls([TraceRecord.parse(l) for l in text.splitlines() if l])

    def select(self, action: Optional[str] = None, node: Optional[int] = None) -> List[TraceRecord]:
        return [r for r in self.records
                if (action is None or r.action == action) and (node is None or r.node == node)]


# --- channel ---------------------------------------------------------------


def can_hear(antenna: Antenna, sender: int) -> bool:
    return antenna == OMNI or sender in antenna


def deliver(msg: Message, topology: Topology, blocked: Iterable[Link],
            antennas: Mapping[int, Antenna]) -> Tuple[int, ...]:
    """Receivers that actually get ``msg``.

    A frame crosses the segment between sender and receiver; it arrives iff
    that segment exists (at most three hops apart), is not blocked, and the
    receiver is omni or pointed at the sender. Multicasts apply the same gate
    to each audience member on its own.
    """
    blocked = blocked if isinstance(blocked, (set, frozenset)) else frozenset(blocked)
    targets = msg.targets if msg.receiver == MULTICAST else (msg.receiver,)
    out = []
    for r in targets:
        if r == msg.sender or r not in antennas:
            continue
        a, b = min(r, msg.sender), max(r, msg.sender)
        if not topology.has_link(a, b) or Link(a, b) in blocked:
            continue
        if can_hear(antennas[r], msg.sender):
            out.append(r)
    return tuple(out)


# --- simulation kernel -----------------------------------------------------


class Simulator:
    """Owns the clock, the queue, the channel state and the trace.

    Nodes are attached with ``attach``; they talk back through ``send``,
    ``timer``, ``log`` and ``note``. ``on_note`` lets a driver observe
    protocol milestones without parsing the trace.
    """

    def __init__(self, topology: Topology, record: bool = True):
        self.topology = topology
        self.queue = EventQueue()
        self.now = 0
        self.nodes: list = []
        self.blocked: frozenset = frozenset()
        self.trace = Trace()
        self.record = record
        self.notes: List[Tuple[str, dict]] = []
        self.on_note: Optional[Callable[[str, dict], None]] = None
        self.slot = topology.config.slot

    def attach(self, nodes: list) -> None:
        self.nodes = nodes

    # scheduling ------------------------------------------------------------

    def schedule(self, time: int, kind: EventKind, node: int = -1, payload: Any = None, tag: str = "") -> SimEvent:
        if time < self.now:
            raise ValueError(f"cannot schedule at {time} before the clock ({self.now})")
        return self.queue.push(time, kind, node, payload, tag)

    def run_until(self, t: int, stop: Optional[Callable[[], bool]] = None) -> int:
        """Process every event with time <= t (or until ``stop`` says so after an event).

        The clock stays at the last processed event, so an empty queue
        returns immediately at the current time.
        """
        while self.queue and self.queue.peek_time() <= t:
            ev = self.queue.pop()
            self.now = ev.time
            self._dispatch(ev)
            if stop is not None and stop():
                return self.now
        return self.now

    def _dispatch(self, ev: SimEvent) -> None:
        if ev.kind == EventKind.SLOT:
            s = ev.payload
            if s > 0:
                for n in self.nodes:
                    n.on_slot_end(s - 1, ev.time)
            for n in self.nodes:
                n.on_slot_start(s, ev.time)
            self.schedule(ev.time + self.slot, EventKind.SLOT, payload=s + 1)
        elif ev.kind == EventKind.DELIVER:
            msg: Message = ev.payload
            antennas = {n.index: n.antenna for n in self.nodes}
            for r in deliver(msg, self.topology, self.blocked, antennas):
                node = self.nodes[r]
                self.log(node, "RX", msg.summary())
                node.on_message(msg, ev.time)
        elif ev.kind == EventKind.TIMER:
            self.nodes[ev.node].on_timer(ev.tag, ev.payload, ev.time)
        elif ev.kind == EventKind.OBSTACLE:
            ob, links = ev.payload
            self.blocked = self.blocked | links
            blocked = ",".join(str(l) for l in sorted(links))
            self._record(ev.time, -1, "-", "OBSTACLE",
                         f"c=({ob.center[0]:g},{ob.center[1]:g}) r={ob.radius:g} blocked={blocked or '-'}")

    # node-facing context ---------------------------------------------------

    def send(self, node, msg: Message, airtime: int) -> None:
        self.log(node, "TX", msg.summary())
        self.schedule(self.now + airtime, EventKind.DELIVER, node.index, msg)

    def timer(self, node, delay: int, tag: str, data: Any = None) -> None:
        self.schedule(self.now + delay, EventKind.TIMER, node.index, data, tag)

    def log(self, node, action: str, detail: str) -> None:
        if self.record:
            ant = antenna_str(node.antenna)
            self._record(self.now, node.index, node.phase.value, action,
                         f"{detail} ant={ant}" if detail else f"ant={ant}")

    def _record(self, time: int, node: int, phase: str, action: str, detail: str) -> None:
        if self.record:
            self.trace.append(TraceRecord(time, node, phase, action, detail))

    def note(self, kind: str, **info) -> None:
        info.setdefault("t", self.now)
        self.notes.append((kind, info))
        if self.on_note is not None:
            self.on_note(kind, info)

    def inject(self, obstacle: Obstacle, links: frozenset) -> None:
        self.schedule(obstacle.appear_time, EventKind.OBSTACLE, payload=(obstacle, frozenset(links)))
