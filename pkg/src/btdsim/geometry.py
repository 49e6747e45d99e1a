"""Triangular-wave roadside topology, obstacle geometry and the blockage-type oracle.

Coordinates: x runs along the road, y across it. Node 0 sits at the origin on
the south curb (y=0); odd-indexed nodes sit on the north curb (y=d_w).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple

Point = Tuple[float, float]

# tolerance (degrees) for the strict interference-free inequality
ANGLE_EPS_DEG = 1e-9


class InvalidGeometry(ValueError):
    pass


class Side(str, enum.Enum):
    SOUTH = "south"
    NORTH = "north"


class LinkKind(str, enum.Enum):
    ORIGINAL = "original"
    SKIP_ONE = "skip_one"
    SKIP_TWO = "skip_two"


class BlockageType(enum.IntEnum):
    I = 1
    II = 2
    III = 3
    IV = 4

    def __str__(self) -> str:
        return self.name


_KIND_BY_SPAN = {1: LinkKind.ORIGINAL, 2: LinkKind.SKIP_ONE, 3: LinkKind.SKIP_TWO}


@dataclass(frozen=True, order=True)
class Link:
    """Directed hop ``e_{src,dst}`` with ``src < dst``.

    Equality and ordering only look at the endpoints, so ``Link(3, 5)`` built
    without a segment compares equal to the one stored in a Topology.
    """

    src: int
    dst: int
    segment: Optional[Tuple[Point, Point]] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.dst - self.src not in _KIND_BY_SPAN:
            raise InvalidGeometry(f"no link kind spans {self.src}->{self.dst}")

    @property
    def kind(self) -> LinkKind:
        return _KIND_BY_SPAN[self.dst - self.src]

    @property
    def span(self) -> int:
        return self.dst - self.src

    def __str__(self) -> str:
        return f"e{self.src},{self.dst}"


@dataclass(frozen=True)
class TopologyConfig:
    road_width: float
    road_length: float
    theta: float  # degrees
    phi: float  # beamwidth, degrees
    slot: int = 100  # T_s in ticks
    control_slot: int = 1  # T_s' in ticks
    delta: Optional[int] = None  # detection window; defaults to 16 * control_slot

    def __post_init__(self) -> None:
        if not (0.0 < self.theta < 90.0):
            raise InvalidGeometry(f"theta must lie in (0, 90) degrees, got {self.theta}")
        if not (0.0 < self.phi < 180.0):
            raise InvalidGeometry(f"phi must lie in (0, 180) degrees, got {self.phi}")
        if self.road_width <= 0 or self.road_length <= 0:
            raise InvalidGeometry("road dimensions must be positive")
        if self.slot <= 0 or self.control_slot <= 0:
            raise InvalidGeometry("slot lengths must be positive tick counts")
        if self.control_slot >= self.slot:
            raise InvalidGeometry("control slot must be shorter than the data slot")
        if self.delta is not None and self.delta <= 0:
            raise InvalidGeometry("delta must be positive")

    @property
    def detection_interval(self) -> int:
        return self.delta if self.delta is not None else 16 * self.control_slot

    @property
    def spacing(self) -> float:
        return self.road_width / math.tan(math.radians(self.theta))


@dataclass(frozen=True)
class Node:
    index: int
    x: float
    y: float
    side: Side

    @property
    def position(self) -> Point:
        return (self.x, self.y)


@dataclass(frozen=True)
class Topology:
    config: TopologyConfig
    nodes: Tuple[Node, ...]
    d_0: float
    original_links: Tuple[Link, ...]
    alternative_links: Tuple[Link, ...]

    @property
    def N(self) -> int:
        return len(self.nodes)

    @property
    def links(self) -> Tuple[Link, ...]:
        return self.original_links + self.alternative_links

    def has_node(self, i: int) -> bool:
        return 0 <= i < len(self.nodes)

    def has_link(self, i: int, j: int) -> bool:
        return self.has_node(i) and self.has_node(j) and 1 <= j - i <= 3

    def link(self, i: int, j: int) -> Link:
        if i > j:
            i, j = j, i
        if not self.has_link(i, j):
            raise KeyError(f"no link e{i},{j} in a {self.N}-node topology")
        return Link(i, j, (self.nodes[i].position, self.nodes[j].position))


def build_topology(config: TopologyConfig) -> Topology:
    d_0 = config.spacing
    # tolerate float noise such as tan(45 deg) = 0.9999999999999999
    n = int(math.floor(config.road_length / d_0 + 1e-9)) + 1
    if n < 2:
        raise InvalidGeometry(
            f"road of length {config.road_length} fits fewer than two nodes at spacing {d_0:.3f}"
        )
    nodes = tuple(
        Node(k, k * d_0, 0.0 if k % 2 == 0 else config.road_width,
             Side.SOUTH if k % 2 == 0 else Side.NORTH)
        for k in range(n)
    )

    def mk(i: int, j: int) -> Link:
        return Link(i, j, (nodes[i].position, nodes[j].position))

    original = tuple(mk(k, k + 1) for k in range(n - 1))
    alternative = tuple(
        mk(k, k + s) for k in range(n) for s in (2, 3) if k + s < n
    )
    return Topology(config, nodes, d_0, original, alternative)


def interference_free_margin(theta: float, phi: float) -> Tuple[float, bool]:
    """Angular gap between the hop and the skip-two diagonal, and whether it clears phi/2."""
    if not (0.0 < theta < 90.0):
        raise InvalidGeometry(f"theta must lie in (0, 90) degrees, got {theta}")
    t = math.radians(theta)
    margin = theta - math.degrees(math.atan(math.tan(t) / 3.0))
    return margin, margin > phi / 2.0 + ANGLE_EPS_DEG


@dataclass(frozen=True)
class Obstacle:
    center: Point
    radius: float
    appear_time: int = 0

    def __post_init__(self) -> None:
        if self.radius < 0:
            raise InvalidGeometry(f"obstacle radius must be >= 0, got {self.radius}")


def segment_disk_distance(p: Point, q: Point, c: Point) -> float:
    """Euclidean distance from point c to the closed segment pq."""
    px, py = p
    dx, dy = q[0] - px, q[1] - py
    length2 = dx * dx + dy * dy
    if length2 == 0.0:
        return math.hypot(c[0] - px, c[1] - py)
    t = ((c[0] - px) * dx + (c[1] - py) * dy) / length2
    t = min(1.0, max(0.0, t))
    return math.hypot(c[0] - (px + t * dx), c[1] - (py + t * dy))


def check_obstacle(topology: Topology, obstacle: Obstacle) -> None:
    x, y = obstacle.center
    cfg = topology.config
    if not (0.0 <= x <= cfg.road_length and 0.0 <= y <= cfg.road_width):
        raise InvalidGeometry(f"obstacle center {obstacle.center} lies outside the road")


def blocked_links(topology: Topology, obstacle: Obstacle) -> frozenset:
    check_obstacle(topology, obstacle)
    return frozenset(
        link for link in topology.links
        if segment_disk_distance(*link.segment, obstacle.center) <= obstacle.radius
    )


def blocked_by_all(topology: Topology, obstacles: Iterable[Obstacle]) -> frozenset:
    out: frozenset = frozenset()
    for ob in obstacles:
        out |= blocked_links(topology, ob)
    return out


# --- blockage-type decomposition -------------------------------------------


@dataclass(frozen=True)
class VerdictEntry:
    type: BlockageType
    node: int
    evidence: frozenset

    def key(self) -> Tuple[BlockageType, int]:
        return (self.type, self.node)


@dataclass(frozen=True)
class BlockageVerdict:
    entries: Tuple[VerdictEntry, ...] = ()
    residual: frozenset = frozenset()

    def keys(self) -> frozenset:
        return frozenset(e.key() for e in self.entries)

    @property
    def is_single(self) -> bool:
        return len(self.entries) == 1

    def summary(self) -> str:
        if not self.entries:
            return "none"
        return "+".join(f"{e.type}@{e.node}" for e in sorted(self.entries, key=VerdictEntry.key))


def region_links(k: int) -> dict:
    """Named candidate links around the hop e_{k,k+1}.

    adj_left  e_{k,k+3}   diagonal next to the hop at N_k
    curb_left e_{k,k+2}   same-curb bypass out of N_k
    adj_right e_{k-2,k+1} diagonal next to the hop at N_{k+1}
    curb_right e_{k-1,k+1} same-curb bypass into N_{k+1}
    crossing  e_{k-1,k+2} crosses the hop at mid-road
    """
    return {
        "adj_left": (k, k + 3),
        "curb_left": (k, k + 2),
        "adj_right": (k - 2, k + 1),
        "curb_right": (k - 1, k + 1),
        "crossing": (k - 1, k + 2),
    }


def decompose_region(k: int, blocked: dict) -> list:
    """Type decomposition for one blocked hop e_{k,k+1}.

    ``blocked`` maps each existing region link name to True/False; names of
    links that fall off the road ends are absent. Returns (type, node, names).
    """
    out = []
    for side, node in (("left", k), ("right", k + 1)):
        present = [n for n in (f"adj_{side}", f"curb_{side}") if n in blocked]
        hit = [n for n in present if blocked[n]]
        if present and len(hit) == len(present):
            out.append((BlockageType.IV, node, hit))
        elif hit:
            out.append((BlockageType.II, node, hit))
    if blocked.get("crossing"):
        out.append((BlockageType.III, k, ["crossing"]))
    if not out:
        out.append((BlockageType.I, k, []))
    return out


def classify_oracle(topology: Topology, blocked: Iterable[Link]) -> BlockageVerdict:
    """Ground-truth decomposition of a geometric blocked-link set into Types I-IV."""
    blocked = {Link(l.src, l.dst) for l in blocked}
    originals = sorted(l for l in blocked if l.span == 1)
    merged: dict = {}
    order: list = []
    claimed: set = set()
    for hop in originals:
        k = hop.src
        names = {
            name: Link(*ij) in blocked
            for name, ij in region_links(k).items()
            if topology.has_link(*ij)
        }
        links_by_name = {name: Link(*region_links(k)[name]) for name in names}
        for i, (btype, node, used) in enumerate(decompose_region(k, names)):
            ev = {links_by_name[n] for n in used}
            if i == 0:
                ev.add(hop)
            ev -= claimed
            claimed |= ev
            key = (btype, node)
            if key not in merged:
                merged[key] = set()
                order.append(key)
            merged[key] |= ev
    entries = tuple(VerdictEntry(t, n, frozenset(merged[(t, n)])) for t, n in order)
    residual = frozenset(blocked - claimed)
    return BlockageVerdict(entries, residual)
