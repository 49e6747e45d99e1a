"""Wire-level messages exchanged between nodes."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Tuple

from .table import BlockLinkTable, LinkKey

MULTICAST = -1


class Kind(str, enum.Enum):
    DATA = "DATA"
    ACK = "ACK"
    NACK = "NACK"
    STS = "STS"
    LUS = "LUS"
    LBS = "LBS"
    BTDP = "BTDP"
    DS = "DS"
    PRM = "PRM"
    TABLE = "TABLE"


class Mode(str, enum.Enum):
    DIRECTIONAL = "dir"
    OMNI = "omni"


@dataclass(frozen=True)
class DetectionOrder:
    slots: Tuple[Tuple[int, int], ...]  # (node, window start)
    interval: int

    def window(self, node: int) -> Optional[Tuple[int, int]]:
        for n, start in self.slots:
            if n == node:
                return (start, start + self.interval)
        return None

    @property
    def nodes(self) -> Tuple[int, ...]:
        return tuple(n for n, _ in self.slots)

    @property
    def end(self) -> int:
        return self.slots[-1][1] + self.interval


@dataclass(frozen=True)
class BtdpPayload:
    nid: int
    blid: LinkKey
    std: int
    dtl: int
    do: DetectionOrder

    @property
    def session(self) -> Tuple[int, int]:
        return (self.nid, self.std)

    @property
    def finish(self) -> int:
        return self.std + self.dtl


@dataclass(frozen=True)
class PrmPayload:
    nid: int
    std: int
    new_path: Tuple[LinkKey, ...]
    substitute: LinkKey
    bypassed: Tuple[int, ...] = ()
    reschedule: Optional[Tuple[Tuple[int, int], ...]] = None  # (node, slot parity)
    finish: int = 0  # STD + DTL of the originating detection

    @property
    def session(self) -> Tuple[int, int]:
        return (self.nid, self.std)

    @property
    def route(self) -> Tuple[int, ...]:
        return (self.new_path[0][0],) + tuple(b for _, b in self.new_path)

    def neighbours(self, node: int) -> Tuple[Optional[int], Optional[int]]:
        r = self.route
        if node not in r:
            return (None, None)
        i = r.index(node)
        return (r[i - 1] if i > 0 else None, r[i + 1] if i + 1 < len(r) else None)


@dataclass(frozen=True)
class Message:
    kind: Kind
    sender: int
    receiver: int
    mode: Mode = Mode.DIRECTIONAL
    seq: int = 0
    of: Optional[Kind] = None  # what an ACK acknowledges
    sts: bool = False  # stop-transmitting flag piggybacked on DATA/ACK
    btdp: Optional[BtdpPayload] = None
    prm: Optional[PrmPayload] = None
    table: Optional[BlockLinkTable] = None
    session: Optional[Tuple[int, int]] = None
    probe: bool = False  # BTDP sent as the first leg of a link probe, not along the chain
    targets: Tuple[int, ...] = ()  # multicast audience

    def summary(self) -> str:
        to = "*" if self.receiver == MULTICAST else str(self.receiver)
        s = f"{self.kind.value}"
        if self.kind == Kind.DATA:
            s += f"#{self.seq}"
        if self.of is not None:
            s += f"({self.of.value})"
        if self.sts:
            s += "+STS"
        return f"{s} {self.sender}->{to} {self.mode.value}"


def detection_order(k: int, N: int, std: int, delta: int) -> DetectionOrder:
    participants = [n for n in (k, k - 2, k - 1, k + 1, k + 2, k + 3) if 0 <= n < N]
    return DetectionOrder(tuple((n, std + i * delta) for i, n in enumerate(participants)), delta)


def default_dtl(delta: int, control_slot: int) -> int:
    return 6 * delta + 2 * control_slot


def make_btdp(k: int, t0: int, npt: int, control_slot: int, delta: int, N: int,
              dtl: Optional[int] = None) -> BtdpPayload:
    std = t0 + npt + 2 * control_slot
    do = detection_order(k, N, std, delta)
    if dtl is None:
        dtl = default_dtl(delta, control_slot)
    if std + dtl < do.end:
        raise ValueError(f"dtl={dtl} ends before the last detection window ({do.end})")
    return BtdpPayload(nid=k, blid=(k, k + 1), std=std, dtl=dtl, do=do)
