"""Detection-phase rules: who probes what, how results land in A_k, and the final judgement."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Optional, Tuple

from ..geometry import BlockageType, BlockageVerdict, Link, VerdictEntry
from .table import BlockLinkTable, LinkKey, LinkStatus


class InconsistentTable(ValueError):
    pass


class RoleKind(str, enum.Enum):
    LEADER = "leader"
    LEFT = "left"
    RIGHT = "right"
    BYSTANDER = "bystander"


@dataclass(frozen=True)
class Role:
    kind: RoleKind
    offset: int = 0  # m for LEFT, n for RIGHT

    def __str__(self) -> str:
        if self.kind in (RoleKind.LEFT, RoleKind.RIGHT):
            return f"{self.kind.value}{self.offset}"
        return self.kind.value


def role_of(node: int, k: int) -> Role:
    d = node - k
    if d == 0:
        return Role(RoleKind.LEADER)
    if -2 <= d <= -1:
        return Role(RoleKind.LEFT, -d)
    if 1 <= d <= 3:
        return Role(RoleKind.RIGHT, d)
    return Role(RoleKind.BYSTANDER)


def adjacent_nodes(k: int, N: int) -> Tuple[int, ...]:
    return tuple(k + i for i in range(-2, 4) if i != 0 and 0 <= k + i < N)


def sub_links(node: int, N: int) -> Tuple[LinkKey, ...]:
    return tuple((node, node + j) for j in (2, 3) if node + j < N)


def tx_links(node: int, N: int) -> Tuple[LinkKey, ...]:
    return tuple((node, node + j) for j in (1, 2, 3) if node + j < N)


def probe_links(node: int, role: Role, N: int) -> Tuple[LinkKey, ...]:
    if role.kind in (RoleKind.LEADER, RoleKind.LEFT):
        return sub_links(node, N)
    if role.kind == RoleKind.RIGHT:
        return tx_links(node, N)
    return ()


def record_outcomes(table: BlockLinkTable, outcomes: Mapping[LinkKey, Optional[bool]]) -> None:
    """True = handshake completed, False = it failed, None = never attempted (window overflow)."""
    for key, ok in outcomes.items():
        if ok is None:
            continue
        table.set(key, LinkStatus.CLEAR if ok else LinkStatus.BLOCKED)


def leader_detection_step(table: BlockLinkTable, k: int, outcomes: Mapping[LinkKey, Optional[bool]]) -> BlockLinkTable:
    """Fold the leader's own probe results (plus the onset evidence) into a fresh copy of A_k."""
    out = table.copy()
    out.set((k, k + 1), LinkStatus.BLOCKED)
    record_outcomes(out, outcomes)
    return out


def left_node_detection_step(table: BlockLinkTable, node: int, outcomes: Mapping[LinkKey, Optional[bool]]) -> BlockLinkTable:
    out = table.copy()
    record_outcomes(out, outcomes)
    return out


def right_node_detection_step(table: BlockLinkTable, node: int, outcomes: Mapping[LinkKey, Optional[bool]]) -> BlockLinkTable:
    """Record probes; a node whose every TX link failed marks all links into it blocked.

    A node with no TX links at all (the terminal BS) never triggers the reset.
    """
    out = table.copy()
    record_outcomes(out, outcomes)
    tried = [ok for ok in outcomes.values() if ok is not None]
    if outcomes and len(tried) == len(outcomes) and not any(tried):
        for j in (1, 2, 3):
            out.set((node - j, node), LinkStatus.BLOCKED)
    return out


def classify_from_table(table: BlockLinkTable, k: int) -> BlockageVerdict:
    """Judge the blockage type around e_{k,k+1} from the merged A_k.

    Unchecked links count as blocked. Links that do not exist near the road
    ends are simply left out of the judgement.
    """
    hop = (k, k + 1)
    if hop not in table:
        raise InconsistentTable(f"table has no entry for the blocked hop e{k},{k + 1}")
    if table.effective(hop) != LinkStatus.BLOCKED:
        raise InconsistentTable(f"e{k},{k + 1} is clear in A_{k}, contradicting the onset")

    def inf(key: LinkKey) -> bool:
        return key in table and table.effective(key) == LinkStatus.BLOCKED

    found = []
    # TX side of N_k: e_{k,k+2}, e_{k,k+3};  RX side of N_{k+1}: e_{k-1,k+1}, e_{k-2,k+1}
    for node, keys in ((k, [(k, k + 2), (k, k + 3)]), (k + 1, [(k - 1, k + 1), (k - 2, k + 1)])):
        present = [key for key in keys if key in table]
        dead = [key for key in present if inf(key)]
        if present and dead == present:
            found.append((BlockageType.IV, node, dead))
        elif dead:
            found.append((BlockageType.II, node, dead))
    if inf((k - 1, k + 2)):
        found.append((BlockageType.III, k, [(k - 1, k + 2)]))
    if not found:
        found.append((BlockageType.I, k, []))

    entries = []
    for i, (btype, node, keys) in enumerate(found):
        ev = {Link(a, b) for a, b in keys}
        if i == 0:
            ev.add(Link(*hop))
        entries.append(VerdictEntry(btype, node, frozenset(ev)))
    return BlockageVerdict(tuple(entries))
