"""Shared block-link table A_k."""

from __future__ import annotations

import enum
from typing import Dict, Iterator, Tuple

LinkKey = Tuple[int, int]


class LinkStatus(enum.IntEnum):
    # ordering doubles as the merge rank
    UNCHECKED = 0
    CLEAR = 1
    BLOCKED = 2

    def __str__(self) -> str:
        return {0: "0", 1: "1", 2: "inf"}[self.value]


class IllegalTransition(ValueError):
    pass


def candidate_links(k: int, N: int) -> list:
    """All e_{k+i,k+j} with -2<=i<=3, i+1<=j<=i+3 that exist in an N-node chain."""
    out = []
    for i in range(-2, 4):
        for j in range(i + 1, i + 4):
            a, b = k + i, k + j
            if 0 <= a and b < N:
                out.append((a, b))
    return out


class BlockLinkTable:
    """Tri-state evidence map. Statuses only ever increase in rank."""

    def __init__(self, k: int, N: int):
        self.k = k
        self.N = N
        self._status: Dict[LinkKey, LinkStatus] = {
            key: LinkStatus.UNCHECKED for key in candidate_links(k, N)
        }

    def __contains__(self, key: LinkKey) -> bool:
        return key in self._status

    def __getitem__(self, key: LinkKey) -> LinkStatus:
        return self._status[key]

    def __iter__(self) -> Iterator[LinkKey]:
        return iter(sorted(self._status))

    def __len__(self) -> int:
        return len(self._status)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BlockLinkTable):
            return NotImplemented
        return (self.k, self.N, self._status) == (other.k, other.N, other._status)

    def items(self):
        return sorted(self._status.items())

    def set(self, key: LinkKey, status: LinkStatus) -> bool:
        """Record ``status`` for ``key``; returns True if the entry changed.

        Keys outside the candidate set are ignored. Clear -> Blocked is allowed
        (the right-node reset), any downgrade raises.
        """
        if key not in self._status:
            return False
        old = self._status[key]
        if status == old:
            return False
        if status < old:
            raise IllegalTransition(f"{key}: {old.name} -> {status.name}")
        self._status[key] = status
        return True

    def merge(self, other: "BlockLinkTable") -> bool:
        changed = False
        for key, status in other._status.items():
            if key in self._status and status > self._status[key]:
                self._status[key] = status
                changed = True
        return changed

    def copy(self) -> "BlockLinkTable":
        t = BlockLinkTable.__new__(BlockLinkTable)
        t.k, t.N, t._status = self.k, self.N, dict(self._status)
        return t

    def effective(self, key: LinkKey) -> LinkStatus:
        """Status used for the final judgement: never-checked counts as blocked."""
        s = self._status[key]
        return LinkStatus.BLOCKED if s == LinkStatus.UNCHECKED else s

    def encode(self) -> str:
        return " ".join(f"e{a},{b}={s}" for (a, b), s in self.items())
