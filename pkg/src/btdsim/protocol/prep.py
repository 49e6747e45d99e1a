"""Preparation-phase rules: blockage onset and the previous-link decision table."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Tuple

from .messages import Kind
from .table import LinkKey

MAX_ATTEMPTS = 3  # one transmission plus two retransmissions


def detect_blockage_onset(replies: Sequence[Optional[Kind]], slot_end: int) -> Optional[int]:
    """Return the onset time (the slot end) unless an ACK came back within the attempt budget.

    ``replies`` holds what the transmitter heard after each attempt (ACK, NACK
    or None for silence); an empty sequence means nothing at all came back.
    """
    if any(reply == Kind.ACK for reply in replies[:MAX_ATTEMPTS]):
        return None
    return slot_end


def pair_links(k: int, r: int) -> Tuple[LinkKey, ...]:
    """Previous original links certified by row ``r``: e_{k-2r,k-2r+1} and e_{k-2r+1,k-2r+2}."""
    out = []
    for a in (k - 2 * r + 1, k - 2 * r):
        if a >= 0:
            out.append((a, a + 1))
    return tuple(out)


def decision_rows(k: int) -> int:
    return math.ceil(k / 2)


def row_offset(r: int, slot: int) -> int:
    """Time after t0 at which row ``r`` is decided."""
    return (2 * r - 1) * slot


@dataclass
class PrevLinkDecision:
    clear: set = field(default_factory=set)
    suspect: Tuple[LinkKey, ...] = ()  # one of these is blocked
    deferred: bool = False
    rows: int = 0


def decide_previous_links(k: int, receptions: Mapping[int, Optional[Kind]]) -> PrevLinkDecision:
    """Apply the previous-link decision table for leader ``k``.

    ``receptions[r]`` is the last frame heard from the upstream neighbour by
    t0 + (2r-1)*T_s: DATA or LUS confirm the r-th pair, None/LBS/STS means an
    upstream hop is down and the leader defers.
    """
    out = PrevLinkDecision()
    for r in range(1, decision_rows(k) + 1):
        heard = receptions.get(r)
        out.rows = r
        if heard in (Kind.DATA, Kind.LUS):
            out.clear.update(pair_links(k, r))
        else:
            out.suspect = pair_links(k, r)
            out.deferred = True
            break
    return out
