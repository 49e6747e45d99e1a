"""Substitute-path choice after a judgement.

The full relay-path optimisation is out of scope; this picks a single
bypass link with a fixed priority so runs stay reproducible.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

from ..geometry import BlockageType, BlockageVerdict
from .messages import PrmPayload
from .table import BlockLinkTable, LinkKey, LinkStatus


class Unreachable(RuntimeError):
    def __init__(self, k: int, failed: Tuple[int, ...]):
        super().__init__(f"no clear bypass around e{k},{k + 1}")
        self.k = k
        self.failed = failed


def bypass_candidates(k: int, N: int) -> list:
    """Links e_{a,b} with k-2<=a<=k<k+1<=b<=k+3 that jump over the blocked hop."""
    out = []
    for a in range(k - 2, k + 1):
        for b in range(k + 1, k + 4):
            if 2 <= b - a <= 3 and a >= 0 and b < N:
                out.append((a, b))
    return out


def _priority(k: int, link: LinkKey) -> tuple:
    a, b = link
    # keep the leader as the source when possible, then skip as few relays as we can
    return (k - a, b - a - 1, b)


def select_path(table: BlockLinkTable, k: int, verdict: BlockageVerdict,
                route: Optional[Sequence[int]] = None, std: int = 0) -> PrmPayload:
    N = table.N
    route = list(range(N)) if route is None else list(route)
    failed = tuple(sorted({e.node for e in verdict.entries if e.type == BlockageType.IV}))
    options = [
        link for link in bypass_candidates(k, N)
        if link in table
        and table[link] == LinkStatus.CLEAR
        and link[0] not in failed and link[1] not in failed
        and link[0] in route and link[1] in route
        and route.index(link[0]) < route.index(link[1])
    ]
    if not options:
        raise Unreachable(k, failed)
    a, b = min(options, key=lambda l: _priority(k, l))
    ia, ib = route.index(a), route.index(b)
    new_route = route[: ia + 1] + route[ib:]
    bypassed = tuple(sorted(set(route[ia + 1: ib]) | set(failed)))
    new_path = tuple(zip(new_route, new_route[1:]))

    old_phase = {n: i % 2 for i, n in enumerate(route)}
    changes = tuple(
        (n, i % 2) for i, n in enumerate(new_route) if i % 2 != old_phase[n]
    )
    return PrmPayload(
        nid=k,
        std=std,
        new_path=new_path,
        substitute=(a, b),
        bypassed=bypassed,
        reschedule=changes or None,
    )
