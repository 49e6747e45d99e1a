from __future__ import annotations

import math


def compute_npt(k: int, N: int, slot: int) -> int:
    """Nodes preparation time for leader ``k`` in an ``N``-node chain, in ticks.

    Index 0 uses the source case, the last two indices the tail case and every
    other index the max of the left and right drain times.
    """
    if N < 2:
        raise ValueError(f"need at least two nodes, got N={N}")
    if not 0 <= k <= N - 1:
        raise IndexError(f"node index {k} out of range for N={N}")
    left = math.ceil(k / 2) * 2 - 1
    if k == 0:
        return (N - 2) * slot
    if k >= N - 2:
        return left * slot
    return max(left, N - k - 2) * slot
