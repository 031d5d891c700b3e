"""Backward-depth renewal bookkeeping for all-zero events on a time grid.

For grid points ``(x_i, T i)``, ``D_i`` is the smallest ``l >= 1`` such that no
backward path from ``(x_i, T i)`` reaches time ``T (i - l)``; it is infinite
exactly when ``x_i`` is infected at ``T i``. Starting from ``tau_0 = 0`` the
recursion ``tau_{j+1} = tau_j + D_{n - tau_j}`` jumps down through the grid,
and every all-zero realisation ends with ``tau_K >= n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..harris import EventTimeline, backward_death_time


@dataclass(frozen=True)
class RenewalRecord:
    xs: tuple
    T: float
    depths: tuple            # D_1 .. D_n, math.inf when the path reaches the window start
    taus: tuple              # tau_0, tau_1, ..., tau_K
    K: int
    reached: bool            # tau_K >= n; the recursion stops there
    probe_depth: tuple = field(default=())  # grid layers available below each point

    @property
    def n(self) -> int:
        return len(self.depths)

    @property
    def censored(self) -> tuple:
        """Indices whose infinite depth only means "reached the window start"."""
        return tuple(i + 1 for i, d in enumerate(self.depths) if d == math.inf)


def renewal_from_depths(depths: Sequence[float], n: int | None = None):
    """Run the recursion on ``depths[0] = D_1 .. depths[n-1] = D_n``.

    Returns ``(taus, K, reached)``. Once ``tau_j >= n`` the event ``tau_K >= n``
    is decided and the recursion is not continued, so ``K`` is then a lower bound.
    """
    n = len(depths) if n is None else n
    taus = [0]
    while True:
        cur = taus[-1]
        if cur >= n:
            return tuple(taus), len(taus) - 1, True
        d = depths[n - cur - 1]
        if d == math.inf:
            return tuple(taus), len(taus) - 1, False
        taus.append(cur + int(d))


def depth_from_death(death: float, i: int, T: float) -> float:
    """``min{l >= 1 : T (i - l) < death}``; ``inf`` when ``death`` is ``-inf``."""
    if death == -math.inf:
        return math.inf
    return float(math.floor((T * i - death) / T) + 1)


def backward_depths(timeline: EventTimeline, xs: Sequence[int], T: float,
                    offset: int = 0) -> list[float]:
    """``D_i`` for the points ``(xs[i-1], T (i + offset))``, ``i = 1 .. len(xs)``."""
    out = []
    for i, x in enumerate(xs, start=1):
        j = i + offset
        death = backward_death_time(timeline, int(x), T * j)
        out.append(depth_from_death(death, j, T))
    return out


def renewal_extract(timeline: EventTimeline, xs: Sequence[int], T: float) -> RenewalRecord:
    if T <= 0:
        raise ValueError("T must be > 0")
    n = len(xs)
    t0, t1 = timeline.window
    if T * n > t1 or T > t1 or t0 > T:
        raise ValueError("grid times T, 2T, .., nT must lie in the timeline window")
    depths = backward_depths(timeline, xs, T)
    taus, K, reached = renewal_from_depths(depths)
    probe = tuple(int(math.floor((T * i - t0) / T)) for i in range(1, n + 1))
    return RenewalRecord(tuple(int(x) for x in xs), float(T), tuple(depths), taus, K,
                         reached, probe)


def tail_event_counts(depth_matrix: np.ndarray, n_max: int) -> np.ndarray:
    """For each ``n <= n_max``, how many rows give ``tau_K >= n``.

    Row ``r`` holds ``D_1 .. D_{n_max}`` of one replica; the record for ``n``
    reads its first ``n`` entries.
    """
    counts = np.zeros(n_max, dtype=np.int64)
    for row in np.asarray(depth_matrix, dtype=float):
        for n in range(1, n_max + 1):
            counts[n - 1] += renewal_from_depths(row[:n])[2]
    return counts
