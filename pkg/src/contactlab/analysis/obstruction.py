"""Upper bounds on the spin-flip rate a stationary contact process could dominate.

If the process on a ball ``B(n)`` observed over a time span ``T`` dominated a
spin-flip process with up-rate ``alpha``, the all-zero probability on
``B(n) x [0, T]`` would be at most ``exp(-alpha |B(n)| T)``. Forcing all of
``B(n)`` to zero at time 0 and switching off the arrows entering ``B(n)``
from its outer shell gives the lower bound
``nu0^|B(n)| * exp(-lam * d_max * |B(n+1) \\ B(n)| * T)``. Comparing the two
bounds gives ``alpha_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from ..io import csv_text
from ..stats import Estimate
from ..topology import ball_sizes, build_topology


class DegenerateMarginal(ValueError):
    """The zero-marginal estimate is 0 or 1, so the bound is meaningless."""


def alpha_max(ball: int, shell: int, lam: float, d_max: int, T: float, nu0: float,
              gamma: float = 1.0) -> float:
    if not 0.0 < nu0 <= 1.0:
        raise DegenerateMarginal(f"zero marginal {nu0} outside (0, 1]")
    if T <= 0:
        raise ValueError("T must be > 0")
    if math.isinf(T):
        return lam * d_max * shell / (gamma * ball)
    return (ball * -math.log(nu0) + lam * d_max * shell * T) / (gamma * ball * T)


def alpha_limit(ball: int, shell: int, lam, d_max: int, gamma=1) -> Fraction:
    """Exact large-``T`` limit ``lam d_max |shell| / |B(n)|`` as a fraction."""
    return Fraction(lam).limit_denominator(10**9) * d_max * shell / (Fraction(gamma) * ball)


@dataclass(frozen=True)
class ObstructionRow:
    n: int
    T: float
    ball: int
    shell: int
    alpha: float
    alpha_lo: float
    alpha_hi: float

    def as_tuple(self) -> tuple:
        return (self.n, self.T, self.ball, self.shell, self.alpha, self.alpha_lo, self.alpha_hi)


def obstruction_table(lam: float, ns: Sequence[int], Ts: Sequence[float], nu0: Estimate | float,
                      d: int = 1) -> list[ObstructionRow]:
    """``alpha_max(n, T)`` on ``Z^d``; interval columns use the ``nu0`` interval ends
    (a larger zero-marginal gives a smaller bound)."""
    if isinstance(nu0, Estimate):
        point, lo, hi = nu0.value, nu0.lo, nu0.hi
    else:
        point = lo = hi = float(nu0)
    if point <= 0.0 or point >= 1.0 or lo <= 0.0:
        raise DegenerateMarginal(f"zero marginal estimate {point} (lower end {lo}) is degenerate")
    r = max(ns) + 1
    top = build_topology("lattice", {"d": d, "R": r})
    sizes = ball_sizes(top, r)
    d_max = top.max_degree
    rows = []
    for n in ns:
        ball, shell = sizes[n], sizes[n + 1] - sizes[n]
        for T in Ts:
            rows.append(ObstructionRow(
                int(n), float(T), ball, shell,
                alpha_max(ball, shell, lam, d_max, T, point),
                alpha_max(ball, shell, lam, d_max, T, min(hi, 1.0)),
                alpha_max(ball, shell, lam, d_max, T, lo)))
    return rows


def table_csv(rows: Sequence[ObstructionRow]) -> str:
    return csv_text(["n", "T", "ball", "shell", "alpha_max", "alpha_lo", "alpha_hi"],
                    [r.as_tuple() for r in rows])


def is_decreasing(rows: Sequence[ObstructionRow]) -> bool:
    """Strictly decreasing in ``n`` at fixed ``T`` and in ``T`` at fixed ``n``."""
    table = {(r.n, r.T): r.alpha for r in rows}
    ns = sorted({r.n for r in rows})
    Ts = sorted({r.T for r in rows})
    ok = all(table[(a, T)] > table[(b, T)] for T in Ts for a, b in zip(ns, ns[1:]))
    return ok and all(table[(n, a)] > table[(n, b)] for n in ns for a, b in zip(Ts, Ts[1:]))
