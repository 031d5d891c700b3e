"""Conditional zero-run surface ``f(t, u) = P(0 on [0, t) | 0 on [-u, 0))`` at one site.

Input is one ``(back, fwd)`` pair of zero-run lengths around time 0 per
stationary replica; conditioning is by rejection on ``back >= u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..io import csv_text
from ..stats import Estimate, proportion

MIN_HITS = 200


@dataclass(frozen=True)
class FSurface:
    t_grid: np.ndarray
    u_grid: np.ndarray
    estimates: tuple          # estimates[i][j] for (t_grid[i], u_grid[j])
    n_samples: int

    @property
    def values(self) -> np.ndarray:
        return np.array([[e.value for e in row] for row in self.estimates])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([[e.stderr for e in row] for row in self.estimates])

    @property
    def starved(self) -> bool:
        return any(e.insufficient for row in self.estimates for e in row)

    def monotone_violations(self, k: float = 2.0) -> list[tuple]:
        """Pairs ``u1 < u2`` with ``f(t, u2) < f(t, u1) - k * stderr``."""
        f, se = self.values, self.stderrs
        out = []
        for i, t in enumerate(self.t_grid):
            for a in range(len(self.u_grid)):
                for b in range(a + 1, len(self.u_grid)):
                    tol = k * math.hypot(se[i, a], se[i, b])
                    if f[i, b] < f[i, a] - tol:
                        out.append((float(t), float(self.u_grid[a]), float(self.u_grid[b])))
        return out

    def submultiplicativity(self) -> list[dict]:
        """``f(t+s, u)`` against ``f(t, u) f(s, u+t)`` wherever the grids allow."""
        ti = {float(t): i for i, t in enumerate(self.t_grid)}
        ui = {float(u): j for j, u in enumerate(self.u_grid)}
        f = self.values
        rows = []
        for t in ti:
            for s in ti:
                for u in ui:
                    if t + s in ti and u + t in ui and t > 0 and s > 0:
                        lhs = f[ti[t + s], ui[u]]
                        rhs = f[ti[t], ui[u]] * f[ti[s], ui[u + t]]
                        rows.append({"t": t, "s": s, "u": u, "lhs": lhs, "rhs": rhs})
        return rows

    def csv(self) -> str:
        rows = [(float(t), float(u), e.value, e.lo, e.hi, e.hits, e.n)
                for t, row in zip(self.t_grid, self.estimates)
                for u, e in zip(self.u_grid, row)]
        return csv_text(["t", "u", "f_hat", "ci_lo", "ci_hi", "hits", "n"], rows)


def f_surface(back, fwd, t_grid, u_grid, level: float = 0.95,
              min_hits: int = MIN_HITS) -> FSurface:
    back = np.asarray(back, dtype=float)
    fwd = np.asarray(fwd, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    u_grid = np.asarray(u_grid, dtype=float)
    est = []
    for t in t_grid:
        row = []
        for u in u_grid:
            cond = back >= u
            row.append(proportion(int((cond & (fwd >= t)).sum()), int(cond.sum()), level,
                                  min_n=min_hits))
        est.append(tuple(row))
    return FSurface(t_grid, u_grid, tuple(est), int(back.size))


def zero_run_curve(fwd, t_grid, level: float = 0.95) -> list[Estimate]:
    """Unconditional ``P(0 on [0, t))`` along ``t_grid``."""
    fwd = np.asarray(fwd, dtype=float)
    return [proportion(int((fwd >= t).sum()), fwd.size, level) for t in t_grid]
