"""Survival mass and exponential tail of extinction times."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..stats import Estimate, LinearFit, log_linear_fit, proportion, z_value

MIN_FINITE = 50
MIN_TAIL_COUNT = 10


@dataclass(frozen=True)
class TailFit:
    n: int
    n_censored: int
    n_above: int                 # finite samples exceeding s0
    s0: float
    survival: Estimate           # censored fraction, the estimate of P(tau = inf)
    grid: np.ndarray
    tail: np.ndarray             # empirical P(s < tau < inf) on the grid
    fit: LinearFit | None
    level: float = 0.95

    @property
    def insufficient(self) -> bool:
        return self.fit is None

    @property
    def c_hat(self) -> float:
        return math.nan if self.fit is None else -self.fit.slope

    @property
    def C_hat(self) -> float:
        return math.nan if self.fit is None else math.exp(self.fit.intercept)

    @property
    def c_interval(self) -> tuple[float, float]:
        if self.fit is None:
            return (math.nan, math.nan)
        h = z_value(self.level) * self.fit.slope_stderr
        return (self.c_hat - h, self.c_hat + h)

    @property
    def passes(self) -> bool:
        return self.fit is not None and self.c_interval[0] > 0

    def as_dict(self) -> dict:
        lo, hi = self.c_interval
        return {"n": self.n, "n_censored": self.n_censored, "n_above_s0": self.n_above,
                "s0": self.s0, "epsilon_hat": self.survival.as_dict(),
                "c_hat": self.c_hat, "c_lo": lo, "c_hi": hi, "C_hat": self.C_hat,
                "r_squared": math.nan if self.fit is None else self.fit.r_squared,
                "insufficient": self.insufficient,
                "verdict": "PASS" if self.passes else "FAIL"}


def tail_fit(taus, s0: float = 2.0, horizon: float | None = None, n_points: int = 20,
             level: float = 0.95, min_finite: int = MIN_FINITE) -> TailFit:
    """Fit ``log P(s < tau < inf) ~ log C - c s`` for ``s >= s0``.

    ``taus`` uses ``inf`` for censored samples (and anything at or beyond
    ``horizon`` is treated as censored). The grid runs from ``s0`` to the
    point where only :data:`MIN_TAIL_COUNT` finite samples remain above it.
    """
    taus = np.asarray(taus, dtype=float)
    if horizon is not None:
        taus = np.where(taus >= horizon, np.inf, taus)
    n = taus.size
    finite = np.sort(taus[np.isfinite(taus)])
    n_cens = n - finite.size
    survival = proportion(n_cens, n, level)
    above = finite[finite > s0]
    if above.size < min_finite:
        return TailFit(n, n_cens, int(above.size), s0, survival, np.array([]), np.array([]),
                       None, level)
    s_max = above[-MIN_TAIL_COUNT]
    grid = np.linspace(s0, s_max, n_points)
    tail = (finite.size - np.searchsorted(finite, grid, side="right")) / n
    fit = log_linear_fit(grid, tail)
    return TailFit(n, n_cens, int(above.size), s0, survival, grid, tail, fit, level)
