"""Binomial estimates, intervals and log-linear fits used by every estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps
from statsmodels.stats.proportion import proportion_confint


class InsufficientStatistics(RuntimeError):
    """Too few samples (or conditioning hits) for the requested estimate."""


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    lo: float
    hi: float
    hits: int
    n: int
    insufficient: bool = False

    def as_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "ci_lo": self.lo,
                "ci_hi": self.hi, "hits": self.hits, "n": self.n,
                "insufficient": self.insufficient}


def z_value(level: float) -> float:
    return float(sps.norm.ppf(0.5 + level / 2.0))


def proportion(hits: int, n: int, level: float = 0.95, min_n: int = 1) -> Estimate:
    """Frequency ``hits / n`` with a Wilson interval; flagged when ``n < min_n``."""
    hits, n = int(hits), int(n)
    if n < max(min_n, 1):
        return Estimate(math.nan, math.nan, 0.0, 1.0, hits, n, insufficient=True)
    p = hits / n
    lo, hi = proportion_confint(hits, n, alpha=1.0 - level, method="wilson")
    # the Wilson ends are exactly 0 at hits = 0 and 1 at hits = n; remove round-off
    lo = 0.0 if hits == 0 else float(lo)
    hi = 1.0 if hits == n else float(hi)
    return Estimate(p, math.sqrt(p * (1.0 - p) / n), lo, hi, hits, n)


def wilson_upper(hits, n, level: float = 0.95) -> np.ndarray:
    hits, n = np.asarray(hits), np.asarray(n)
    _, hi = proportion_confint(hits, n, alpha=1.0 - level, method="wilson")
    return np.where(hits == n, 1.0, np.asarray(hi, dtype=float))


def mean_estimate(values, level: float = 0.95) -> Estimate:
    values = np.asarray(values, dtype=float)
    n = values.size
    m = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    z = z_value(level)
    return Estimate(m, se, m - z * se, m + z * se, int(values.sum()), n)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    slope_stderr: float
    r_squared: float
    n_points: int

    def as_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "slope_stderr": self.slope_stderr, "r_squared": self.r_squared,
                "n_points": self.n_points}


def log_linear_fit(x, y) -> LinearFit:
    """Least-squares fit of ``log y`` against ``x``; nonpositive ``y`` are dropped."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = y > 0
    if keep.sum() < 3:
        return LinearFit(math.nan, math.nan, math.nan, math.nan, int(keep.sum()))
    res = sps.linregress(x[keep], np.log(y[keep]))
    return LinearFit(float(res.slope), float(res.intercept), float(res.stderr),
                     float(res.rvalue ** 2), int(keep.sum()))
