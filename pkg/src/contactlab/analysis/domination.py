"""Statistical checks of domination by a Bernoulli product measure.

All conditioning is done by rejection: only samples that satisfy the
conditioning event are used, and too few of them is reported, never hidden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..io import csv_text
from ..stats import Estimate, InsufficientStatistics, proportion, wilson_upper, z_value

MIN_SAMPLES = 1000
MIN_HITS = 200


@dataclass(frozen=True)
class DominationReport:
    n_samples: int
    counts: np.ndarray       # samples all zero on the first n sites, n = 1..n_max
    p_hat: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    rho_hat: float           # from the upper interval ends (conservative)
    rho_point: float         # from the point estimates
    level: float

    @property
    def verdict(self) -> bool:
        n = np.arange(1, len(self.p_hat) + 1)
        return bool(self.rho_hat > 0 and np.all(self.ci_hi <= (1.0 - self.rho_hat) ** n + 1e-15))

    def csv(self) -> str:
        rows = [(n + 1, p, lo, hi) for n, (p, lo, hi) in
                enumerate(zip(self.p_hat, self.ci_lo, self.ci_hi))]
        return csv_text(["n", "p_hat", "ci_lo", "ci_hi"], rows)

    def as_dict(self) -> dict:
        return {"n_samples": self.n_samples, "counts": self.counts, "p_hat": self.p_hat,
                "ci_lo": self.ci_lo, "ci_hi": self.ci_hi, "rho_hat": self.rho_hat,
                "rho_point": self.rho_point, "level": self.level,
                "verdict": "PASS" if self.verdict else "FAIL"}


def allzero_curve(samples: np.ndarray, n_max: int | None = None, level: float = 0.95,
                  min_samples: int = MIN_SAMPLES) -> DominationReport:
    """Frequencies of ``{Y_1 = .. = Y_n = 0}`` for ``n = 1 .. n_max``.

    ``samples`` is ``[replica, index]``. The implied density is
    ``1 - max_n p_n^(1/n)``; ``rho_hat`` uses the upper Wilson ends.
    """
    samples = np.asarray(samples)
    N, width = samples.shape
    n_max = width if n_max is None else n_max
    if n_max > width:
        raise InsufficientStatistics(f"samples have {width} columns, need {n_max}")
    if N < min_samples:
        raise InsufficientStatistics(f"{N} samples < {min_samples} required")
    zero_prefix = np.cumprod(samples[:, :n_max] == 0, axis=1)
    counts = zero_prefix.sum(axis=0).astype(np.int64)
    p_hat = counts / N
    los, his = [], []
    for c in counts:
        e = proportion(c, N, level)
        los.append(e.lo)
        his.append(e.hi)
    ci_lo, ci_hi = np.array(los), np.array(his)
    n = np.arange(1, n_max + 1)
    rho_hat = max(0.0, 1.0 - float(np.max(ci_hi ** (1.0 / n))))
    rho_point = max(0.0, 1.0 - float(np.max(p_hat ** (1.0 / n))))
    return DominationReport(N, counts, p_hat, ci_lo, ci_hi, rho_hat, rho_point, level)


def conditional_criterion(samples: np.ndarray, zeros: Sequence[int], ones: Sequence[int],
                          target: int, level: float = 0.95,
                          min_hits: int = MIN_HITS) -> Estimate:
    """Frequency of ``target == 1`` among samples that are 0 on ``zeros`` and
    1 on ``ones`` (column indices). Flagged insufficient below ``min_hits``."""
    samples = np.asarray(samples)
    keep = np.ones(len(samples), dtype=bool)
    if len(zeros):
        keep &= (samples[:, list(zeros)] == 0).all(axis=1)
    if len(ones):
        keep &= (samples[:, list(ones)] == 1).all(axis=1)
    hits = int(keep.sum())
    return proportion(int(samples[keep, target].sum()), hits, level, min_n=min_hits)


@dataclass(frozen=True)
class CovarianceRow:
    x: int
    y: int
    zeros: tuple
    cov: float
    stderr: float
    hits: int
    insufficient: bool

    def passes(self, k: float = 3.0) -> bool:
        return self.insufficient or self.cov >= -k * self.stderr

    def as_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "zeros": list(self.zeros), "cov": self.cov,
                "stderr": self.stderr, "hits": self.hits, "insufficient": self.insufficient}


def conditional_covariance(samples: np.ndarray, x: int, y: int, zeros: Sequence[int],
                           min_hits: int = MIN_HITS) -> CovarianceRow:
    samples = np.asarray(samples)
    keep = np.ones(len(samples), dtype=bool)
    if len(zeros):
        keep &= (samples[:, list(zeros)] == 0).all(axis=1)
    hits = int(keep.sum())
    if hits < min_hits:
        return CovarianceRow(x, y, tuple(zeros), math.nan, math.nan, hits, True)
    a = samples[keep, x].astype(float)
    b = samples[keep, y].astype(float)
    prod = (a - a.mean()) * (b - b.mean())
    cov = float(prod.sum() / (hits - 1))
    se = float(prod.std(ddof=1) / math.sqrt(hits))
    return CovarianceRow(x, y, tuple(zeros), cov, se, hits, False)


def dfkg_test(samples: np.ndarray, triples, k: float = 3.0,
              min_hits: int = MIN_HITS) -> tuple[list[CovarianceRow], bool]:
    """Conditional covariances of coordinate pairs given zeros; passes when none
    is below ``-k`` standard errors. Starved rows are kept and flagged."""
    rows = [conditional_covariance(samples, x, y, zs, min_hits) for x, y, zs in triples]
    return rows, all(r.passes(k) for r in rows)


def ci_excludes_zero(est: Estimate) -> bool:
    return not est.insufficient and est.lo > 0


def at_least(est: Estimate, bound: float, k: float = 2.0) -> bool:
    return not est.insufficient and est.value >= bound - k * est.stderr


__all__ = ["DominationReport", "allzero_curve", "conditional_criterion", "dfkg_test",
           "conditional_covariance", "CovarianceRow", "wilson_upper", "z_value",
           "ci_excludes_zero", "at_least"]
