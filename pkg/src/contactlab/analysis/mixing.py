"""Coupling-based cone-mixing curves.

Two contact processes on ``Z^d`` share one timeline: ``eta2`` starts from all
ones and ``eta1`` from independent density-``rho`` bits on the hyperplane
``x_d = 0`` (zero elsewhere). ``delta(s)`` is the probability that they
disagree at the origin at time ``s``. By translation invariance along the
hyperplane, the expected number of disagreements inside the cone
``{(x, s) : x_d = 0, |x| <= (s - t) tan(theta)}`` is
``Phi(t) = sum_s #{x : |x| <= (s - t) tan(theta)} * delta(s)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..harris import RngKey, evolve, generate_timeline, ones
from ..io import csv_text
from ..processes import bernoulli_sample
from ..stats import Estimate, LinearFit, log_linear_fit, proportion
from ..topology import build_topology, sublattice


def cone_count(d: int, radius: float) -> int:
    """Number of points of ``Z^(d-1)`` with Euclidean norm at most ``radius``."""
    if radius < 0:
        return 0
    if d == 1:
        return 1
    r = int(math.floor(radius + 1e-12))
    axis = np.arange(-r, r + 1)
    grids = np.meshgrid(*([axis] * (d - 1)), indexing="ij")
    sq = sum(g.astype(np.int64) ** 2 for g in grids)
    return int((sq <= radius * radius + 1e-9).sum())


def cone_sums(s_grid: Sequence[float], delta: Sequence[float], t_grid: Sequence[float],
              theta: float, d: int) -> np.ndarray:
    """``Phi(t)`` for each ``t``; only grid times ``s >= t`` contribute."""
    tan = math.tan(theta)
    out = []
    for t in t_grid:
        out.append(sum(cone_count(d, (s - t) * tan) * dl
                       for s, dl in zip(s_grid, delta) if s >= t - 1e-12))
    return np.array(out, dtype=float)


@dataclass(frozen=True)
class MixingCurve:
    lam: float
    T: float
    theta: float
    d: int
    radius: int
    rho_hat: float
    s_grid: np.ndarray
    delta: tuple                 # Estimate per grid time
    phi: np.ndarray              # Phi(t) for t = s_grid
    fit: LinearFit
    fit_range: tuple

    @property
    def delta_hat(self) -> np.ndarray:
        return np.array([e.value for e in self.delta])

    def phi_strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.phi) < 0))

    def csv(self) -> str:
        rows = [(float(s), e.value, e.lo, e.hi) for s, e in zip(self.s_grid, self.delta)]
        return csv_text(["s", "delta_hat", "ci_lo", "ci_hi"], rows)

    def phi_csv(self) -> str:
        return csv_text(["t", "phi_hat"], list(zip(self.s_grid.tolist(), self.phi.tolist())))

    def as_dict(self) -> dict:
        return {"lam": self.lam, "T": self.T, "theta": self.theta, "d": self.d,
                "radius": self.radius, "rho_hat": self.rho_hat,
                "s_grid": self.s_grid, "delta": [e.as_dict() for e in self.delta],
                "phi": self.phi, "fit": self.fit.as_dict(), "fit_range": list(self.fit_range),
                "phi_strictly_decreasing": self.phi_strictly_decreasing()}


def disagreement_counts(lam: float, rho_hat: float, s_grid: np.ndarray, d: int, radius: int,
                        seed: int, replicas: int, first: int = 0) -> np.ndarray:
    """Per grid time, the number of replicas with ``eta1(o) != eta2(o)``."""
    top = build_topology("lattice", {"d": d, "R": radius})
    plane = sublattice(top, 1)
    o = top.origin
    window = (0.0, float(s_grid[-1]))
    counts = np.zeros(len(s_grid), dtype=np.int64)
    for r in range(first, first + replicas):
        key = RngKey(seed, r)
        tl = generate_timeline(top, lam, window, key)
        top_traj = evolve(tl, ones(top))
        low_traj = evolve(tl, bernoulli_sample(rho_hat, plane, key))
        a = top_traj.states_at(s_grid, [o])[:, 0]
        b = low_traj.states_at(s_grid, [o])[:, 0]
        counts += a != b
    return counts


def cone_mixing_curve(lam: float, T: float, theta: float, n_steps: int, replicas: int,
                      rho_hat: float, seed: int, d: int = 2, radius: int = 20,
                      fit_range: tuple = (2.0, 12.0), level: float = 0.95) -> MixingCurve:
    """Estimate ``delta(s)`` on ``s = 0, T, .., n_steps T`` and the cone sums.

    ``rho_hat`` is meant to come from a prior all-zero curve on the same
    projection.
    """
    if not 0.0 < theta < math.pi / 2:
        raise ValueError("theta must lie in (0, pi/2)")
    if not 0.0 <= rho_hat <= 1.0:
        raise ValueError("rho_hat must lie in [0, 1]")
    s_grid = T * np.arange(n_steps + 1, dtype=float)
    counts = disagreement_counts(lam, rho_hat, s_grid, d, radius, seed, replicas)
    delta = tuple(proportion(int(c), replicas, level) for c in counts)
    values = np.array([e.value for e in delta])
    phi = cone_sums(s_grid, values, s_grid, theta, d)
    lo, hi = fit_range
    sel = (s_grid >= lo - 1e-12) & (s_grid <= hi + 1e-12)
    fit = log_linear_fit(s_grid[sel], values[sel])
    return MixingCurve(float(lam), float(T), float(theta), int(d), int(radius), float(rho_hat),
                       s_grid, delta, phi, fit, (float(lo), float(hi)))


def within_interval(est: Estimate, target: float) -> bool:
    return est.lo <= target <= est.hi
