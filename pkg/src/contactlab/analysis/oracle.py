"""Exact transient law of the contact process on tiny graphs.

State ``s`` encodes the configuration with bit ``v`` set iff vertex ``v`` is
infected. Two independent routes are provided: the dense matrix exponential
(scaled squaring) and a uniformised jump-chain series.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import stats as sps

from .. import _kernels as K
from ..topology import GraphTopology

MAX_VERTICES = 12


@dataclass(frozen=True)
class ExactDistribution:
    n_vertices: int
    t: float
    probs: np.ndarray

    def prob(self, config) -> float:
        return float(self.probs[config_index(config)])

    def marginal(self, v: int) -> float:
        states = np.arange(self.probs.size)
        return float(self.probs[(states >> v) & 1 == 1].sum())


def config_index(config) -> int:
    return int(sum(1 << v for v, b in enumerate(np.asarray(config).tolist()) if b))


def generator(top: GraphTopology, lam: float) -> np.ndarray:
    n = top.n_vertices
    if n > MAX_VERTICES:
        raise ValueError(f"exact oracle limited to {MAX_VERTICES} vertices, got {n}")
    size = 1 << n
    states = np.arange(size)
    bits = (states[:, None] >> np.arange(n)) & 1
    Q = np.zeros((size, size))
    for v in range(n):
        nbrs = top.neighbors(v)
        infected_nbrs = bits[:, nbrs].sum(axis=1) if len(nbrs) else np.zeros(size, int)
        rate = np.where(bits[:, v] == 1, 1.0, lam * infected_nbrs)
        Q[states, states ^ (1 << v)] += rate
    Q[states, states] = -Q.sum(axis=1)
    return Q


def _initial(top, init) -> np.ndarray:
    p0 = np.zeros(1 << top.n_vertices)
    p0[config_index(init)] = 1.0
    return p0


def ctmc_oracle(top: GraphTopology, lam: float, init, t: float) -> ExactDistribution:
    Q = generator(top, lam)
    p = _initial(top, init) @ scipy.linalg.expm(Q * t)
    p = np.clip(p, 0.0, None)
    return ExactDistribution(top.n_vertices, float(t), p / p.sum())


def uniformized_oracle(top: GraphTopology, lam: float, init, t: float,
                       tol: float = 1e-16) -> ExactDistribution:
    """``sum_k Poisson(k; L t) p0 P^k`` with ``P = I + Q / L``."""
    Q = generator(top, lam)
    L = float(max(-Q.diagonal().min(), 1e-300))
    P = np.eye(Q.shape[0]) + Q / L
    kmax = int(sps.poisson.isf(tol, L * t)) + 10
    weights = sps.poisson.pmf(np.arange(kmax + 1), L * t)
    v = _initial(top, init)
    acc = weights[0] * v
    for k in range(1, kmax + 1):
        v = v @ P
        acc += weights[k] * v
    return ExactDistribution(top.n_vertices, float(t), acc)


def monte_carlo_counts(top: GraphTopology, lam: float, init, t: float, seed: int,
                       replicas: int, first: int = 0) -> np.ndarray:
    """Configuration histogram (indexed like :class:`ExactDistribution`) of
    ``replicas`` independent timelines evolved from ``init`` to time ``t``."""
    if top.n_vertices > MAX_VERTICES:
        raise ValueError("histogram limited to small graphs")
    return K.final_state_counts(top.n_vertices, top.esrc, top.edst, float(lam),
                                np.asarray(init, dtype=np.uint8), float(t), int(seed),
                                int(first), int(replicas))


def oracle_agreement(top: GraphTopology, lam: float, init, t: float, seed: int,
                     replicas: int) -> dict:
    """Per-configuration z-scores of Monte Carlo frequencies against the exact law."""
    exact = ctmc_oracle(top, lam, init, t)
    counts = monte_carlo_counts(top, lam, init, t, seed, replicas)
    freq = counts / replicas
    p = exact.probs
    se = np.sqrt(p * (1.0 - p) / replicas)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, (freq - p) / se, np.where(freq == p, 0.0, np.inf))
    return {"counts": counts, "exact": p, "z": z, "max_abs_z": float(np.abs(z).max())}
