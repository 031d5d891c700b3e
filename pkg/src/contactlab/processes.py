"""Comparison processes built from, or alongside, a contact-process timeline.

The constrained tree process and the slab process read the *same* clocks as the
contact process they are compared with; they only ignore some arrows. That is
what makes ``xi <= eta`` and ``zeta <= eta`` exact, per-timeline statements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from .harris import (EventTimeline, Trajectory, _key, backward_death_time,
                     evolve, extinction_times, generate_spin_flip_timeline, ones)
from .io import csv_text
from .topology import (GraphTopology, TopologyError, VertexSubset, build_topology,
                       ray_ids, slab_ids, tree_delta)


@dataclass(frozen=True)
class SpinFlipParams:
    alpha: float

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")

    @property
    def rho(self) -> float:
        return self.alpha / (self.alpha + 1.0)


@dataclass(frozen=True)
class ProductMeasureParams:
    rho: float

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")

    def cylinder(self, n_ones: int, n_zeros: int) -> float:
        return self.rho ** n_ones * (1.0 - self.rho) ** n_zeros


def bernoulli_sample(rho: float, members: VertexSubset, rng_key) -> np.ndarray:
    """Independent density-``rho`` bits on ``members``, zero elsewhere."""
    ProductMeasureParams(rho)
    key = _key(rng_key)
    return K.bernoulli_bits(members.mask.size, members.members.astype(np.int64),
                            float(rho), key.seed, key.replica)


def spin_flip_evolve(top: GraphTopology, params: SpinFlipParams, init: np.ndarray,
                     window, rng_key) -> Trajectory:
    """Independent two-state dynamics per site: 1 -> 0 at rate 1, 0 -> 1 at rate alpha."""
    tl = generate_spin_flip_timeline(top, params.alpha, window, rng_key)
    return evolve(tl, init)


def _restrict(traj: Trajectory, mask: np.ndarray) -> Trajectory:
    keep = mask[traj.flip_vertices]
    init = np.where(mask, traj.initial, 0).astype(np.uint8)
    final = np.where(mask, traj.final, 0).astype(np.uint8)
    return Trajectory(traj.topology, traj.start, traj.stop, init, traj.flip_times[keep],
                      traj.flip_vertices[keep], traj.flip_values[keep], final)


def constrained_tree_process(timeline: EventTimeline, delta: VertexSubset | None = None) -> Trajectory:
    """For ``x`` in delta, 1 iff a backward path from ``(x, t)`` using only arrows
    along the ray of ``x`` reaches the window start; 0 off delta.

    Computed forward: by duality it is the process from all ones at the window
    start with every arrow that leaves a ray suppressed.
    """
    top = timeline.topology
    expected = tree_delta(top)
    if delta is not None and not np.array_equal(delta.mask, expected.mask):
        raise TopologyError("delta must be the tree delta set of the timeline topology")
    traj = evolve(timeline, ones(top), groups=ray_ids(top))
    return _restrict(traj, expected.mask)


def constrained_value(timeline: EventTimeline, x: int, t: float) -> int:
    """Point evaluation of the constrained tree process by backward search."""
    top = timeline.topology
    if not tree_delta(top).mask[x]:
        return 0
    return int(backward_death_time(timeline, x, t, groups=ray_ids(top)) == -math.inf)


def slab_process(timeline: EventTimeline, k: int, init: np.ndarray | None = None) -> Trajectory:
    """Process on Z^d with every arrow between different width-``k`` slabs removed."""
    top = timeline.topology
    if top.kind != "lattice" or top.coords.shape[1] < 2:
        raise TopologyError("slab process needs a lattice with d >= 2")
    init = ones(top) if init is None else init
    return evolve(timeline, init, groups=slab_ids(top, k))


def clock_sets(top: GraphTopology, groups: np.ndarray) -> dict[int, set]:
    """Clocks a group-restricted process reads, per group: its crosses and
    the arrows with both ends inside the group."""
    out: dict[int, set] = {}
    for v in range(top.n_vertices):
        out.setdefault(int(groups[v]), set()).add(("X", v))
    for u, w in zip(top.esrc.tolist(), top.edst.tolist()):
        if groups[u] == groups[w]:
            out[int(groups[u])].add(("A", u, w))
    return out


def slab_survival_scan(lam: float, ks: Sequence[int], horizon: float, replicas: int,
                       seed: int, d: int = 2, length: int = 60) -> list[dict]:
    """Survival frequency and tail fit of the extinction time from the origin of
    the slab ``{0..k-1}^(d-1) x [-length, length]`` for each width ``k``."""
    from .analysis.tails import tail_fit
    rows = []
    for k in ks:
        top = build_topology("slab", {"d": d, "k": int(k), "L": int(length)})
        taus = extinction_times(top, top.origin, lam, horizon, seed, replicas)
        fit = tail_fit(taus, horizon=horizon)
        rows.append({"k": int(k), "survival": fit.survival.as_dict(), "tail": fit.as_dict()})
    return rows


@dataclass(frozen=True)
class ProjectionGrid:
    vertices: np.ndarray
    T: float
    first: int
    last: int

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("grid step T must be > 0")
        if self.last < self.first:
            raise ValueError("empty time-index range")

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.first, self.last + 1)

    @property
    def times(self) -> np.ndarray:
        return self.indices * self.T


@dataclass(frozen=True)
class ProjectedLattice:
    grid: ProjectionGrid
    bits: np.ndarray  # [time index, vertex]

    def csv(self) -> str:
        rows = [(int(i), int(v), int(b))
                for i, row in zip(self.grid.indices, self.bits)
                for v, b in zip(self.grid.vertices, row)]
        return csv_text(["time_index", "vertex_id", "bit"], rows)

    def __le__(self, other: "ProjectedLattice") -> bool:
        return bool(np.all(self.bits <= other.bits))


def project(traj: Trajectory, grid: ProjectionGrid) -> ProjectedLattice:
    times = grid.times
    if times[0] < traj.start or times[-1] > traj.stop:
        raise ValueError("projection grid outside trajectory window")
    return ProjectedLattice(grid, traj.states_at(times, grid.vertices))


def max_block(bits: np.ndarray, partition: Sequence[Sequence[int]]) -> np.ndarray:
    """``Y[i, j] = max(bits[i, c] for c in partition[j])``; blocks index columns."""
    seen: set = set()
    for block in partition:
        if seen.intersection(block):
            raise ValueError("partition blocks must be disjoint")
        seen.update(block)
    bits = np.asarray(bits)
    return np.stack([bits[:, list(b)].max(axis=1) for b in partition], axis=1).astype(np.uint8)


def block_maxima_csv(Y: np.ndarray, first_index: int = 0) -> str:
    rows = [(first_index + i, int(y)) for i, y in enumerate(np.asarray(Y).reshape(len(Y), -1)[:, 0])]
    return csv_text(["time_index", "Y"], rows)
