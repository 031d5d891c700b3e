"""Graphical representation of the contact process.

A timeline holds the Poisson crosses (recoveries, rate 1 per vertex) and
arrows (infection attempts, rate ``lam`` per directed edge) on a time window.
Every trajectory, backward path and extinction time in this package is a
deterministic function of a timeline, so different processes evaluated on the
same timeline are coupled pathwise.

Time is continuous throughout; nothing is discretised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels as K
from .stats import Estimate, proportion
from .topology import GraphTopology, padded

DEFAULT_HORIZON = 100.0


class RngKey(NamedTuple):
    seed: int
    replica: int = 0


def _key(rng_key) -> RngKey:
    key = RngKey(*rng_key) if not isinstance(rng_key, RngKey) else rng_key
    if key.seed < 0 or key.replica < 0:
        raise ValueError("seed and replica must be non-negative")
    return key


# configurations are uint8 arrays of length |V|

def zeros(top: GraphTopology) -> np.ndarray:
    return np.zeros(top.n_vertices, dtype=np.uint8)


def ones(top: GraphTopology) -> np.ndarray:
    return np.ones(top.n_vertices, dtype=np.uint8)


def single(top: GraphTopology, x: int) -> np.ndarray:
    eta = zeros(top)
    eta[x] = 1
    return eta


def indicator(top: GraphTopology, vertices) -> np.ndarray:
    eta = zeros(top)
    eta[np.asarray(list(vertices), dtype=np.int64)] = 1
    return eta


@dataclass(frozen=True, eq=False)
class EventTimeline:
    topology: GraphTopology
    lam: float
    window: tuple[float, float]
    rng_key: RngKey
    times: np.ndarray
    kinds: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    up_rate: float = 0.0

    def __len__(self) -> int:
        return len(self.times)

    def crosses(self, v: int) -> np.ndarray:
        return self.times[(self.kinds == K.CROSS) & (self.src == v)]

    def arrows(self, u: int, v: int) -> np.ndarray:
        return self.times[(self.kinds == K.ARROW) & (self.src == u) & (self.dst == v)]

    def index_after(self, t: float) -> int:
        """Number of events with time <= t."""
        return int(np.searchsorted(self.times, t, side="right"))

    def _check_times(self, *ts: float) -> None:
        t0, t1 = self.window
        for t in ts:
            if not (t0 <= t <= t1):
                raise ValueError(f"time {t} outside window {self.window}")

    def event_log_text(self) -> str:
        t0, t1 = self.window
        lines = [f"# topology {self.topology.digest} lambda {self.lam!r} "
                 f"window {t0!r} {t1!r} rng_key {self.rng_key.seed} {self.rng_key.replica}"]
        for t, k, a, b in zip(self.times.tolist(), self.kinds.tolist(),
                              self.src.tolist(), self.dst.tolist()):
            if k == K.CROSS:
                lines.append(f"X {a} {t!r}")
            elif k == K.ARROW:
                lines.append(f"A {a} {b} {t!r}")
            else:
                lines.append(f"U {a} {t!r}")
        return "\n".join(lines) + "\n"


def generate_timeline(top: GraphTopology, lam: float, window, rng_key) -> EventTimeline:
    """Realise crosses and arrows on ``window`` from the stream family ``rng_key``."""
    if lam < 0:
        raise ValueError("infection rate must be >= 0")
    t0, t1 = map(float, window)
    if not t1 > t0:
        raise ValueError("window must be nonempty")
    key = _key(rng_key)
    times, kinds, src, dst = K.generate_events(
        top.n_vertices, top.esrc, top.edst, float(lam), 0.0, t0, t1, key.seed, key.replica)
    return EventTimeline(top, float(lam), (t0, t1), key, times, kinds, src, dst)


def generate_spin_flip_timeline(top: GraphTopology, alpha: float, window, rng_key) -> EventTimeline:
    """Rate-1 down clocks and rate-``alpha`` up clocks per vertex, no arrows."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    t0, t1 = map(float, window)
    key = _key(rng_key)
    times, kinds, src, dst = K.generate_events(
        top.n_vertices, top.esrc, top.edst, 0.0, float(alpha), t0, t1, key.seed, key.replica)
    return EventTimeline(top, 0.0, (t0, t1), key, times, kinds, src, dst, up_rate=float(alpha))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Piecewise-constant, right-continuous path started at ``start``."""

    topology: GraphTopology
    start: float
    stop: float
    initial: np.ndarray
    flip_times: np.ndarray
    flip_vertices: np.ndarray
    flip_values: np.ndarray
    final: np.ndarray = field(repr=False)

    def state_at(self, t: float) -> np.ndarray:
        if not (self.start <= t <= self.stop):
            raise ValueError(f"time {t} outside [{self.start}, {self.stop}]")
        idx = int(np.searchsorted(self.flip_times, t, side="right"))
        state = self.initial.copy()
        if idx:
            rv = self.flip_vertices[:idx][::-1]
            verts, pos = np.unique(rv, return_index=True)
            state[verts] = self.flip_values[:idx][::-1][pos]
        return state

    def states_at(self, grid: Sequence[float], vertices=None) -> np.ndarray:
        """Matrix ``[len(grid), len(vertices)]`` of point evaluations (grid increasing)."""
        grid = np.asarray(grid, dtype=float)
        if grid.size and (grid[0] < self.start or grid[-1] > self.stop):
            raise ValueError("grid outside trajectory window")
        if np.any(np.diff(grid) < 0):
            raise ValueError("grid must be non-decreasing")
        vertices = (np.arange(self.topology.n_vertices) if vertices is None
                    else np.asarray(vertices, dtype=np.int64))
        cuts = np.searchsorted(self.flip_times, grid, side="right").astype(np.int64)
        return K.replay_states(self.initial, self.flip_vertices, self.flip_values, cuts,
                               vertices)

    def value_at(self, x: int, t: float) -> int:
        mine = self.flip_vertices == x
        ft = self.flip_times[mine]
        idx = int(np.searchsorted(ft, t, side="right"))
        return int(self.flip_values[mine][idx - 1]) if idx else int(self.initial[x])

    def vertex_flips(self, x: int) -> tuple[np.ndarray, np.ndarray]:
        mine = self.flip_vertices == x
        return self.flip_times[mine], self.flip_values[mine]

    def is_zero_on(self, x: int, t: float, s: float) -> bool:
        """Whether ``x`` is 0 throughout ``[t, s)``."""
        if self.value_at(x, t):
            return False
        ft, fv = self.vertex_flips(x)
        inside = (ft > t) & (ft < s)
        return not bool((fv[inside] == 1).any())

    def export_text(self) -> str:
        return "".join(f"F {v} {t!r} {b}\n" for t, v, b in zip(
            self.flip_times.tolist(), self.flip_vertices.tolist(), self.flip_values.tolist()))

    def __le__(self, other: "Trajectory") -> bool:
        return dominated(self, other)


def dominated(a: Trajectory, b: Trajectory) -> bool:
    """``a_t <= b_t`` coordinatewise for every t (checked at every flip time of either)."""
    if not (np.all(a.initial <= b.initial)):
        return False
    times = np.union1d(a.flip_times, b.flip_times)
    sa, sb = a.initial.copy(), b.initial.copy()
    ia = ib = 0
    for t in times:
        while ia < len(a.flip_times) and a.flip_times[ia] <= t:
            sa[a.flip_vertices[ia]] = a.flip_values[ia]
            ia += 1
        while ib < len(b.flip_times) and b.flip_times[ib] <= t:
            sb[b.flip_vertices[ib]] = b.flip_values[ib]
            ib += 1
        if np.any(sa > sb):
            return False
    return True


_NO_GROUPS = np.zeros(1, dtype=np.int64)


def evolve(timeline: EventTimeline, init: np.ndarray, start: float | None = None,
           stop: float | None = None, groups: np.ndarray | None = None) -> Trajectory:
    """Run the process from ``init`` at ``start`` through the events in ``(start, stop]``.

    A cross sets its vertex to 0; an arrow ``u -> w`` sets ``w`` to 1 when ``u``
    is 1; an up-flip sets its vertex to 1. With ``groups`` given, arrows
    between vertices of different groups are ignored.
    """
    top = timeline.topology
    init = np.asarray(init, dtype=np.uint8)
    if init.shape != (top.n_vertices,):
        raise ValueError("initial configuration does not match the timeline topology")
    t0, t1 = timeline.window
    start = t0 if start is None else float(start)
    stop = t1 if stop is None else float(stop)
    timeline._check_times(start, stop)
    if stop < start:
        raise ValueError("stop before start")
    use = groups is not None
    g = np.asarray(groups, dtype=np.int64) if use else _NO_GROUPS
    final, ft, fv, fval = K.evolve_range(
        timeline.times, timeline.kinds, timeline.src, timeline.dst, init,
        timeline.index_after(start), timeline.index_after(stop), g, use)
    return Trajectory(top, start, stop, init.copy(), ft, fv, fval, final)


def backward_death_time(timeline: EventTimeline, y: int, t: float, s: float | None = None,
                        groups: np.ndarray | None = None) -> float:
    """Time of the cross that extinguishes all backward paths from ``(y, t)``,
    searching down to ``s`` (window start by default); ``-inf`` if some path
    reaches ``s``."""
    s = timeline.window[0] if s is None else float(s)
    _, death = _backward(timeline, y, t, s, groups)
    return float(death)


def _backward(timeline, y, t, s, groups):
    timeline._check_times(s, t)
    if s > t:
        raise ValueError("need s <= t")
    use = groups is not None
    g = np.asarray(groups, dtype=np.int64) if use else _NO_GROUPS
    return K.backward_range(
        timeline.times, timeline.kinds, timeline.src, timeline.dst,
        timeline.topology.n_vertices, int(y), timeline.index_after(s),
        timeline.index_after(t), g, use)


def backward_reachable(timeline: EventTimeline, y: int, t: float, s: float,
                       groups: np.ndarray | None = None) -> np.ndarray:
    """Vertices ``x`` with ``(x, s)`` connected to ``(y, t)`` by a backward path."""
    active, _ = _backward(timeline, y, t, s, groups)
    return np.flatnonzero(active)


def default_pad(lam: float, t_back: float) -> int:
    return int(max(10, math.ceil(lam * t_back / 2.0)))


@dataclass(frozen=True, eq=False)
class StationaryRun:
    """Process started from all ones at ``-t_back`` on a padded copy of the
    observation topology; ``inner[v]`` is the padded index of observed vertex ``v``."""

    observed: GraphTopology
    timeline: EventTimeline
    trajectory: Trajectory
    inner: np.ndarray
    t_back: float
    pad: int

    def observe(self, grid: Sequence[float], vertices=None) -> np.ndarray:
        vertices = (np.arange(self.observed.n_vertices) if vertices is None
                    else np.asarray(vertices, dtype=np.int64))
        return self.trajectory.states_at(grid, self.inner[vertices])


def stationary_run(top: GraphTopology, lam: float, t_back: float, t_end: float,
                   rng_key, pad: int | None = None) -> StationaryRun:
    if t_back <= 0:
        raise ValueError("t_back must be > 0")
    pad = default_pad(lam, t_back) if pad is None else int(pad)
    big, inner = padded(top, pad)
    tl = generate_timeline(big, lam, (-float(t_back), float(t_end)), rng_key)
    traj = evolve(tl, ones(big))
    return StationaryRun(top, tl, traj, inner, float(t_back), pad)


@dataclass(frozen=True)
class UpperInvariantSample:
    config: np.ndarray
    density_mid: float               # at -t_back / 4
    density_end: float
    t_back: float
    pad: int


def sample_upper_invariant(top: GraphTopology, lam: float, t_back: float, rng_key,
                           pad: int | None = None) -> UpperInvariantSample:
    """Configuration at time 0 of the process started from all ones at ``-t_back``.

    The densities at ``-t_back/4`` and ``0`` on the observed vertices are
    returned as a convergence diagnostic.
    """
    run = stationary_run(top, lam, t_back, 0.0, rng_key, pad)
    both = run.observe([-t_back / 4.0, 0.0])
    return UpperInvariantSample(both[1].copy(), float(both[0].mean()),
                                float(both[1].mean()), float(t_back), run.pad)


@dataclass(frozen=True)
class ExtinctionSample:
    x: int
    tau: float | None
    censored: bool
    horizon: float


def _out_csr(top: GraphTopology):
    return top.indptr, np.arange(len(top.indices), dtype=np.int64)


def extinction_time(top: GraphTopology, x: int, lam: float, horizon: float = DEFAULT_HORIZON,
                    rng_key=(0, 0)) -> ExtinctionSample:
    """First time the process started from the single infection ``x`` is all zero."""
    key = _key(rng_key)
    indptr, out = _out_csr(top)
    tau = K.extinction_run_lazy(top.n_vertices, indptr, out, top.esrc, top.edst,
                                float(lam), int(x), float(horizon), key.seed, key.replica)
    if tau < 0:
        return ExtinctionSample(int(x), None, True, float(horizon))
    return ExtinctionSample(int(x), float(tau), False, float(horizon))


def extinction_times(top: GraphTopology, x: int, lam: float, horizon: float, seed: int,
                     replicas: int, first: int = 0) -> np.ndarray:
    """Extinction times for replicas ``first ..``; censored entries are ``inf``."""
    indptr, out = _out_csr(top)
    esrc, edst = top.esrc, top.edst
    taus = np.empty(replicas)
    for i in range(replicas):
        tau = K.extinction_run_lazy(top.n_vertices, indptr, out, esrc, edst, float(lam),
                                    int(x), float(horizon), seed, first + i)
        taus[i] = math.inf if tau < 0 else tau
    return taus


def zero_run_probability(trajectories: Sequence[Trajectory], x: int, t: float, s: float,
                         level: float = 0.95) -> Estimate:
    """Fraction of trajectories in which ``x`` stays 0 on ``[t, s)``."""
    hits = sum(tr.is_zero_on(x, t, s) for tr in trajectories)
    return proportion(hits, len(trajectories), level)


def zero_run_lengths(traj: Trajectory, x: int, at: float = 0.0) -> tuple[float, float]:
    """Lengths ``(back, fwd)`` of the zero run of ``x`` around time ``at``.

    ``x`` is 0 on ``[at - u, at)`` iff ``u <= back`` and 0 on ``[at, at + t)`` iff
    ``t <= fwd``. Runs cut by the trajectory window end at the window edge.
    """
    ft, fv = traj.vertex_flips(x)
    idx = int(np.searchsorted(ft, at, side="right"))
    # forward: value at `at`, then the next up-flip
    now = int(fv[idx - 1]) if idx else int(traj.initial[x])
    if now:
        fwd = 0.0
    else:
        ups = ft[idx:][fv[idx:] == 1]
        fwd = (float(ups[0]) if ups.size else traj.stop) - at
    # backward: value just before `at`
    j = int(np.searchsorted(ft, at, side="left"))
    before = int(fv[j - 1]) if j else int(traj.initial[x])
    if before:
        back = 0.0
    else:
        downs = ft[:j][fv[:j] == 0]
        back = at - (float(downs[-1]) if downs.size else traj.start)
    return back, fwd
