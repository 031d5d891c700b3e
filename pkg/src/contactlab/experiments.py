"""Experiment kinds: each composes simulation and analysis into a report.

Every experiment is a pure function of its :class:`ExperimentConfig`; replica
``r`` always uses the random key ``(seed, r)``, so changing the replica count
never changes what earlier replicas saw.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import partial
from typing import Callable

import numpy as np

from . import _kernels as K
from .analysis.domination import (allzero_curve, at_least, ci_excludes_zero,
                                  conditional_criterion, dfkg_test)
from .analysis.mixing import cone_mixing_curve, within_interval
from .analysis.obstruction import (alpha_limit, is_decreasing, obstruction_table,
                                   table_csv)
from .analysis.oracle import MAX_VERTICES, ctmc_oracle, monte_carlo_counts, uniformized_oracle
from .analysis.renewal import backward_depths, renewal_from_depths
from .analysis.surface import f_surface, zero_run_curve
from .analysis.tails import tail_fit
from .harris import (RngKey, evolve, extinction_times, generate_timeline, ones,
                     sample_upper_invariant, stationary_run, zero_run_lengths)
from .io import csv_text, to_json
from .processes import constrained_tree_process, slab_survival_scan
from .stats import InsufficientStatistics, log_linear_fit, proportion
from .topology import (GraphTopology, build_topology, density_profile, ray_ids,
                       topology_from_dict, tree_delta)

PASS, FAIL, INSUFFICIENT = "PASS", "FAIL", "INSUFFICIENT"

KINDS = ("oracle-check", "upper-sample", "tree-domination", "slab-domination",
         "single-site-spinflip", "renewal", "conditional", "cone-mixing", "obstruction", "dfkg",
         "slab-scan")


class ConfigError(ValueError):
    """Missing or out-of-range experiment parameters."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    topology: dict
    lam: float
    replicas: int
    seed: int
    T: float = 1.0
    theta: float | None = None
    params: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; known: {', '.join(KINDS)}")
        if not isinstance(self.topology, dict) or "kind" not in self.topology:
            raise ConfigError("topology must be a mapping with a 'kind' key")
        if not self.lam >= 0:
            raise ConfigError("lam must be >= 0")
        if int(self.replicas) < 1:
            raise ConfigError("replicas must be >= 1")
        if int(self.seed) < 0:
            raise ConfigError("seed must be >= 0")
        if not self.T > 0:
            raise ConfigError("T must be > 0")
        if self.theta is not None and not 0 < self.theta < math.pi / 2:
            raise ConfigError("theta must lie in (0, pi/2)")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known - {"out"}
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        missing = {"kind", "topology", "lam", "replicas", "seed"} - set(d)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        d = {k: v for k, v in d.items() if k in known}
        try:
            return cls(kind=str(d["kind"]), topology=dict(d["topology"]), lam=float(d["lam"]),
                       replicas=int(d["replicas"]), seed=int(d["seed"]),
                       T=float(d.get("T", 1.0)),
                       theta=None if d.get("theta") is None else float(d["theta"]),
                       params=dict(d.get("params") or {}), workers=int(d.get("workers", 1)))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def replace(self, **changes) -> "ExperimentConfig":
        d = self.to_dict()
        d.update(changes)
        return ExperimentConfig.from_dict(d)

    @property
    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def param(self, name: str, default=None, required: bool = False):
        if name in self.params:
            return self.params[name]
        if required:
            raise ConfigError(f"experiment {self.kind!r} needs params.{name}")
        return default

    def build(self) -> GraphTopology:
        return topology_from_dict(self.topology)


@dataclass
class Report:
    kind: str
    verdict: str
    summary: dict
    files: dict = field(default_factory=dict)   # file name -> text
    raw: dict = field(default_factory=dict)     # per-replica CSVs (prefix-stable)

    def all_files(self, config: ExperimentConfig) -> dict:
        body = {"kind": self.kind, "verdict": self.verdict, "config": config.to_dict(),
                "config_hash": config.digest, "seed": config.seed,
                "replicas": config.replicas, "summary": self.summary}
        out = {"report.json": to_json(body)}
        out.update(self.files)
        out.update(self.raw)
        return out


def replica_key_hex(seed: int, replica: int) -> str:
    """Identifier of the per-replica random stream family (``hash(seed, replica)``)."""
    return format(int(K.stream_key(seed, replica, 255, 0, 0, 0)), "016x")


# ---------------------------------------------------------------------------
# replica farming


def farm(task: Callable[[int], object], replicas: int, workers: int = 1, first: int = 0) -> list:
    """``[task(r) for r in range(first, first + replicas)]``, optionally across
    processes; results are always returned in replica order."""
    idx = range(first, first + replicas)
    if workers <= 1 or replicas < 2 * workers:
        return [task(r) for r in idx]
    chunk = max(1, replicas // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, idx, chunksize=chunk))


@dataclass(frozen=True)
class StationaryBatch:
    times: np.ndarray
    vertices: np.ndarray
    samples: np.ndarray          # [replica, time, vertex]
    depths: np.ndarray | None    # [replica, n] backward depths D_1..D_n at depth_vertex
    zero_runs: np.ndarray | None  # [replica, 2] (back, fwd) around time 0 at depth_vertex
    density_mid: np.ndarray      # per replica, at -t_back/4 on observed vertices
    t_back: float
    pad: int

    def columns(self, time_idx, vertex_idx) -> np.ndarray:
        """``[replica, k]`` matrix of the listed (time, vertex) coordinates."""
        return self.samples[:, list(time_idx), list(vertex_idx)]


def _stationary_task(r, *, top, lam, t_back, t_end, seed, times, vertices, pad,
                     depth_vertex, depth_T, depth_n, zero_runs):
    run = stationary_run(top, lam, t_back, t_end, RngKey(seed, r), pad)
    obs = run.observe(times, vertices)
    mid = float(run.observe([-t_back / 4.0]).mean())
    depths = runs = None
    if depth_n:
        big_x = int(run.inner[depth_vertex])
        depths = backward_depths(run.timeline, [big_x] * depth_n, depth_T)
    if zero_runs:
        runs = zero_run_lengths(run.trajectory, int(run.inner[depth_vertex]), 0.0)
    return obs, depths, runs, mid, run.pad


def stationary_batch(top: GraphTopology, lam: float, t_back: float, times, vertices,
                     seed: int, replicas: int, pad: int | None = None,
                     depth_vertex: int | None = None, depth_T: float = 1.0, depth_n: int = 0,
                     zero_runs: bool = False, t_end: float | None = None,
                     workers: int = 1, first: int = 0) -> StationaryBatch:
    times = np.asarray(times, dtype=float)
    vertices = np.asarray(vertices, dtype=np.int64)
    t_end = float(max(times.max(), depth_T * depth_n, 0.0)) if t_end is None else t_end
    dv = top.origin if depth_vertex is None else depth_vertex
    task = partial(_stationary_task, top=top, lam=lam, t_back=t_back, t_end=t_end, seed=seed,
                   times=times, vertices=vertices, pad=pad, depth_vertex=dv,
                   depth_T=depth_T, depth_n=depth_n, zero_runs=zero_runs)
    out = farm(task, replicas, workers, first)
    samples = np.stack([o[0] for o in out])
    depths = np.array([o[1] for o in out], dtype=float) if depth_n else None
    runs = np.array([o[2] for o in out], dtype=float) if zero_runs else None
    return StationaryBatch(times, vertices, samples, depths, runs,
                           np.array([o[3] for o in out]), float(t_back), int(out[0][4]))


def _samples_csv(batch: StationaryBatch, first: int = 0) -> str:
    header = ["replica"] + [f"t{t!r}_v{int(v)}" for t in batch.times for v in batch.vertices]
    rows = [(first + i, *row.reshape(-1).tolist()) for i, row in enumerate(batch.samples)]
    return csv_text(header, rows)


def pilot_survival(top: GraphTopology, x: int, lam: float, seed: int, replicas: int = 400,
                   horizon: float = 50.0) -> dict:
    """Survival gate: fraction of single-site starts alive at ``horizon``."""
    taus = extinction_times(top, x, lam, horizon, seed, replicas)
    est = proportion(int(np.isinf(taus).sum()), replicas)
    return {"survival": est.as_dict(), "supercritical": bool(est.lo > 0),
            "replicas": replicas, "horizon": horizon}


# ---------------------------------------------------------------------------
# experiment kinds


def _verdict(ok: bool, insufficient: bool = False) -> str:
    if insufficient:
        return INSUFFICIENT
    return PASS if ok else FAIL


def _init_config(top: GraphTopology, init) -> np.ndarray:
    if init in (None, "ones"):
        return ones(top)
    if init == "zeros":
        return np.zeros(top.n_vertices, dtype=np.uint8)
    arr = np.asarray(init, dtype=np.uint8)
    if arr.shape != (top.n_vertices,):
        raise ConfigError("init must list one bit per vertex")
    return arr


def run_oracle_check(cfg: ExperimentConfig) -> Report:
    top = cfg.build()
    if top.n_vertices > MAX_VERTICES:
        raise ConfigError(f"oracle-check needs at most {MAX_VERTICES} vertices")
    init = _init_config(top, cfg.param("init"))
    z_max = float(cfg.param("z_max", 4.0))
    rows, worst, worst_dual = [], 0.0, 0.0
    for t in cfg.param("t", [0.5, 1.0, 2.0]):
        exact = ctmc_oracle(top, cfg.lam, init, float(t))
        dual = uniformized_oracle(top, cfg.lam, init, float(t))
        counts = monte_carlo_counts(top, cfg.lam, init, float(t), cfg.seed, cfg.replicas)
        p = exact.probs
        se = np.sqrt(p * (1 - p) / cfg.replicas)
        freq = counts / cfg.replicas
        for s in range(p.size):
            z = (freq[s] - p[s]) / se[s] if se[s] > 0 else (0.0 if freq[s] == p[s] else math.inf)
            worst = max(worst, abs(z))
            rows.append((float(t), format(s, f"0{top.n_vertices}b")[::-1], p[s], dual.probs[s],
                         int(counts[s]), z))
        worst_dual = max(worst_dual, float(np.abs(p - dual.probs).max()))
    summary = {"max_abs_z": worst, "z_max": z_max, "max_method_gap": worst_dual,
               "topology_hash": top.digest}
    ok = worst <= z_max and worst_dual <= 1e-8
    return Report(cfg.kind, _verdict(ok), summary, {"oracle.csv": csv_text(
        ["t", "state", "exact", "uniformized", "mc_count", "z"], rows)})


def run_upper_sample(cfg: ExperimentConfig) -> Report:
    top = cfg.build()
    t_back = float(cfg.param("t_back", 20.0))
    pad = cfg.param("pad")

    def one(r):
        s = sample_upper_invariant(top, cfg.lam, t_back, RngKey(cfg.seed, r), pad)
        return s.density_mid, s.density_end, int(s.config[top.origin])

    out = farm(one, cfg.replicas, 1)
    mid = np.array([o[0] for o in out])
    end = np.array([o[1] for o in out])
    origin = proportion(sum(o[2] for o in out), cfg.replicas)
    gap = float(end.mean() - mid.mean())
    gap_se = float(np.std(end - mid, ddof=1) / math.sqrt(len(out))) if len(out) > 1 else math.inf
    converged = abs(gap) <= 4 * gap_se if gap_se > 0 else gap == 0
    summary = {"density_end": float(end.mean()), "density_mid": float(mid.mean()),
               "mid_end_gap": gap, "gap_stderr": gap_se, "origin": origin.as_dict(),
               "t_back": t_back, "converged": bool(converged), "topology_hash": top.digest}
    if cfg.lam == 0:
        summary["analytic_lambda0"] = math.exp(-t_back)
    raw = csv_text(["replica", "density_mid", "density_end", "origin"],
                   [(r, *o) for r, o in enumerate(out)])
    return Report(cfg.kind, _verdict(bool(converged)), summary, raw={"raw.csv": raw})


def run_tree_domination(cfg: ExperimentConfig) -> Report:
    top = cfg.build()
    if top.kind != "tree":
        raise ConfigError("tree-domination needs a tree topology")
    d, L = int(top.extent["d"]), int(top.extent["L"])
    delta = tree_delta(top)
    profile = density_profile(top, delta, L)
    target = Fraction(d - 1, d)
    # exact count: root, d labelled children at level 1, (d-1)/d of each deeper level
    expected = [Fraction(1 + d + sum((d - 1) * (d + 1) * d ** (k - 2) for k in range(2, n + 1)),
                         1 + sum((d + 1) * d ** (k - 1) for k in range(1, n + 1)))
                for n in range(1, L + 1)]
    profile_exact = list(profile) == expected
    ids = ray_ids(top)
    rays_ok = bool(np.all(ids >= 0))
    # law of the constrained process at a level-1 vertex of delta vs a direct half-line
    x = top.vertex_of_label((0, 2))
    ray_len = L
    line = build_topology("half-line", {"n": ray_len})
    t_back = float(cfg.param("t_back", 10.0))
    t_grid = [float(s) for s in cfg.param("zero_run_lengths", [0.25, 0.5, 1.0])]
    z = 2.576
    tree_hits = np.zeros(len(t_grid), dtype=np.int64)
    line_hits = np.zeros(len(t_grid), dtype=np.int64)
    order_ok = True
    for r in range(cfg.replicas):
        tl = generate_timeline(top, cfg.lam, (-t_back, max(t_grid)), RngKey(cfg.seed, r))
        xi = constrained_tree_process(tl)
        if r < int(cfg.param("order_checks", 200)):
            order_ok &= xi <= evolve(tl, ones(top))
        ltl = generate_timeline(line, cfg.lam, (-t_back, max(t_grid)),
                                RngKey(cfg.seed + 1_000_003, r))
        eta = evolve(ltl, ones(line))
        for j, s in enumerate(t_grid):
            tree_hits[j] += xi.is_zero_on(x, 0.0, s)
            line_hits[j] += eta.is_zero_on(0, 0.0, s)
    rows, law_ok = [], True
    for j, s in enumerate(t_grid):
        a = proportion(int(tree_hits[j]), cfg.replicas, 0.99)
        b = proportion(int(line_hits[j]), cfg.replicas, 0.99)
        diff = a.value - b.value
        merged = z * math.hypot(a.stderr, b.stderr)
        law_ok &= abs(diff) <= merged
        rows.append((s, a.value, a.lo, a.hi, b.value, b.lo, b.hi))
    summary = {"density_profile": [str(f) for f in profile], "limit": str(target),
               "profile_exact": profile_exact, "rays_partition": rays_ok,
               "constrained_below_contact": bool(order_ok), "law_match": bool(law_ok),
               "vertex_label": [0, 2], "ray_length": ray_len, "t_back": t_back,
               "topology_hash": top.digest}
    ok = profile_exact and rays_ok and order_ok and law_ok
    return Report(cfg.kind, _verdict(ok), summary, {"zero_runs.csv": csv_text(
        ["s", "tree", "tree_lo", "tree_hi", "halfline", "halfline_lo", "halfline_hi"], rows)})


def _projection_columns(top: GraphTopology, cfg: ExperimentConfig):
    """Observed vertices and the (time index, vertex index) columns, time-major."""
    n_max = int(cfg.param("n_max", 10))
    if "sites" in cfg.params:
        sites = [top.vertex_of(tuple(c) if isinstance(c, (list, tuple)) else (c,))
                 for c in cfg.params["sites"]]
    else:
        m = int(cfg.param("width", 1))
        sites = [top.vertex_of((0,) * (top.coords.shape[1] - 1) + (j,)) for j in range(m)]
    n_times = -(-n_max // len(sites))
    times = cfg.T * np.arange(1, n_times + 1)
    cols = [(i, j) for i in range(n_times) for j in range(len(sites))][:n_max]
    return np.array(sites), times, cols


def run_slab_domination(cfg: ExperimentConfig) -> Report:
    top = cfg.build()
    sites, times, cols = _projection_columns(top, cfg)
    t_back = float(cfg.param("t_back", 20.0))
    batch = stationary_batch(top, cfg.lam, t_back, times, sites, cfg.seed, cfg.replicas,
                             workers=cfg.workers)
    Y = batch.columns([c[0] for c in cols], [c[1] for c in cols])
    try:
        rep = allzero_curve(Y, len(cols))
    except InsufficientStatistics as exc:
        return Report(cfg.kind, INSUFFICIENT, {"error": str(exc)}, raw={"raw.csv": _samples_csv(batch)})
    summary = rep.as_dict()
    summary.update({"sites": sites, "times": times, "t_back": t_back,
                    "topology_hash": top.digest,
                    "density_mid": float(batch.density_mid.mean())})
    ok = rep.verdict and rep.rho_hat > 0
    return Report(cfg.kind, _verdict(ok), summary, {"allzero.csv": rep.csv()},
                  {"raw.csv": _samples_csv(batch)})


def run_single_site_spinflip(cfg: ExperimentConfig) -> Report:
    top = cfg.build()
    x = int(cfg.param("x", top.origin))
    horizon = float(cfg.param("horizon", 100.0))
    gate = pilot_survival(top, x, cfg.lam, cfg.seed + 7, int(cfg.param("pilot_replicas", 400)))
    if not gate["supercritical"]:
        return Report(cfg.kind, FAIL, {"pilot": gate, "reason": "pilot survival gate failed"})
    taus = extinction_times(top, x, cfg.lam, horizon, cfg.seed, cfg.replicas)
    fit = tail_fit(taus, s0=float(cfg.param("s0", 2.0)), horizon=horizon)
    t_grid = [float(v) for v in cfg.param("t_grid", [0, 1, 2, 3, 4, 5])]
    u_grid = [float(v) for v in cfg.param("u_grid", [0, 1, 2, 3, 4, 5])]
    a_grid = [float(v) for v in cfg.param("a_grid", list(range(1, 11)))]
    t_back = float(cfg.param("t_back", 40.0))
    n_stat = int(cfg.param("stationary_replicas", cfg.replicas))
    batch = stationary_batch(top, cfg.lam, t_back, [0.0], [x], cfg.seed + 1, n_stat,
                             depth_vertex=x, zero_runs=True,
                             t_end=max(max(t_grid), max(a_grid)) + 1.0, workers=cfg.workers)
    back, fwd = batch.zero_runs[:, 0], batch.zero_runs[:, 1]
    surf = f_surface(back, fwd, t_grid, u_grid)
    curve = zero_run_curve(fwd, a_grid)
    afit = log_linear_fit(a_grid, [e.value for e in curve])
    violations = surf.monotone_violations(2.0)
    eps_ok = ci_excludes_zero(fit.survival)
    ok = eps_ok and fit.passes and not violations and afit.r_squared >= 0.9
    summary = {"pilot": gate, "tail": fit.as_dict(), "monotone_violations": violations,
               "zero_run_fit": afit.as_dict(), "zero_run_curve": [e.as_dict() for e in curve],
               "submultiplicativity": surf.submultiplicativity(), "t_back": t_back,
               "surface_starved": surf.starved, "topology_hash": top.digest}
    raw = csv_text(["replica", "tau"], list(enumerate(taus.tolist())))
    zr = csv_text(["replica", "back", "fwd"], [(i, b, f) for i, (b, f) in enumerate(zip(back, fwd))])
    return Report(cfg.kind, _verdict(ok, fit.insufficient or surf.starved), summary,
                  {"f_surface.csv": surf.csv()}, {"raw.csv": raw, "zero_runs_raw.csv": zr})


def run_renewal(cfg: ExperimentConfig) -> Report:
    top = cfg.build()
    n_max = int(cfg.param("n_max", 12))
    t_back = float(cfg.param("t_back", 20.0))
    times = cfg.T * np.arange(1, n_max + 1)
    batch = stationary_batch(top, cfg.lam, t_back, times, [top.origin], cfg.seed,
                             cfg.replicas, depth_T=cfg.T, depth_n=n_max, workers=cfg.workers)
    bits = batch.samples[:, :, 0]
    D = batch.depths
    # decidability and event inclusion hold per replica, exactly
    decidable = bool(np.all(np.isfinite(D) == (bits == 0)))
    counts = np.zeros(n_max, dtype=np.int64)
    allzero = np.zeros(n_max, dtype=np.int64)
    inclusion = True
    for row_d, row_b in zip(D, bits):
        for n in range(1, n_max + 1):
            reached = renewal_from_depths(row_d[:n])[2]
            counts[n - 1] += reached
            if not row_b[:n].any():
                allzero[n - 1] += 1
                inclusion &= reached
    est = [proportion(int(c), cfg.replicas) for c in counts]
    fit = log_linear_fit(np.arange(1, n_max + 1), [e.value for e in est])
    rows = [(n + 1, e.value, e.lo, e.hi, int(allzero[n])) for n, e in enumerate(est)]
    ok = decidable and inclusion and fit.r_squared >= 0.9 and fit.slope < 0
    summary = {"decidable": decidable, "event_inclusion": bool(inclusion), "fit": fit.as_dict(),
               "counts": counts, "allzero_counts": allzero, "t_back": t_back,
               "topology_hash": top.digest}
    raw = csv_text(["replica"] + [f"D{i}" for i in range(1, n_max + 1)],
                   [(r, *row.tolist()) for r, row in enumerate(D)])
    return Report(cfg.kind, _verdict(ok), summary, {"renewal.csv": csv_text(
        ["n", "p_hat", "ci_lo", "ci_hi", "allzero_count"], rows)}, {"raw.csv": raw})


def run_conditional(cfg: ExperimentConfig) -> Report:
    top = cfg.build()
    n_max = int(cfg.param("n_max", 10))
    past = int(cfg.param("past_zeros", 3))
    t_back = float(cfg.param("t_back", 20.0))
    times = cfg.T * np.arange(-past, n_max + 1)
    batch = stationary_batch(top, cfg.lam, t_back, times, [top.origin], cfg.seed,
                             cfg.replicas, workers=cfg.workers)
    S = batch.samples[:, :, 0]
    future = S[:, past + 1:]
    rep = allzero_curve(future, n_max)
    est = conditional_criterion(S, list(range(past)), [], past)
    ok = at_least(est, rep.rho_hat, 2.0) and rep.rho_hat > 0
    summary = {"rho_hat": rep.rho_hat, "rho_point": rep.rho_point,
               "conditional": est.as_dict(), "past_zeros": past, "t_back": t_back,
               "allzero": rep.as_dict(), "topology_hash": top.digest}
    return Report(cfg.kind, _verdict(ok, est.insufficient), summary,
                  {"allzero.csv": rep.csv()}, {"raw.csv": _samples_csv(batch)})


def run_cone_mixing(cfg: ExperimentConfig) -> Report:
    top = cfg.build()
    if top.kind != "lattice":
        raise ConfigError("cone-mixing needs a lattice topology")
    d = int(top.extent["d"])
    theta = cfg.theta if cfg.theta is not None else math.pi / 4
    n_max = int(cfg.param("n_max", 10))
    t_back = float(cfg.param("t_back", 20.0))
    rho_replicas = int(cfg.param("rho_replicas", cfg.replicas))
    origin_only = build_topology("lattice", {"d": d, "R": 0})
    batch = stationary_batch(origin_only, cfg.lam, t_back, cfg.T * np.arange(1, n_max + 1),
                             [0], cfg.seed + 1, rho_replicas, workers=cfg.workers)
    rep = allzero_curve(batch.samples[:, :, 0], n_max)
    steps = int(cfg.param("steps", 12))
    fit_range = tuple(cfg.param("fit_range", [2.0, 12.0]))
    curve = cone_mixing_curve(cfg.lam, cfg.T, theta, steps, cfg.replicas, rep.rho_hat,
                              cfg.seed, d=d, radius=int(top.extent["R"]), fit_range=fit_range)
    start_ok = within_interval(curve.delta[0], 1.0 - rep.rho_hat)
    fit_ok = curve.fit.slope < 0 and curve.fit.r_squared >= float(cfg.param("r2_min", 0.85))
    ok = start_ok and fit_ok and curve.phi_strictly_decreasing()
    summary = curve.as_dict()
    summary.update({"allzero": rep.as_dict(), "delta0_matches": bool(start_ok),
                    "fit_ok": bool(fit_ok), "topology_hash": top.digest})
    return Report(cfg.kind, _verdict(ok), summary,
                  {"delta.csv": curve.csv(), "phi.csv": curve.phi_csv(),
                   "allzero.csv": rep.csv()})


def run_obstruction(cfg: ExperimentConfig) -> Report:
    top = cfg.build()
    d = int(top.extent.get("d", 1))
    ns = [int(n) for n in cfg.param("n", [5, 10, 20])]
    Ts = [float(T) for T in cfg.param("T_grid", [1, 10, 100])]
    t_back = float(cfg.param("t_back", 20.0))
    batch = stationary_batch(top, cfg.lam, t_back, [0.0], [top.origin], cfg.seed,
                             cfg.replicas, workers=cfg.workers)
    nu0 = proportion(int((batch.samples[:, 0, 0] == 0).sum()), cfg.replicas)
    rows = obstruction_table(cfg.lam, ns, Ts, nu0, d=d)
    limits = obstruction_table(cfg.lam, ns, [math.inf], nu0, d=d)
    analytic = []
    analytic_ok = True
    for r in limits:
        exact = alpha_limit(r.ball, r.shell, cfg.lam, 2 * d)
        analytic_ok &= math.isclose(r.alpha, float(exact), rel_tol=0, abs_tol=1e-15)
        analytic.append({"n": r.n, "alpha_limit": str(exact), "computed": r.alpha})
    decreasing = is_decreasing(rows)
    summary = {"nu0": nu0.as_dict(), "analytic_rows": analytic, "analytic_ok": bool(analytic_ok),
               "decreasing": decreasing, "t_back": t_back, "topology_hash": top.digest}
    return Report(cfg.kind, _verdict(analytic_ok and decreasing), summary,
                  {"obstruction.csv": table_csv(rows + limits)},
                  {"raw.csv": _samples_csv(batch)})


def draw_triples(rng: np.random.Generator, n_times: int, n_sites: int, count: int,
                 block: int = 2) -> list[tuple]:
    """Random ``(x, y, zeros)`` column triples on a ``time x site`` window; the
    zeros form ``block`` adjacent sites at one time, disjoint from ``x`` and ``y``."""
    triples = []
    while len(triples) < count:
        t = int(rng.integers(n_times))
        s = int(rng.integers(n_sites - block + 1))
        zeros = [t * n_sites + s + j for j in range(block)]
        free = [c for c in range(n_times * n_sites) if c not in zeros]
        x, y = rng.choice(free, size=2, replace=False)
        triples.append((int(x), int(y), tuple(zeros)))
    return triples


def run_dfkg(cfg: ExperimentConfig) -> Report:
    top = cfg.build()
    half = int(cfg.param("half_width", 3))
    n_times = int(cfg.param("n_times", 5))
    t_back = float(cfg.param("t_back", 20.0))
    sites = [top.vertex_of((0,) * (top.coords.shape[1] - 1) + (j,)) for j in range(-half, half + 1)]
    times = cfg.T * np.arange(n_times)
    batch = stationary_batch(top, cfg.lam, t_back, times, sites, cfg.seed, cfg.replicas,
                             workers=cfg.workers)
    flat = batch.samples.reshape(cfg.replicas, -1)
    rng = np.random.default_rng(cfg.seed)
    triples = draw_triples(rng, n_times, len(sites), int(cfg.param("triples", 50)))
    rows, ok = dfkg_test(flat, triples)
    starved = all(r.insufficient for r in rows)
    summary = {"rows": [r.as_dict() for r in rows], "n_starved": sum(r.insufficient for r in rows),
               "min_z": min((r.cov / r.stderr for r in rows if not r.insufficient
                             and r.stderr > 0), default=math.nan),
               "t_back": t_back, "topology_hash": top.digest}
    table = csv_text(["x", "y", "zeros", "cov", "stderr", "hits"],
                     [(r.x, r.y, " ".join(map(str, r.zeros)), r.cov, r.stderr, r.hits)
                      for r in rows])
    return Report(cfg.kind, _verdict(ok, starved), summary, {"dfkg.csv": table},
                  {"raw.csv": _samples_csv(batch)})


def run_slab_scan(cfg: ExperimentConfig) -> Report:
    ks = [int(k) for k in cfg.param("widths", [1, 2, 3, 4])]
    d = int(cfg.topology.get("d", 2))
    length = int(cfg.topology.get("L", 60))
    horizon = float(cfg.param("horizon", 50.0))
    rows = slab_survival_scan(cfg.lam, ks, horizon, cfg.replicas, cfg.seed, d=d, length=length)
    widest = rows[-1]["survival"]
    ok = widest["ci_lo"] > 0
    table = csv_text(["k", "survival", "ci_lo", "ci_hi", "c_hat", "r_squared"],
                     [(r["k"], r["survival"]["value"], r["survival"]["ci_lo"],
                       r["survival"]["ci_hi"], r["tail"]["c_hat"], r["tail"]["r_squared"])
                      for r in rows])
    return Report(cfg.kind, _verdict(ok), {"rows": rows, "horizon": horizon},
                  {"slab_scan.csv": table})


RUNNERS: dict[str, Callable[[ExperimentConfig], Report]] = {
    "oracle-check": run_oracle_check,
    "upper-sample": run_upper_sample,
    "tree-domination": run_tree_domination,
    "slab-domination": run_slab_domination,
    "single-site-spinflip": run_single_site_spinflip,
    "renewal": run_renewal,
    "conditional": run_conditional,
    "cone-mixing": run_cone_mixing,
    "obstruction": run_obstruction,
    "dfkg": run_dfkg,
    "slab-scan": run_slab_scan,
}


def run_experiment(cfg: ExperimentConfig) -> Report:
    return RUNNERS[cfg.kind](cfg)


def _lattice(d, R):
    return {"kind": "lattice", "d": d, "R": R}


PRESETS: dict[str, dict] = {
    "tree-ray": dict(kind="tree-domination", topology={"kind": "tree", "d": 2, "L": 8},
                     lam=5.0, replicas=2000, seed=1301,
                     params={"t_back": 10.0, "zero_run_lengths": [0.25, 0.5, 1.0]}),
    "halfline-spinflip": dict(kind="single-site-spinflip",
                              topology={"kind": "half-line", "n": 200},
                              lam=2.0, replicas=10000, seed=1401,
                              params={"horizon": 100.0, "t_back": 40.0}),
    "finite-set": dict(kind="slab-domination", topology=_lattice(1, 5), lam=2.0, replicas=10000,
                       seed=1501, params={"sites": [0, 1], "n_max": 10, "t_back": 20.0}),
    "slab": dict(kind="slab-domination", topology=_lattice(1, 5), lam=2.0, replicas=10000,
                 seed=1601, params={"width": 1, "n_max": 10, "t_back": 20.0}),
    "conditional": dict(kind="conditional", topology=_lattice(1, 5), lam=2.0, replicas=10000,
                        seed=1701, params={"past_zeros": 3, "n_max": 10, "t_back": 20.0}),
    "cone-mixing": dict(kind="cone-mixing", topology=_lattice(2, 25), lam=0.7, replicas=2000,
                        seed=1801, theta=math.pi / 4,
                        params={"steps": 12, "t_back": 20.0}),
    "obstruction": dict(kind="obstruction", topology=_lattice(1, 5), lam=2.0, replicas=10000,
                        seed=1101, params={"n": [5, 10, 20], "T_grid": [1, 10, 100]}),
    "renewal": dict(kind="renewal", topology=_lattice(1, 5), lam=2.0, replicas=10000, seed=3101,
                    params={"n_max": 12, "t_back": 20.0}),
    "slab-scan": dict(kind="slab-scan", topology={"kind": "slab", "d": 2, "k": 1, "L": 60},
                      lam=2.0, replicas=2000, seed=4201,
                      params={"widths": [1, 2, 4, 8], "horizon": 50.0}),
    "dfkg": dict(kind="dfkg", topology=_lattice(1, 5), lam=2.0, replicas=10000, seed=2101,
                 params={"half_width": 3, "n_times": 5, "triples": 50}),
    "oracle-path3": dict(kind="oracle-check", topology={"kind": "half-line", "n": 3},
                         lam=1.5, replicas=100000, seed=101, params={"t": [0.5, 1.0, 2.0]}),
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return ExperimentConfig.from_dict(PRESETS[name])
