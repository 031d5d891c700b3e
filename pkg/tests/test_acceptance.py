"""Acceptance suite: one test per criterion, each at its stated tolerance and
runtime budget. A summary line per criterion is printed after the run."""

import math
import time
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest

from contactlab.analysis.oracle import ctmc_oracle, monte_carlo_counts
from contactlab.cli import main
from contactlab.experiments import PASS, preset, run_experiment
from contactlab.harris import (RngKey, backward_reachable, evolve, generate_timeline, ones)
from contactlab.processes import SpinFlipParams, constrained_tree_process, slab_process, spin_flip_evolve
from contactlab.stats import mean_estimate
from contactlab.topology import (build_topology, density_profile, ray, ray_ids, tree_delta)

from conftest import random_graph, record

pytestmark = pytest.mark.acceptance


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


# --- 1. exact pathwise invariants -----------------------------------------------------------

def _pathwise_failures(n_timelines: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    fails = {"monotonicity": 0, "additivity": 0, "duality": 0, "markov": 0, "tree": 0, "slab": 0}
    for i in range(n_timelines):
        top = random_graph(int(rng.integers(1, 51)), int(rng.integers(2**31)))
        lam = float(rng.choice([0.0, 0.5, 1.0, 2.0, 4.0]))
        width = float(rng.uniform(0.1, 10.0))
        tl = generate_timeline(top, lam, (0.0, width), RngKey(seed, i))
        n = top.n_vertices
        A = (rng.random(n) < 0.3).astype(np.uint8)
        B = (rng.random(n) < 0.3).astype(np.uint8)
        AB = np.maximum(A, B)
        ta, tb, tab = evolve(tl, A), evolve(tl, B), evolve(tl, AB)
        fails["monotonicity"] += not (ta <= tab and tb <= tab)
        grid = np.unique(np.concatenate([ta.flip_times, tb.flip_times, tab.flip_times,
                                         [0.0, width]]))
        fails["additivity"] += not np.array_equal(
            tab.states_at(grid), np.maximum(ta.states_at(grid), tb.states_at(grid)))
        s, t = np.sort(rng.uniform(0.0, width, 2))
        seg = evolve(tl, A, start=s, stop=t)
        for y in rng.choice(n, size=min(n, 3), replace=False):
            reach = backward_reachable(tl, int(y), t, s)
            fails["duality"] += bool(A[reach].any()) != bool(seg.final[y])
        u = float(rng.uniform(0.0, width))
        first = evolve(tl, A, stop=u)
        rest = evolve(tl, first.final, start=u)
        after = ta.flip_times > u
        fails["markov"] += not (np.array_equal(rest.flip_times, ta.flip_times[after])
                                and np.array_equal(rest.flip_vertices, ta.flip_vertices[after])
                                and np.array_equal(rest.final, ta.final))
        # trees (at most 50 vertices) and d = 2 lattices (at most 49 vertices)
        d, L = [(1, 20), (2, 3), (3, 2), (4, 2)][i % 4]
        tree = build_topology("tree", {"d": d, "L": L})
        ttl = generate_timeline(tree, lam, (0.0, width), RngKey(seed + 1, i))
        fails["tree"] += not (constrained_tree_process(ttl) <= evolve(ttl, ones(tree)))
        lat = build_topology("lattice", {"d": 2, "R": int(rng.integers(1, 4))})
        ltl = generate_timeline(lat, lam, (0.0, width), RngKey(seed + 2, i))
        fails["slab"] += not (slab_process(ltl, int(rng.integers(1, 4))) <= evolve(ltl, ones(lat)))
    return fails


def test_criterion_01_pathwise_invariants():
    with Timer() as tm:
        fails = _pathwise_failures(1000, seed=9001)
    ok = sum(fails.values()) == 0 and tm.seconds < 60
    record(1, ok, f"1000 timelines, failures {fails}", tm.seconds)
    assert sum(fails.values()) == 0, fails
    assert tm.seconds < 60


# --- 2. oracle equivalence ---------------------------------------------------------------------

def small_graphs():
    """Every connected graph on 1..4 vertices up to isomorphism."""
    for g in nx.graph_atlas_g()[1:19]:
        if nx.is_connected(g):
            yield build_topology("explicit", {"n": g.number_of_nodes(),
                                          "edges": sorted(g.edges()), "origin": 0})


def test_criterion_02_oracle_equivalence():
    replicas, worst, cases = 100_000, 0.0, 0
    analytic_gap = 0.0
    with Timer() as tm:
        for t in (0.5, 1.0, 2.0):
            single = build_topology("explicit", {"n": 1, "edges": []})
            analytic_gap = max(analytic_gap,
                               abs(ctmc_oracle(single, 2.0, [1], t).marginal(0) - math.exp(-t)))
            for k in (1, 2, 3, 4):
                line = build_topology("half-line", {"n": k})
                p0 = ctmc_oracle(line, 0.0, np.ones(k), t).prob([0] * k)
                analytic_gap = max(analytic_gap, abs(p0 - (1 - math.exp(-t)) ** k))
        for gi, top in enumerate(small_graphs()):
            init = np.ones(top.n_vertices, np.uint8)
            for lam in (0.0, 0.5, 2.0):
                for t in (0.5, 1.0, 2.0):
                    p = ctmc_oracle(top, lam, init, t).probs
                    counts = monte_carlo_counts(top, lam, init, t, 2024 + gi, replicas)
                    se = np.sqrt(p * (1 - p) / replicas)
                    diff = counts / replicas - p
                    z = np.where(se > 0, np.abs(diff) / np.where(se > 0, se, 1),
                                 np.where(diff == 0, 0.0, np.inf))
                    worst = max(worst, float(z.max()))
                    cases += 1
    ok = worst <= 4.0 and analytic_gap <= 1e-10 and tm.seconds < 300
    record(2, ok, f"{cases} cases, max |z| = {worst:.2f}, analytic gap {analytic_gap:.1e}",
           tm.seconds)
    assert analytic_gap <= 1e-10
    assert worst <= 4.0
    assert tm.seconds < 300


# --- 3. spin-flip stationary density --------------------------------------------------------

def test_criterion_03_spin_flip_density():
    top = build_topology("half-line", {"n": 10_000})
    times = 10.0 + np.arange(10)
    rows = []
    with Timer() as tm:
        for alpha in (0.5, 1.0, 3.0):
            params = SpinFlipParams(alpha)
            traj = spin_flip_evolve(top, params, ones(top), (0.0, float(times[-1])),
                                    RngKey(3000, int(alpha * 10)))
            per_site = traj.states_at(times).mean(axis=0)
            est = mean_estimate(per_site, 0.99)
            rows.append((alpha, params.rho, est))
    ok = all(e.lo <= rho <= e.hi for _, rho, e in rows) and tm.seconds < 60
    detail = ", ".join(f"alpha={a}: {e.value:.4f} [{e.lo:.4f}, {e.hi:.4f}] vs {rho:.4f}"
                       for a, rho, e in rows)
    record(3, ok, detail, tm.seconds)
    for _, rho, e in rows:
        assert e.lo <= rho <= e.hi
    assert tm.seconds < 60


# --- 4. half-line survival, tails and zero runs --------------------------------------------

def test_criterion_04_halfline():
    with Timer() as tm:
        rep = run_experiment(preset("halfline-spinflip"))
    s = rep.summary
    tail = s["tail"]
    detail = (f"eps={tail['epsilon_hat']['value']:.4f} "
              f"[{tail['epsilon_hat']['ci_lo']:.4f}, {tail['epsilon_hat']['ci_hi']:.4f}], "
              f"c={tail['c_hat']:.4f} [{tail['c_lo']:.4f}, {tail['c_hi']:.4f}], "
              f"f-violations={len(s['monotone_violations'])}, "
              f"zero-run R2={s['zero_run_fit']['r_squared']:.3f}")
    ok = rep.verdict == PASS and tm.seconds < 600
    record(4, ok, detail, tm.seconds)
    assert s["pilot"]["supercritical"]
    assert tail["epsilon_hat"]["ci_lo"] > 0
    assert tail["c_hat"] > 0 and tail["c_lo"] > 0
    assert s["monotone_violations"] == [] and not s["surface_starved"]
    assert s["zero_run_fit"]["r_squared"] >= 0.9
    assert tm.seconds < 600


# --- 5. tree structure ---------------------------------------------------------------------------

def _profile_formula(d: int, L: int) -> list:
    # by label enumeration: the root and every vertex whose last label is not 1
    out = []
    for n in range(1, L + 1):
        sizes = [1] + [(d + 1) * d ** (k - 1) for k in range(1, n + 1)]
        # a vertex ends in label 1 iff it is the first child of its parent
        parents = [1] + [(d + 1) * d ** (k - 2) for k in range(2, n + 1)]
        in_delta = [1] + [s - p for s, p in zip(sizes[1:], parents)]
        out.append(Fraction(sum(in_delta), sum(sizes)))
    return out


def test_criterion_05_tree_structure():
    with Timer() as tm:
        profile_ok, rays_ok, gaps = True, True, []
        for d in (2, 3):
            top = build_topology("tree", {"d": d, "L": 8})
            delta = tree_delta(top)
            prof = list(density_profile(top, delta, 8))
            profile_ok &= prof == _profile_formula(d, 8)
            gap = [abs(p - Fraction(d - 1, d)) for p in prof]
            profile_ok &= all(a > b for a, b in zip(gap, gap[1:]))
            gaps.append(float(gap[-1]))
            seen = np.zeros(top.n_vertices, dtype=int)
            for x in delta.members:
                seen[ray(top, int(x))] += 1
            rays_ok &= bool(np.all(seen == 1))
            rays_ok &= bool(np.all(tree_delta(top).mask[ray_ids(top)]))
        rep = run_experiment(preset("tree-ray"))
    law_ok = rep.summary["law_match"] and rep.summary["constrained_below_contact"]
    ok = profile_ok and rays_ok and law_ok and tm.seconds < 300
    record(5, ok, f"profile exact={profile_ok} (gap at depth 8: {gaps[0]:.4f}, {gaps[1]:.4f}), "
                  f"rays disjoint={rays_ok}, law match={law_ok}", tm.seconds)
    assert profile_ok and rays_ok
    assert law_ok, rep.files["zero_runs.csv"]
    assert tm.seconds < 300


# --- 6. domination criterion on Z^1 ---------------------------------------------------------------

def test_criterion_06_domination_and_renewal():
    with Timer() as tm:
        finite = run_experiment(preset("finite-set"))
        slab = run_experiment(preset("slab"))
        renewal = run_experiment(preset("renewal"))
    f, s, r = finite.summary, slab.summary, renewal.summary
    ok = (finite.verdict == PASS and slab.verdict == PASS and renewal.verdict == PASS
          and tm.seconds < 600)
    record(6, ok, f"finite-set rho={f['rho_hat']:.4f} {f['verdict']}, "
                  f"slab rho={s['rho_hat']:.4f} {s['verdict']}, "
                  f"renewal R2={r['fit']['r_squared']:.3f} decidable={r['decidable']} "
                  f"inclusion={r['event_inclusion']}", tm.seconds)
    for rep in (finite, slab):
        assert rep.summary["n_samples"] >= 10_000
        assert rep.summary["verdict"] == "PASS" and rep.summary["rho_hat"] > 0
    assert r["decidable"] and r["event_inclusion"]
    assert r["fit"]["r_squared"] >= 0.9 and r["fit"]["slope"] < 0
    assert tm.seconds < 600


# --- 7. conditional criterion and cone mixing ------------------------------------------------------

def test_criterion_07_conditional_and_cone_mixing():
    with Timer() as tm:
        cond = run_experiment(preset("conditional"))
        cone = run_experiment(preset("cone-mixing"))
    c, m = cond.summary, cone.summary
    est = c["conditional"]
    ok = cond.verdict == PASS and cone.verdict == PASS and tm.seconds < 600
    record(7, ok, f"conditional {est['value']:.4f} (se {est['stderr']:.4f}, hits {est['n']}) "
                  f"vs rho={c['rho_hat']:.4f}; cone R2={m['fit']['r_squared']:.3f} "
                  f"slope={m['fit']['slope']:.3f}, Phi decreasing={m['phi_strictly_decreasing']}, "
                  f"delta(0)={m['delta'][0]['value']:.4f} vs 1-rho={1 - m['rho_hat']:.4f}",
           tm.seconds)
    assert not est["insufficient"]
    assert est["value"] >= c["rho_hat"] - 2 * est["stderr"]
    assert m["fit"]["r_squared"] >= 0.85 and m["fit"]["slope"] < 0
    assert m["phi_strictly_decreasing"]
    assert m["delta0_matches"]
    assert tm.seconds < 600


# --- 8. obstruction table ---------------------------------------------------------------------------

def test_criterion_08_obstruction_table():
    cfg = preset("obstruction")
    with Timer() as tm:
        rep = run_experiment(cfg)
    s = rep.summary
    nu0 = s["nu0"]["value"]
    lam = cfg.lam
    # hand arithmetic: |B(n)| = 2n + 1, shell 2, d_max 2
    hand_ok = True
    table = {}
    for line in rep.files["obstruction.csv"].splitlines()[1:]:
        n, T, ball, shell, alpha = line.split(",")[:5]
        n, T, alpha = int(n), float(T), float(alpha)
        table[(n, T)] = alpha
        hand_ok &= int(ball) == 2 * n + 1 and int(shell) == 2
        if math.isinf(T):
            hand_ok &= alpha == float(Fraction(4 * int(lam), 2 * n + 1))
        else:
            expect = -math.log(nu0) / T + 4 * lam / (2 * n + 1)
            hand_ok &= math.isclose(alpha, expect, rel_tol=1e-12)
    ok = rep.verdict == PASS and hand_ok and tm.seconds < 300
    record(8, ok, f"nu0={nu0:.4f}, analytic rows exact={s['analytic_ok']}, hand arithmetic="
                  f"{hand_ok}, decreasing={s['decreasing']}", tm.seconds)
    assert s["analytic_ok"] and hand_ok and s["decreasing"]
    assert tm.seconds < 300


# --- 9. dFKG ------------------------------------------------------------------------------------------

def test_criterion_09_dfkg():
    with Timer() as tm:
        rep = run_experiment(preset("dfkg"))
    rows = rep.summary["rows"]
    worst = min(r["cov"] / r["stderr"] for r in rows if not r["insufficient"] and r["stderr"] > 0)
    ok = rep.verdict == PASS and len(rows) == 50 and tm.seconds < 600
    record(9, ok, f"{len(rows)} triples, starved {rep.summary['n_starved']}, "
                  f"min cov/se = {worst:.2f}", tm.seconds)
    assert len(rows) == 50 and rep.summary["n_starved"] == 0
    assert all(r["cov"] >= -3 * r["stderr"] for r in rows)
    assert tm.seconds < 600


# --- 10. reproducibility ------------------------------------------------------------------------------

REPRO_PRESETS = {"finite-set": 200, "renewal": 200, "halfline-spinflip": 300, "dfkg": 200,
                 "tree-ray": 40, "oracle-path3": 2000, "slab-scan": 40}


def _outputs(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.name != "manifest.json"}


def test_criterion_10_reproducibility(tmp_path):
    problems = []
    with Timer() as tm:
        for name, n in REPRO_PRESETS.items():
            a, b, c = tmp_path / f"{name}-a", tmp_path / f"{name}-b", tmp_path / f"{name}-c"
            codes = [main(["preset", name, "--replicas", str(n), "--out", str(a)]),
                     main(["preset", name, "--replicas", str(n), "--out", str(b)]),
                     main(["preset", name, "--replicas", str(n // 2), "--out", str(c)])]
            if any(code == 1 for code in codes):
                problems.append(f"{name}: run error {codes}")
                continue
            if _outputs(a) != _outputs(b):
                problems.append(f"{name}: rerun differs")
            for raw in (p for p in a.iterdir() if p.name.endswith("raw.csv")):
                full = raw.read_text().splitlines()
                half = (c / raw.name).read_text().splitlines()
                if full[: len(half)] != half:
                    problems.append(f"{name}: {raw.name} prefix differs")
    record(10, not problems, f"{len(REPRO_PRESETS)} presets rerun byte-identical, replica "
                             f"prefixes stable; problems: {problems or 'none'}", tm.seconds)
    assert not problems
