import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from contactlab import _kernels as K
from contactlab.analysis.oracle import ctmc_oracle, monte_carlo_counts
from contactlab.harris import (EventTimeline, RngKey, backward_death_time, backward_reachable,
                               evolve, extinction_time, extinction_times, generate_timeline,
                               indicator, ones, sample_upper_invariant, single, stationary_run,
                               zero_run_lengths, zero_run_probability, zeros)
from contactlab.stats import mean_estimate, proportion
from contactlab.topology import build_topology

from conftest import random_graph

graphs = st.builds(random_graph, st.integers(1, 50), st.integers(0, 10**6))
lams = st.sampled_from([0.0, 0.3, 1.0, 2.5])
seeds = st.integers(0, 2**31)


def states_on(traj, grid):
    return traj.states_at(np.sort(grid))


def all_flip_times(*trajs):
    ts = np.unique(np.concatenate([t.flip_times for t in trajs] + [[trajs[0].start,
                                                                  trajs[0].stop]]))
    return ts


def hand_timeline(top, events, window=(0.0, 10.0)):
    """Timeline from ``[(t, 'X', v)]`` / ``[(t, 'A', u, w)]`` tuples."""
    events = sorted(events)
    times = np.array([e[0] for e in events], dtype=float)
    kinds = np.array([K.CROSS if e[1] == "X" else K.ARROW for e in events], dtype=np.int8)
    src = np.array([e[2] for e in events], dtype=np.int64)
    dst = np.array([e[3] if e[1] == "A" else e[2] for e in events], dtype=np.int64)
    return EventTimeline(top, 1.0, window, RngKey(0, 0), times, kinds, src, dst)


# --- timeline generation ------------------------------------------------------------------

def test_regeneration_is_bit_identical(z1_small):
    a = generate_timeline(z1_small, 1.3, (0, 5), RngKey(3, 7))
    b = generate_timeline(z1_small, 1.3, (0, 5), RngKey(3, 7))
    c = generate_timeline(z1_small, 1.3, (0, 5), RngKey(3, 8))
    assert a.event_log_text() == b.event_log_text()
    assert a.event_log_text() != c.event_log_text()


def test_events_sorted_distinct_inside_window(z1_small):
    tl = generate_timeline(z1_small, 2.0, (-3.0, 4.0), RngKey(1, 1))
    assert np.all(np.diff(tl.times) > 0)
    assert tl.times[0] > -3.0 and tl.times[-1] < 4.0


def test_zero_rate_has_no_arrows(z1_small):
    tl = generate_timeline(z1_small, 0.0, (0, 50), RngKey(2, 0))
    assert not np.any(tl.kinds == K.ARROW)
    with pytest.raises(ValueError):
        generate_timeline(z1_small, -1.0, (0, 1), RngKey(0, 0))


def test_streams_do_not_depend_on_graph_size():
    small = build_topology("half-line", {"n": 4})
    large = build_topology("half-line", {"n": 40})
    a = generate_timeline(small, 1.0, (0, 10), RngKey(5, 2))
    b = generate_timeline(large, 1.0, (0, 10), RngKey(5, 2))
    for v in range(4):
        assert np.array_equal(a.crosses(v), b.crosses(v))
    assert np.array_equal(a.arrows(1, 2), b.arrows(1, 2))


def test_cross_counts_are_poisson():
    top = build_topology("explicit", {"n": 10_000, "edges": [(i, i + 1) for i in range(9_999)]})
    tl = generate_timeline(top, 0.0, (0, 100), RngKey(11, 0))
    counts = np.bincount(tl.src, minlength=top.n_vertices)
    lo, hi = sps.norm.interval(0.99, loc=100, scale=math.sqrt(100 / top.n_vertices))
    assert lo <= counts.mean() <= hi
    assert counts.var() == pytest.approx(100, rel=0.1)


def test_uniforms_are_uniform():
    key = K.stream_key(1, 2, 0, 3, 3, 0)
    u = np.array([K.uniform(key, c) for c in range(20_000)])
    assert 0 < u.min() and u.max() < 1
    assert sps.kstest(u, "uniform").pvalue > 1e-3


# --- forward evolution ------------------------------------------------------------------------

def test_zero_configuration_is_absorbing(z1_small):
    tl = generate_timeline(z1_small, 3.0, (0, 10), RngKey(4, 0))
    traj = evolve(tl, zeros(z1_small))
    assert len(traj.flip_times) == 0 and not traj.final.any()


def test_lambda_zero_each_site_dies_at_first_cross(z1_small):
    tl = generate_timeline(z1_small, 0.0, (0, 3), RngKey(6, 0))
    traj = evolve(tl, ones(z1_small))
    for v in range(z1_small.n_vertices):
        cr = tl.crosses(v)
        ft, fv = traj.vertex_flips(v)
        if cr.size:
            assert ft.tolist() == [cr[0]] and fv.tolist() == [0]
        else:
            assert ft.size == 0


def test_lambda_zero_survival_is_exponential():
    top = build_topology("explicit", {"n": 1, "edges": []})
    counts = monte_carlo_counts(top, 0.0, [1], 1.0, 8, 100_000)
    est = proportion(int(counts[1]), 100_000)
    assert abs(est.value - math.exp(-1)) <= 4 * est.stderr


def test_path3_middle_marginal_against_oracle(path3):
    exact = ctmc_oracle(path3, 1.5, [1, 1, 1], 1.0).marginal(1)
    counts = monte_carlo_counts(path3, 1.5, np.ones(3, np.uint8), 1.0, 21, 100_000)
    states = np.arange(8)
    hits = int(counts[(states >> 1) & 1 == 1].sum())
    est = proportion(hits, 100_000)
    assert abs(est.value - exact) <= 3 * est.stderr


def test_flips_are_consistent_with_events(z1_small):
    tl = generate_timeline(z1_small, 1.5, (0, 6), RngKey(9, 3))
    traj = evolve(tl, ones(z1_small))
    event_at = {t: (k, s, d) for t, k, s, d in zip(tl.times, tl.kinds, tl.src, tl.dst)}
    for t, v, b in zip(traj.flip_times, traj.flip_vertices, traj.flip_values):
        k, s, d = event_at[t]
        if b == 0:
            assert k == K.CROSS and s == v
        else:
            assert k == K.ARROW and d == v
            assert traj.value_at(int(s), t) == 1


@given(top=graphs, lam=lams, seed=seeds, data=st.data())
def test_monotonicity(top, lam, seed, data):
    tl = generate_timeline(top, lam, (0, data.draw(st.floats(0.5, 10))), RngKey(seed, 0))
    rng = np.random.default_rng(seed)
    low = (rng.random(top.n_vertices) < 0.3).astype(np.uint8)
    high = np.maximum(low, (rng.random(top.n_vertices) < 0.3).astype(np.uint8))
    a, b = evolve(tl, low), evolve(tl, high)
    assert a <= b


@given(top=graphs, lam=lams, seed=seeds)
def test_additivity(top, lam, seed):
    tl = generate_timeline(top, lam, (0, 5), RngKey(seed, 1))
    rng = np.random.default_rng(seed)
    A = (rng.random(top.n_vertices) < 0.3).astype(np.uint8)
    B = (rng.random(top.n_vertices) < 0.3).astype(np.uint8)
    ta, tb, tab = evolve(tl, A), evolve(tl, B), evolve(tl, np.maximum(A, B))
    grid = all_flip_times(ta, tb, tab)
    assert np.array_equal(states_on(tab, grid), np.maximum(states_on(ta, grid), states_on(tb, grid)))


@given(top=graphs, lam=lams, seed=seeds, data=st.data())
def test_duality(top, lam, seed, data):
    tl = generate_timeline(top, lam, (0, 8), RngKey(seed, 2))
    s = data.draw(st.floats(0, 4))
    t = data.draw(st.floats(s, 8))
    y = data.draw(st.integers(0, top.n_vertices - 1))
    rng = np.random.default_rng(seed)
    A = rng.random(top.n_vertices) < 0.4
    reach = backward_reachable(tl, y, t, s)
    forward = evolve(tl, A.astype(np.uint8), start=s, stop=t).final[y]
    assert bool(A[reach].any()) == bool(forward)
    death = backward_death_time(tl, y, t, s)
    assert (death == -math.inf) == (reach.size > 0)


@given(top=graphs, lam=lams, seed=seeds, data=st.data())
def test_markov_restart(top, lam, seed, data):
    tl = generate_timeline(top, lam, (0, 6), RngKey(seed, 3))
    u = data.draw(st.floats(0, 6))
    init = ones(top)
    full = evolve(tl, init)
    first = evolve(tl, init, stop=u)
    rest = evolve(tl, first.final, start=u)
    after = full.flip_times > u
    assert np.array_equal(rest.flip_times, full.flip_times[after])
    assert np.array_equal(rest.flip_vertices, full.flip_vertices[after])
    assert np.array_equal(rest.final, full.final)


# --- backward paths ---------------------------------------------------------------------------

def test_backward_without_events_is_the_start_vertex(path3):
    tl = hand_timeline(path3, [])
    assert backward_reachable(tl, 1, 5.0, 1.0).tolist() == [1]


def test_backward_single_cross_kills(path3):
    tl = hand_timeline(path3, [(2.0, "X", 1)])
    assert backward_reachable(tl, 1, 5.0, 1.0).tolist() == []
    assert backward_death_time(tl, 1, 5.0) == 2.0
    assert backward_reachable(tl, 1, 5.0, 3.0).tolist() == [1]


def test_backward_follows_arrows_against_time(path3):
    # arrow 0 -> 1 at time 3, then a cross on 1 at time 2: the path escapes through 0
    tl = hand_timeline(path3, [(3.0, "A", 0, 1), (2.0, "X", 1)])
    assert backward_reachable(tl, 1, 5.0, 1.0).tolist() == [0]
    assert backward_death_time(tl, 1, 5.0) == -math.inf


def test_out_of_window_queries_rejected(path3):
    tl = hand_timeline(path3, [])
    with pytest.raises(ValueError):
        backward_reachable(tl, 0, 11.0, 1.0)
    with pytest.raises(ValueError):
        evolve(tl, np.ones(2, np.uint8))


# --- stationary sampling ------------------------------------------------------------------

def test_upper_invariant_lambda_zero_is_empty():
    top = build_topology("lattice", {"d": 1, "R": 50})
    s = sample_upper_invariant(top, 0.0, 20.0, RngKey(1, 0))
    assert s.density_end == 0.0 and s.pad == 10


def test_upper_invariant_increases_with_lambda():
    top = build_topology("lattice", {"d": 1, "R": 10})
    dens = {}
    for lam in (0.5, 2.0, 50.0):
        vals = [sample_upper_invariant(top, lam, 8.0, RngKey(2, r), pad=10).density_end
                for r in range(60)]
        dens[lam] = mean_estimate(vals)
    assert dens[0.5].hi < dens[2.0].lo
    assert dens[2.0].hi < dens[50.0].lo
    assert dens[50.0].value > 0.95


def test_upper_invariant_t_back_insensitive():
    top = build_topology("lattice", {"d": 1, "R": 10})
    a = mean_estimate([sample_upper_invariant(top, 2.0, 30.0, RngKey(3, r)).density_end
                       for r in range(300)])
    b = mean_estimate([sample_upper_invariant(top, 2.0, 60.0, RngKey(4, r)).density_end
                       for r in range(300)])
    assert abs(a.value - b.value) <= 1.96 * math.hypot(a.stderr, b.stderr)


def test_stationarity_diagnostic():
    top = build_topology("lattice", {"d": 1, "R": 10})
    samples = [sample_upper_invariant(top, 2.0, 20.0, RngKey(5, r)) for r in range(300)]
    diff = mean_estimate([s.density_end - s.density_mid for s in samples])
    assert diff.lo <= 0.0 <= diff.hi


# --- extinction ---------------------------------------------------------------------------------

def test_isolated_vertex_extinction_is_exp1():
    top = build_topology("explicit", {"n": 1, "edges": []})
    taus = extinction_times(top, 0, 3.0, 100.0, 13, 10_000)
    est = mean_estimate(taus)
    assert est.lo <= 1.0 <= est.hi


def test_lambda_zero_extinction_is_exp1_anywhere():
    top = build_topology("lattice", {"d": 2, "R": 3})
    taus = extinction_times(top, top.origin, 0.0, 100.0, 14, 10_000)
    assert sps.kstest(taus, "expon").pvalue > 1e-3


def test_lazy_extinction_matches_event_list():
    top = build_topology("half-line", {"n": 30})
    for r in range(200):
        eager = K.extinction_run(top.n_vertices, top.esrc, top.edst, 2.0, 0, 20.0, 17, r)
        lazy = extinction_time(top, 0, 2.0, 20.0, RngKey(17, r))
        assert (lazy.tau if not lazy.censored else -1.0) == eager


def test_censored_sample_is_alive_at_horizon():
    top = build_topology("half-line", {"n": 200})
    for r in range(50):
        s = extinction_time(top, 0, 2.0, 30.0, RngKey(19, r))
        if s.censored:
            tl = generate_timeline(top, 2.0, (0, 30.0), RngKey(19, r))
            assert evolve(tl, single(top, 0)).final.any()
            break
    else:
        pytest.fail("no censored sample in 50 replicas")


# --- zero runs ------------------------------------------------------------------------------------

def test_zero_run_trivial_cases(path3):
    tl = hand_timeline(path3, [(2.0, "A", 1, 0), (4.0, "X", 0)])
    traj = evolve(tl, indicator(path3, [1]))
    # vertex 2 is never infected
    assert traj.is_zero_on(2, 0.0, 10.0)
    # vertex 0 flips to 1 at time 2 (inside [1, 3)), back to 0 at 4
    assert not traj.is_zero_on(0, 1.0, 3.0)
    assert traj.is_zero_on(0, 4.0, 10.0)
    assert zero_run_probability([traj], 2, 0.0, 5.0).value == 1.0
    assert zero_run_lengths(traj, 0, at=5.0) == (1.0, 5.0)


@given(top=graphs, seed=seeds, data=st.data())
def test_zero_run_lengths_agree_with_interval_checks(top, seed, data):
    tl = generate_timeline(top, 1.0, (-5, 5), RngKey(seed, 4))
    traj = evolve(tl, ones(top))
    x = data.draw(st.integers(0, top.n_vertices - 1))
    back, fwd = zero_run_lengths(traj, x, 0.0)
    for t in (0.3, 1.0, 2.5):
        if t != fwd:
            assert traj.is_zero_on(x, 0.0, t) == (t <= fwd)
    for u in (0.3, 1.0, 2.5):
        if u < 5 and u != back:
            assert traj.is_zero_on(x, -u, 0.0) == (u <= back)


def test_stationary_zero_runs_decay_log_linearly():
    from contactlab.stats import log_linear_fit
    top = build_topology("lattice", {"d": 1, "R": 0})
    fwd = []
    for r in range(3000):
        run = stationary_run(top, 2.0, 20.0, 11.0, RngKey(23, r))
        fwd.append(zero_run_lengths(run.trajectory, int(run.inner[0]), 0.0)[1])
    fwd = np.array(fwd)
    t = np.arange(1, 11)
    p = np.array([(fwd >= s).mean() for s in t])
    fit = log_linear_fit(t, p)
    assert fit.slope < 0 and fit.r_squared >= 0.95
