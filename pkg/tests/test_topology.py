from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from contactlab.topology import (TopologyError, TruncationError, ball,
                                 build_topology, density_profile, export_edge_list,
                                 growth_exponent, padded, ray, ray_ids, slab_ids, sublattice,
                                 subset, topology_from_dict, topology_to_dict, tree_delta)

from conftest import random_graph


def tree(d, L):
    return build_topology("tree", {"d": d, "L": L})


def test_half_line_is_a_path():
    top = build_topology("half-line", {"n": 3})
    assert top.n_vertices == 3
    assert top.edges() == [(0, 1), (1, 2)]


def test_tree_size_and_degrees():
    top = tree(2, 2)
    assert top.n_vertices == 10
    deg = np.diff(top.indptr)
    assert deg[0] == 3
    depth = np.array([len(lab) - 1 for lab in top.labels])
    assert np.all(deg[(depth > 0) & (depth < 2)] == 3)
    assert top.max_degree <= 3


def test_lattice_ball_counts():
    z2 = build_topology("lattice", {"d": 2, "R": 2})
    assert ball(z2, 2).size == 13
    assert ball(z2, 0).members.tolist() == [z2.origin]
    z1 = build_topology("lattice", {"d": 1, "R": 4})
    assert ball(z1, 2).size == 5
    assert ball(tree(2, 3), 2).size == 10


def test_ball_past_safe_radius_raises():
    z1 = build_topology("lattice", {"d": 1, "R": 3})
    with pytest.raises(TruncationError):
        ball(z1, 4)


def test_vertex_budget_and_slab_width_checked():
    with pytest.raises(TopologyError):
        build_topology("lattice", {"d": 3, "R": 50}, max_vertices=1000)
    with pytest.raises(TopologyError):
        build_topology("slab", {"d": 2, "k": 0, "L": 3})
    with pytest.raises(TopologyError):
        build_topology("tree", {"d": 2, "L": 3}, boundary_policy="periodic")


def test_growth_exponent():
    z1 = build_topology("lattice", {"d": 1, "R": 30})
    g = growth_exponent(z1, 30)
    assert g[0] == pytest.approx(3.0)
    assert g[-1] == pytest.approx(61 ** (1 / 30))
    assert all(a > b for a, b in zip(g, g[1:]))
    t2 = growth_exponent(tree(2, 12), 12)
    assert t2[-1] == pytest.approx((1 + sum(3 * 2 ** (k - 1) for k in range(1, 13))) ** (1 / 12))
    single = build_topology("explicit", {"n": 1, "edges": []})
    assert growth_exponent(single, 5) == [1.0] * 5


def test_density_profiles():
    z1 = build_topology("lattice", {"d": 1, "R": 20})
    even = subset(z1, np.flatnonzero(z1.coords[:, 0] % 2 == 0))
    prof = density_profile(z1, even, 20)
    assert prof[-1] == Fraction(21, 41)
    assert density_profile(z1, subset(z1, [z1.origin]), 3) == [Fraction(1, 3), Fraction(1, 5),
                                                               Fraction(1, 7)]
    assert density_profile(z1, subset(z1, []), 2) == [0, 0]


def test_tree_delta_small_cases():
    t = tree(2, 1)
    d = tree_delta(t)
    assert sorted(t.labels[v] for v in d.members) == [(0,), (0, 2), (0, 3)]
    # depth 2: root, two level-1 vertices, and one child (label 2) per level-1 vertex
    assert tree_delta(tree(2, 2)).size == 6


@pytest.mark.parametrize("d,L", [(2, 6), (3, 5)])
def test_tree_delta_by_label_recomputation(d, L):
    t = tree(d, L)
    mask = tree_delta(t).mask
    for v, lab in enumerate(t.labels):
        assert mask[v] == (len(lab) == 1 or lab[-1] != 1)
    per_level = {}
    for v, lab in enumerate(t.labels):
        per_level.setdefault(len(lab) - 1, []).append(mask[v])
    for level in range(2, L + 1):
        assert Fraction(sum(per_level[level]), len(per_level[level])) == Fraction(d - 1, d)


@pytest.mark.parametrize("d", [2, 3])
def test_density_profile_closed_form(d):
    L = 8 if d == 2 else 6
    t = tree(d, L)
    prof = density_profile(t, tree_delta(t), L)
    for n in range(2, L + 1):
        ball_n = 1 + sum((d + 1) * d ** (k - 1) for k in range(1, n + 1))
        deeper = sum((d + 1) * d ** (k - 1) for k in range(2, n + 1))
        assert prof[n - 1] == (Fraction(d - 1, d) * deeper + d + 1) / ball_n
    gaps = [abs(p - Fraction(d - 1, d)) for p in prof[1:]]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_rays():
    t = tree(2, 3)
    assert [t.labels[v] for v in ray(t, t.origin)] == [(0,), (0, 1), (0, 1, 1), (0, 1, 1, 1)]
    x = t.vertex_of_label((0, 2, 2))
    assert len(ray(t, x)) == 3 - 2 + 1
    with pytest.raises(TopologyError):
        ray(t, t.vertex_of_label((0, 1)))


@pytest.mark.parametrize("d,L", [(2, 7), (3, 4)])
def test_rays_partition_vertices(d, L):
    t = tree(d, L)
    seen = set()
    delta = tree_delta(t)
    for x in delta.members:
        r = set(ray(t, int(x)))
        assert not (r & seen)
        seen |= r
    assert seen == set(range(t.n_vertices))
    ids = ray_ids(t)
    for x in delta.members:
        assert set(np.flatnonzero(ids == x)) == set(ray(t, int(x)))


def test_slabs_and_sublattice():
    z2 = build_topology("lattice", {"d": 2, "R": 4})
    ids = slab_ids(z2, 3)
    for v, (a, b) in enumerate(z2.coords.tolist()):
        for w in z2.neighbors(v):
            if z2.coords[w, 0] == a:
                assert ids[w] == ids[v]
    assert len(np.unique(ids)) == 4      # first coordinate -4..4 cut into width-3 blocks
    plane = sublattice(z2)
    assert plane.size == 9 and np.all(z2.coords[plane.members, 1] == 0)
    with pytest.raises(TopologyError):
        slab_ids(build_topology("lattice", {"d": 1, "R": 4}), 2)


@given(n=st.integers(1, 40), seed=st.integers(0, 10_000))
def test_random_graph_invariants(n, seed):
    top = random_graph(n, seed)
    s, d = top.esrc, top.edst
    pairs = set(zip(s.tolist(), d.tolist()))
    assert all((b, a) in pairs for a, b in pairs)
    assert all(a != b for a, b in pairs)
    dist = np.array([top.distances(v) for v in range(n)])
    assert np.array_equal(dist, dist.T)
    rng = np.random.default_rng(seed)
    for a, b, c in rng.integers(n, size=(20, 3)):
        assert dist[a, c] <= dist[a, b] + dist[b, c]


def test_serialisation_and_padding(tmp_path):
    z2 = build_topology("lattice", {"d": 2, "R": 2})
    again = topology_from_dict(topology_to_dict(z2))
    assert again.digest == z2.digest
    big, inner = padded(z2, 3)
    assert big.extent["R"] == 5
    assert np.array_equal(big.coords[inner], z2.coords)
    export_edge_list(z2, tmp_path / "e.txt")
    lines = (tmp_path / "e.txt").read_text().splitlines()
    assert lines[0] == "#vertices 25" and len(lines) == 1 + 40


def test_periodic_lattice_is_regular():
    top = build_topology("lattice", {"d": 2, "R": 3}, boundary_policy="periodic")
    assert set(np.diff(top.indptr).tolist()) == {4}
