"""Finite truncations of the graphs the contact process runs on.

Supported kinds: ``lattice`` (the box ``[-R, R]^d`` of Z^d), ``tree`` (the
homogeneous tree T_d, every vertex of degree ``d + 1``, cut at depth ``L``),
``half-line`` (the path ``0 .. n-1``), ``slab`` (``{0..k-1}^(d-1) x [-L, L]``)
and ``explicit`` (a user-supplied finite edge list).

Every truncated topology records a *safe radius*: the largest ``n`` for which
the ball ``B(n)`` around the origin is the same as in the untruncated graph.
Queries beyond it raise :class:`TruncationError` instead of silently returning
a biased answer.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

KINDS = ("lattice", "tree", "half-line", "slab", "explicit")
DEFAULT_VERTEX_BUDGET = 2_000_000


class TopologyError(ValueError):
    pass


class TruncationError(TopologyError):
    """A query would read past the part of the graph that is faithfully built."""


@dataclass(frozen=True, eq=False)
class GraphTopology:
    kind: str
    extent: dict
    boundary_policy: str
    origin: int
    indptr: np.ndarray
    indices: np.ndarray
    safe_radius: float
    coords: np.ndarray | None = None
    labels: tuple | None = None
    _dist: np.ndarray = field(default=None, repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.indptr) - 1

    @property
    def esrc(self) -> np.ndarray:
        """Sources of all directed edges (each undirected edge twice)."""
        return np.repeat(np.arange(self.n_vertices, dtype=np.int64), np.diff(self.indptr))

    @property
    def edst(self) -> np.ndarray:
        return self.indices

    @property
    def max_degree(self) -> int:
        return int(np.diff(self.indptr).max()) if self.n_vertices else 0

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges as sorted ``(u, v)`` pairs with ``u < v``."""
        s, d = self.esrc, self.edst
        keep = s < d
        return list(zip(s[keep].tolist(), d[keep].tolist()))

    def distances(self, source: int | None = None) -> np.ndarray:
        if source is None or source == self.origin:
            return self._dist
        return bfs_distances(self.indptr, self.indices, source)

    def vertex_of(self, coord) -> int:
        """Index of the lattice/slab vertex with the given coordinates."""
        if self.coords is None:
            raise TopologyError(f"{self.kind} topology has no coordinates")
        hits = np.flatnonzero((self.coords == np.asarray(coord)).all(axis=1))
        if len(hits) != 1:
            raise TopologyError(f"no vertex at {coord}")
        return int(hits[0])

    def vertex_of_label(self, label) -> int:
        if self.labels is None:
            raise TopologyError("topology has no tree labels")
        return _label_index(self)[tuple(label)]

    @property
    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.kind}|{sorted(self.extent.items())}|{self.boundary_policy}".encode())
        h.update(self.indptr.tobytes())
        h.update(self.indices.tobytes())
        return h.hexdigest()[:16]

    def edge_list_text(self) -> str:
        lines = [f"#vertices {self.n_vertices}"]
        lines += [f"{u} {v}" for u, v in self.edges()]
        return "\n".join(lines) + "\n"


def _label_index(top: GraphTopology) -> dict:
    index = top.__dict__.get("_label_index")
    if index is None:
        index = {lab: i for i, lab in enumerate(top.labels)}
        object.__setattr__(top, "_label_index", index)
    return index


@dataclass(frozen=True, eq=False)
class VertexSubset:
    topology_hash: str
    mask: np.ndarray
    provenance: str = "custom"

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    @property
    def members(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def __contains__(self, v) -> bool:
        return bool(self.mask[v])

    def __len__(self) -> int:
        return self.size


def subset(top: GraphTopology, members, provenance: str = "custom") -> VertexSubset:
    mask = np.zeros(top.n_vertices, dtype=bool)
    members = np.asarray(list(members), dtype=np.int64)
    if members.size and (members.min() < 0 or members.max() >= top.n_vertices):
        raise TopologyError("subset members must be vertices of the topology")
    mask[members] = True
    return VertexSubset(top.digest, mask, provenance)


def bfs_distances(indptr: np.ndarray, indices: np.ndarray, source: int) -> np.ndarray:
    n = len(indptr) - 1
    dist = np.full(n, -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in indices[indptr[v]:indptr[v + 1]]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def _csr(n: int, edges: Sequence[tuple[int, int]]):
    adj = [set() for _ in range(n)]
    for u, v in edges:
        if u == v:
            raise TopologyError(f"self-loop at {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise TopologyError(f"edge ({u}, {v}) outside vertex range")
        adj[u].add(v)
        adj[v].add(u)
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(a) for a in adj])
    indices = np.fromiter(
        (w for a in adj for w in sorted(a)), dtype=np.int64, count=int(indptr[-1]))
    return indptr, indices


def _finish(kind, extent, policy, origin, n, edges, safe_radius, coords=None, labels=None):
    indptr, indices = _csr(n, edges)
    dist = bfs_distances(indptr, indices, origin)
    if (dist < 0).any():
        raise TopologyError("topology is not connected")
    return GraphTopology(
        kind=kind, extent=dict(extent), boundary_policy=policy, origin=origin,
        indptr=indptr, indices=indices, safe_radius=safe_radius,
        coords=coords, labels=labels, _dist=dist)


def _grid_edges(coords: np.ndarray, lows, sizes, wrap_axes) -> list[tuple[int, int]]:
    d = coords.shape[1]
    strides = np.ones(d, dtype=np.int64)
    for i in range(d - 2, -1, -1):
        strides[i] = strides[i + 1] * sizes[i + 1]
    offs = coords - np.asarray(lows)
    idx = offs @ strides
    edges = []
    for axis in range(d):
        nxt = offs.copy()
        nxt[:, axis] += 1
        inside = nxt[:, axis] < sizes[axis]
        if axis in wrap_axes:
            nxt[:, axis] %= sizes[axis]
            inside[:] = True
        tgt = nxt @ strides
        edges += list(zip(idx[inside].tolist(), tgt[inside].tolist()))
    return edges


def _box(kind, extent, policy, lows, highs, wrap_axes, origin_coord, safe_radius, budget):
    sizes = [h - lo + 1 for lo, h in zip(lows, highs)]
    n = math.prod(sizes)
    if n > budget:
        raise TopologyError(f"{kind} extent gives {n} vertices > budget {budget}")
    for axis in wrap_axes:
        if sizes[axis] < 3:
            raise TopologyError("periodic direction needs at least 3 sites")
    coords = np.array(
        list(itertools.product(*[range(lo, h + 1) for lo, h in zip(lows, highs)])),
        dtype=np.int64).reshape(n, len(lows))
    edges = _grid_edges(coords, lows, sizes, wrap_axes)
    origin = int(np.flatnonzero((coords == np.asarray(origin_coord)).all(axis=1))[0])
    return _finish(kind, extent, policy, origin, n, edges, safe_radius, coords=coords)


def build_topology(kind: str, extent: dict, boundary_policy: str = "free",
                   max_vertices: int = DEFAULT_VERTEX_BUDGET) -> GraphTopology:
    """Build and validate a finite topology.

    ``extent`` keys per kind: lattice ``d, R``; tree ``d, L``; half-line ``n``;
    slab ``d, k, L``; explicit ``n, edges``. Vertex order is lexicographic in
    coordinates for lattices and slabs, breadth-first for trees.
    """
    if kind not in KINDS:
        raise TopologyError(f"unknown kind {kind!r}; expected one of {KINDS}")
    if boundary_policy not in ("free", "periodic"):
        raise TopologyError(f"unknown boundary policy {boundary_policy!r}")
    periodic = boundary_policy == "periodic"
    if periodic and kind not in ("lattice", "slab"):
        raise TopologyError(f"periodic boundary not available for {kind}")

    if kind == "half-line":
        n = int(extent["n"])
        if n < 1:
            raise TopologyError("half-line needs n >= 1")
        if n > max_vertices:
            raise TopologyError(f"half-line of {n} vertices > budget {max_vertices}")
        return _finish(kind, {"n": n}, boundary_policy, 0, n,
                       [(i, i + 1) for i in range(n - 1)], n - 1)

    if kind == "lattice":
        d, R = int(extent["d"]), int(extent["R"])
        if d < 1 or R < 0:
            raise TopologyError("lattice needs d >= 1 and R >= 0")
        wrap = tuple(range(d)) if periodic else ()
        return _box(kind, {"d": d, "R": R}, boundary_policy, [-R] * d, [R] * d,
                    wrap, [0] * d, R, max_vertices)

    if kind == "slab":
        d, k, L = int(extent["d"]), int(extent["k"]), int(extent["L"])
        if d < 2:
            raise TopologyError("slab needs d >= 2")
        if k < 1:
            raise TopologyError("slab width k must be >= 1")
        if L < 0:
            raise TopologyError("slab length L must be >= 0")
        wrap = (d - 1,) if periodic else ()
        return _box(kind, {"d": d, "k": k, "L": L}, boundary_policy,
                    [0] * (d - 1) + [-L], [k - 1] * (d - 1) + [L], wrap,
                    [0] * d, L, max_vertices)

    if kind == "tree":
        d, L = int(extent["d"]), int(extent["L"])
        if d < 1 or L < 0:
            raise TopologyError("tree needs d >= 1 and L >= 0")
        n = 1 + sum((d + 1) * d ** (j - 1) for j in range(1, L + 1))
        if n > max_vertices:
            raise TopologyError(f"tree of {n} vertices > budget {max_vertices}")
        labels = [(0,)]
        edges = []
        frontier = [0]
        for depth in range(1, L + 1):
            nxt = []
            for parent in frontier:
                branching = d + 1 if depth == 1 else d
                for i in range(1, branching + 1):
                    labels.append(labels[parent] + (i,))
                    edges.append((parent, len(labels) - 1))
                    nxt.append(len(labels) - 1)
            frontier = nxt
        return _finish(kind, {"d": d, "L": L}, boundary_policy, 0, len(labels),
                       edges, L, labels=tuple(labels))

    n = int(extent["n"])
    if n < 1 or n > max_vertices:
        raise TopologyError("explicit graph needs 1 <= n <= budget")
    edges = [tuple(map(int, e)) for e in extent.get("edges", [])]
    return _finish(kind, {"n": n, "edges": [list(e) for e in edges]},
                   boundary_policy, int(extent.get("origin", 0)), n, edges, math.inf)


def topology_from_dict(data: dict) -> GraphTopology:
    extent = {k: v for k, v in data.items() if k not in ("kind", "boundary_policy")}
    return build_topology(data["kind"], extent, data.get("boundary_policy", "free"))


def topology_to_dict(top: GraphTopology) -> dict:
    return {"kind": top.kind, **top.extent, "boundary_policy": top.boundary_policy}


def padded(top: GraphTopology, pad: int) -> tuple[GraphTopology, np.ndarray]:
    """A larger topology of the same kind plus the map inner vertex -> outer vertex.

    Lattices grow in every direction, slabs along their long axis, trees in
    depth and half-lines at their far end. Explicit graphs are returned as is.
    """
    pad = int(pad)
    ext = dict(top.extent)
    if top.kind == "explicit" or pad == 0:
        return top, np.arange(top.n_vertices, dtype=np.int64)
    if top.kind == "half-line":
        ext["n"] += pad
    elif top.kind == "lattice":
        ext["R"] += pad
    elif top.kind == "slab":
        ext["L"] += pad
    elif top.kind == "tree":
        ext["L"] += pad
    big = build_topology(top.kind, ext, top.boundary_policy)
    if top.kind in ("half-line", "tree"):
        # breadth-first / path order keeps the inner truncation as a prefix
        return big, np.arange(top.n_vertices, dtype=np.int64)
    lookup = {tuple(c): i for i, c in enumerate(big.coords.tolist())}
    return big, np.array([lookup[tuple(c)] for c in top.coords.tolist()], dtype=np.int64)


def _check_radius(top: GraphTopology, o: int, n: int) -> None:
    if n < 0:
        raise TopologyError("radius must be >= 0")
    offset = int(top.distances()[o])
    if offset + n > top.safe_radius:
        raise TruncationError(
            f"ball of radius {n} around {o} leaves the faithful region "
            f"(safe radius {top.safe_radius} from the origin)")


def ball(top: GraphTopology, n: int, o: int | None = None) -> VertexSubset:
    o = top.origin if o is None else o
    _check_radius(top, o, n)
    return VertexSubset(top.digest, top.distances(o) <= n, "ball")


def ball_sizes(top: GraphTopology, n_max: int, o: int | None = None) -> np.ndarray:
    o = top.origin if o is None else o
    _check_radius(top, o, n_max)
    dist = top.distances(o)
    return np.array([(dist <= n).sum() for n in range(n_max + 1)], dtype=np.int64)


def growth_exponent(top: GraphTopology, n_max: int, o: int | None = None) -> list[float]:
    """``|B(n)|**(1/n)`` for ``n = 1 .. n_max``."""
    sizes = ball_sizes(top, n_max, o)
    return [float(sizes[n]) ** (1.0 / n) for n in range(1, n_max + 1)]


def density_profile(top: GraphTopology, delta: VertexSubset, n_max: int,
                    o: int | None = None) -> list[Fraction]:
    """Exact ratios ``|delta ∩ B(n)| / |B(n)|`` for ``n = 1 .. n_max``."""
    o = top.origin if o is None else o
    _check_radius(top, o, n_max)
    dist = top.distances(o)
    out = []
    for n in range(1, n_max + 1):
        inside = dist <= n
        out.append(Fraction(int((inside & delta.mask).sum()), int(inside.sum())))
    return out


def _require_tree(top: GraphTopology) -> None:
    if top.kind != "tree" or top.labels is None:
        raise TopologyError("operation needs a labelled tree topology")


def tree_delta(top: GraphTopology) -> VertexSubset:
    """Vertices whose label does not end in 1 (the root, label ``(0,)``, included)."""
    _require_tree(top)
    mask = np.array([len(lab) == 1 or lab[-1] != 1 for lab in top.labels])
    return VertexSubset(top.digest, mask, "tree-delta")


def ray(top: GraphTopology, x: int) -> list[int]:
    """``x`` followed by its child labelled 1, that child's child labelled 1, ...

    down to the truncation depth.
    """
    _require_tree(top)
    lab = top.labels[x]
    if len(lab) > 1 and lab[-1] == 1:
        raise TopologyError(f"vertex {x} (label {lab}) is not in the tree delta set")
    index = _label_index(top)
    out = [x]
    while True:
        lab = lab + (1,)
        nxt = index.get(lab)
        if nxt is None:
            return out
        out.append(nxt)


def ray_ids(top: GraphTopology) -> np.ndarray:
    """For every vertex, the index of the delta vertex whose ray contains it."""
    _require_tree(top)
    index = _label_index(top)
    out = np.empty(top.n_vertices, dtype=np.int64)
    for v, lab in enumerate(top.labels):
        while len(lab) > 1 and lab[-1] == 1:
            lab = lab[:-1]
        out[v] = index[lab]
    return out


def sublattice(top: GraphTopology, m: int = 1) -> VertexSubset:
    """Lattice vertices whose last coordinate lies in ``{0, .., m-1}``."""
    if top.coords is None:
        raise TopologyError("sublattice needs a lattice or slab topology")
    last = top.coords[:, -1]
    return VertexSubset(top.digest, (last >= 0) & (last < m), "sublattice")


def slab_ids(top: GraphTopology, k: int) -> np.ndarray:
    """Slab index of each lattice vertex: blocks of width ``k`` in the first d-1 coordinates."""
    if top.kind != "lattice":
        raise TopologyError("slab partition needs a lattice topology")
    d = top.coords.shape[1]
    if d < 2:
        raise TopologyError("slab partition needs d >= 2")
    if k < 1:
        raise TopologyError("slab width k must be >= 1")
    if top.boundary_policy == "periodic":
        raise TopologyError("periodic wrap would join distinct slabs")
    blocks = np.floor_divide(top.coords[:, : d - 1], k)
    _, ids = np.unique(blocks, axis=0, return_inverse=True)
    return ids.reshape(-1).astype(np.int64)


def export_edge_list(top: GraphTopology, path) -> None:
    from .io import atomic_write_text
    atomic_write_text(path, top.edge_list_text())
