"""Lattice graphs over iterated carpet patterns.

Two graphs are attached to every level N.  The outer graph has the integer
lattice points of the scaled carpet as vertices, with an edge whenever two
vertices are at Euclidean distance 1.  The inner graph has one vertex per
retained level-N cell, sitting at the cell center (half-integer
coordinates), with edges between face-adjacent cells.  Half-integer
positions are stored as doubled integers so everything stays exact.

Both graphs are nested in their level-(N+1) counterparts (the pattern keeps
its origin block), so the degree a vertex would have in the infinite graph
is already visible one level up; builders record that as ``degree_ambient``.
The difference ``degree_ambient - degree_internal`` is the number of edges
leaking out of the level-N graph, which is what kills the random walk in the
Dirichlet operators built on top.
"""

from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .carpet import (cells_at_level, decode_points, encode_points,
                     half_open_partition)
from .errors import InputError, StructuralError


@dataclass
class LatticeGraph:
    kind: str                      # "outer" | "inner" | "crosswire"
    spec: object
    level: int
    coords: np.ndarray             # (n, d) int64; doubled when denominator=2
    denominator: int               # true position = coords / denominator
    edges: np.ndarray              # (E, 2) vertex indices, lex sorted
    degree_ambient: np.ndarray     # (n,)
    center_mask: np.ndarray = None  # crosswire only: True at cube centers
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_vertices(self):
        return len(self.coords)

    @property
    def dimension(self):
        return self.coords.shape[1]

    def true_coords(self):
        return self.coords / self.denominator

    def _key_base(self):
        return int(self.coords.max()) + 3 if len(self.coords) else 3

    def keys(self):
        if "keys" not in self._cache:
            self._cache["keys"] = encode_points(self.coords, self._key_base())
        return self._cache["keys"]

    def index_of(self, points, missing="raise"):
        """Vertex indices for coordinate rows (same denominator convention).

        Unknown points raise unless ``missing="mask"``, which returns -1.
        """
        points = np.atleast_2d(np.asarray(points, dtype=np.int64))
        keys = self.keys()
        probe = encode_points(points, self._key_base())
        pos = np.searchsorted(keys, probe)
        pos[pos >= len(keys)] = len(keys) - 1
        ok = keys[pos] == probe
        # points beyond the coordinate range encode out of band; they can
        # only produce ok=False, never a collision
        if not ok.all():
            if missing == "raise":
                bad = points[~ok][0]
                raise InputError(f"point {tuple(bad)} is not a vertex")
            pos = np.where(ok, pos, -1)
        return pos

    def degree_internal(self):
        if "deg_int" not in self._cache:
            deg = np.zeros(self.n_vertices, dtype=np.int64)
            np.add.at(deg, self.edges[:, 0], 1)
            np.add.at(deg, self.edges[:, 1], 1)
            self._cache["deg_int"] = deg
        return self._cache["deg_int"]

    def adjacency_matrix(self):
        if "adj" not in self._cache:
            n = self.n_vertices
            u, v = self.edges[:, 0], self.edges[:, 1]
            a = sp.csr_matrix(
                (np.ones(2 * len(u)), (np.concatenate([u, v]),
                                       np.concatenate([v, u]))), shape=(n, n))
            self._cache["adj"] = a
        return self._cache["adj"]

    def two_coloring(self):
        """A proper 2-coloring.  Lattice kinds are bipartite by coordinate
        parity; the crosswire network by node type."""
        if self.kind == "crosswire":
            return self.center_mask.astype(np.int8)
        # doubled center coordinates all share one parity; color by cell
        base = (self.coords - 1) // 2 if self.denominator == 2 else self.coords
        color = (base.sum(axis=1) % 2).astype(np.int8)
        if len(self.edges):
            u, v = self.edges[:, 0], self.edges[:, 1]
            if (color[u] == color[v]).any():
                raise StructuralError("graph is not parity-bipartite")
        return color


def _lex_rows(a):
    return a[np.lexsort(a.T[::-1])]


def _corner_offsets(d, step=1):
    return np.array(list(product((0, step), repeat=d)), dtype=np.int64)


def _axis_strides(base, d):
    return [base ** (d - 1 - i) for i in range(d)]


def _edges_from_keys(keys, base, d, step=1):
    """Edges (i, j) between key-sorted vertices that differ by ``step``
    along one axis."""
    pairs = []
    for s in _axis_strides(base, d):
        probe = keys + step * s
        pos = np.searchsorted(keys, probe)
        pos[pos >= len(keys)] = len(keys) - 1
        ok = keys[pos] == probe
        pairs.append(np.stack([np.nonzero(ok)[0], pos[ok]], axis=1))
    edges = np.concatenate(pairs, axis=0)
    return _lex_rows(edges)


def _membership_count(keys, sorted_pool, base, d, step=1):
    """Per-key count of axis neighbors (both signs) present in the pool."""
    count = np.zeros(len(keys), dtype=np.int64)
    for s in _axis_strides(base, d):
        for sgn in (step, -step):
            probe = keys + sgn * s
            pos = np.searchsorted(sorted_pool, probe)
            pos[pos >= len(sorted_pool)] = len(sorted_pool) - 1
            count += sorted_pool[pos] == probe
    return count


def _ambient_cells(spec, n_level, max_cells=None):
    """Level-(N+1) cells with every coordinate <= ell**N, i.e. the part of
    the next level that decides infinite-graph membership near the level-N
    box.  Only the 2-per-axis corner blocks of the pattern can reach it."""
    side = spec.length_scale**n_level
    cells_n = cells_at_level(spec, n_level, max_cells=max_cells)
    parts = []
    for b in spec.cells:
        if max(b) > 1:
            continue
        shifted = side * np.array(b, dtype=np.int64) + cells_n
        keep = (shifted <= side).all(axis=1)
        parts.append(shifted[keep])
    return np.concatenate(parts, axis=0)


def build_outer_graph(spec, n_level, max_cells=None):
    """Integer lattice points of the scaled level-N carpet with unit edges.

    A lattice point belongs iff it lies in the closure of a retained cell,
    i.e. it is a corner of one.  Ambient degrees are read off the nested
    level-(N+1) graph restricted to the box, where they are already final.
    """
    d, ell = spec.dimension, spec.length_scale
    side = ell**n_level
    cells = cells_at_level(spec, n_level, max_cells=max_cells)
    base = side + 3
    offs = _corner_offsets(d)
    pts = (cells[:, None, :] + offs[None, :, :]).reshape(-1, d)
    keys = np.unique(encode_points(pts, base))
    coords = decode_points(keys, base, d)
    edges = _edges_from_keys(keys, base, d)

    amb = _ambient_cells(spec, n_level, max_cells=max_cells)
    amb_pts = (amb[:, None, :] + offs[None, :, :]).reshape(-1, d)
    amb_keys = np.unique(encode_points(amb_pts, base))
    deg_amb = _membership_count(keys, amb_keys, base, d)
    return LatticeGraph("outer", spec, n_level, coords, 1, edges, deg_amb)


def build_inner_graph(spec, n_level, max_cells=None):
    """Cell-center graph of the level-N carpet.

    Vertices are the retained cells in lex order (one per cell, so the count
    is exactly m**N); coordinates are stored doubled, center of cell c at
    2c+1.  Edges join face-adjacent cells.  Ambient degrees come from the
    level-(N+1) cell set restricted to the box.
    """
    d, ell = spec.dimension, spec.length_scale
    side = ell**n_level
    cells = cells_at_level(spec, n_level, max_cells=max_cells)
    base = side + 3
    keys = encode_points(cells, base)   # already lex sorted
    edges = _edges_from_keys(keys, base, d)
    amb_keys = np.unique(encode_points(
        _ambient_cells(spec, n_level, max_cells=max_cells), base))
    deg_amb = _membership_count(keys, amb_keys, base, d)
    return LatticeGraph("inner", spec, n_level, 2 * cells + 1, 2, edges,
                        deg_amb)


def inner_cells(graph):
    """Cell coordinates of an inner graph (undoubled)."""
    if graph.kind != "inner":
        raise InputError("expected an inner graph")
    return (graph.coords - 1) // 2


# ---------------------------------------------------------------------------
# corner projection and cell-mean quadrature

def corner_indices(outer, inner):
    """(m, 2**d) outer-vertex indices of each inner cell's corner set."""
    cache = inner._cache.setdefault("corner_idx", {})
    key = id(outer)
    if key not in cache:
        d = inner.dimension
        cells = inner_cells(inner)
        offs = _corner_offsets(d)
        pts = (cells[:, None, :] + offs[None, :, :]).reshape(-1, d)
        cache[key] = outer.index_of(pts).reshape(len(cells), -1)
    return cache[key]


def project_to_inner(outer, inner, f):
    """Average an outer function over each cell's corner set.

    The projection is linear, maps nonnegative to nonnegative, and never
    increases the sup norm.  ``f`` may be (n,) or (n, k).
    """
    f = np.asarray(f, dtype=float)
    idx = corner_indices(outer, inner)
    return f[idx].mean(axis=1)


def mean_value_operator(spec, n_level, m_level, f):
    """Coarse-grain a function on level-M cell centers down to level N by
    averaging over descendants.

    ``f`` is indexed like ``cells_at_level(spec, m_level)`` (lex order; the
    inner-graph vertex order agrees with it) and the result like the level-N
    cells.  Constants are fixed and averages against the uniform cell
    measure are preserved.
    """
    if m_level < n_level:
        raise InputError("need m_level >= n_level")
    f = np.asarray(f, dtype=float)
    cells_m = cells_at_level(spec, m_level)
    if f.shape[0] != len(cells_m):
        raise InputError(
            f"f has {f.shape[0]} entries, expected {len(cells_m)}")
    shrink = spec.length_scale ** (m_level - n_level)
    anc = cells_m // shrink
    base = spec.length_scale**n_level + 1
    anc_keys = encode_points(anc, base)
    cells_n = cells_at_level(spec, n_level)
    cell_keys = encode_points(cells_n, base)
    slot = np.searchsorted(cell_keys, anc_keys)
    out = np.zeros(len(cells_n), dtype=float)
    np.add.at(out, slot, f)
    return out / spec.cell_count ** (m_level - n_level)


# ---------------------------------------------------------------------------
# observation windows and coarse conditioning sets

def cubic_neighborhood(graph, center, eps):
    """Vertex indices within sup-distance ``eps * ell**N`` of an anchor.

    ``center`` is either a point of the unit carpet (floats in [0, 1]^d,
    rounded to the nearest lattice vertex after scaling) or an integer
    lattice point at the graph's scale.
    """
    if graph.kind != "outer":
        raise InputError("cubic neighborhoods are defined on outer graphs")
    side = graph.spec.length_scale**graph.level
    center = np.asarray(center)
    if np.issubdtype(center.dtype, np.floating):
        anchor = np.floor(center * side + 0.5).astype(np.int64)
    else:
        anchor = center.astype(np.int64)
    radius = eps * side
    dist = np.abs(graph.coords - anchor[None, :]).max(axis=1)
    return np.nonzero(dist <= radius)[0]


@dataclass
class CoarseBlock:
    cell: tuple                 # level-(N-k) cell key of the partition block
    members: np.ndarray         # vertex indices assigned to the block
    rip: int                    # rip vertex inside the block, -1 if none
    interior: np.ndarray        # rip component of V_N minus grid
    ring: np.ndarray            # grid vertices adjacent to the interior


@dataclass
class CoarseSets:
    graph: LatticeGraph
    k: int
    x0: tuple
    z: tuple
    rip: np.ndarray             # vertex indices, one per retained block
    grid: np.ndarray            # vertex indices of the separating grid
    grid_mask: np.ndarray
    blocks: list


def default_anchor(spec, k):
    """Deepest vertex of the level-k block: maximal BFS distance to the box
    faces, lexicographically smallest among maximizers."""
    g = build_outer_graph(spec, k)
    side = spec.length_scale**k
    on_face = ((g.coords == 0) | (g.coords == side)).any(axis=1)
    if on_face.all():
        raise StructuralError("level too small: every vertex is on a face")
    dist = _bfs_distance(g.adjacency_matrix(), np.nonzero(on_face)[0])
    best = np.nonzero(dist == dist.max())[0]
    return tuple(int(v) for v in g.coords[best[0]])   # vertex order is lex


def _bfs_distance(adj, sources):
    n = adj.shape[0]
    dist = np.full(n, -1, dtype=np.int64)
    frontier = np.zeros(n, dtype=bool)
    frontier[sources] = True
    dist[sources] = 0
    level = 0
    while frontier.any():
        level += 1
        nxt = (adj @ frontier) > 0
        nxt &= dist < 0
        dist[nxt] = level
        frontier = nxt
    return dist


def coarse_sets(spec, n_level, k, x0=None, z=None, graph=None):
    """Rip points, separating grid, and block structure at block scale k.

    The grid consists of the vertices lying on some hyperplane
    ``x_i = (z - x0)_i mod ell**k``; rip points sit at ``z + ell**k * p``.
    With ``z = x0`` there is exactly one rip point per retained block and
    removing the grid leaves each in its own component.  The anchor must be
    strictly inside the level-k box so rip points stay off the grid.
    """
    if not 0 < k <= n_level:
        raise InputError(f"need 0 < k <= N, got k={k}, N={n_level}")
    d, ell = spec.dimension, spec.length_scale
    block = ell**k
    side = ell**n_level
    if x0 is None:
        x0 = default_anchor(spec, k)
    x0 = tuple(int(v) for v in x0)
    if any(not 0 < v < block for v in x0):
        raise InputError(f"anchor {x0} must be strictly inside the level-k box")
    if z is None:
        z = x0
    z = tuple(int(v) for v in z)
    if any(not 0 <= v < block for v in z):
        raise InputError(f"translation {z} outside the half-open level-k box")
    g = graph if graph is not None else build_outer_graph(spec, n_level)
    g.index_of(np.array([x0]))  # anchor must be a level-k vertex too

    shift = np.array(z, dtype=np.int64) - np.array(x0, dtype=np.int64)
    residue = (g.coords - shift[None, :]) % block
    grid_mask = (residue == 0).any(axis=1)
    grid_idx = np.nonzero(grid_mask)[0]

    ranges = [np.arange(0, (side - zi) // block + 1) for zi in z]
    mesh = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, d)
    rip_pts = np.array(z, dtype=np.int64)[None, :] + block * mesh
    rip_idx = g.index_of(rip_pts, missing="mask")
    rip_idx = np.sort(rip_idx[rip_idx >= 0])
    if grid_mask[rip_idx].any():
        raise StructuralError("rip points touch the grid; anchor is invalid")

    adj = g.adjacency_matrix()
    free = ~grid_mask
    sub = adj[free][:, free]
    _, labels_free = connected_components(sub, directed=False)
    labels = np.full(g.n_vertices, -1, dtype=np.int64)
    labels[free] = labels_free

    rip_by_label = {}
    for r in rip_idx:
        rip_by_label.setdefault(int(labels[r]), []).append(int(r))
    for rips in rip_by_label.values():
        if len(rips) > 1:
            raise StructuralError(f"grid fails to separate rip points {rips}")

    # member and grid-ring lists per rip component, from single edge passes
    members_of = {lab: np.nonzero(labels == lab)[0] for lab in rip_by_label}
    ring_of = {lab: set() for lab in rip_by_label}
    eu, ev = g.edges[:, 0], g.edges[:, 1]
    for a, b in ((eu, ev), (ev, eu)):
        cross = grid_mask[a] & ~grid_mask[b]
        for gv, lab in zip(a[cross], labels[b[cross]]):
            if int(lab) in ring_of:
                ring_of[int(lab)].add(int(gv))

    part = half_open_partition(spec, n_level - k, n_level, points=g.coords)
    owner_keys = encode_points(part.owner, ell ** (n_level - k) + 1)
    order = np.argsort(owner_keys, kind="stable")
    bounds = np.nonzero(np.diff(owner_keys[order]))[0] + 1
    groups = np.split(order, bounds)
    rip_set = {int(r) for r in rip_idx}
    blocks = []
    for members in groups:
        cell = tuple(int(v) for v in part.owner[members[0]])
        in_block = [int(r) for r in members if int(r) in rip_set]
        if len(in_block) > 1:
            # a translated grid can push a spare boundary rip point into a
            # neighboring block; keep the one matching the block position
            in_block = [r for r in in_block
                        if tuple(g.coords[r] // block) == cell]
        rip = in_block[0] if in_block else -1
        if rip >= 0:
            lab = int(labels[rip])
            interior = members_of[lab]
            ring = np.array(sorted(ring_of[lab]), dtype=np.int64)
        else:
            interior = np.empty(0, dtype=np.int64)
            ring = np.empty(0, dtype=np.int64)
        blocks.append(CoarseBlock(cell, members, rip, interior, ring))
    return CoarseSets(g, k, x0, z, rip_idx, grid_idx, grid_mask, blocks)
