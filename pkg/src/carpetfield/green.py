"""Dirichlet operators, Green functions, capacities and resistances.

The central object is the killed Laplacian on a keep set K inside a lattice
graph: diagonal = ambient degree, off-diagonal -1 on edges inside K.  This
is the quadratic form of the walk on the infinite graph killed on leaving K,
and its matrix inverse is the Green function in the combinatorial
normalization: the one with the reproducing property

    energy(G(w, .), h) = h(w)

against the ambient Dirichlet form.  The random-walk expected-visit count is
recovered as G(x, y) * degree_ambient(y).

Quadratic forms in the inverse restricted Green matrix are always computed
through the Schur complement

    <f, (G restricted to S)^{-1} f> = <f, L_SS f> - <L_BS f, L_BB^{-1} L_BS f>

with B the complement of S, never by forming a dense inverse.  Dense
Cholesky is used only below ``dense_cap`` unknowns; mid sizes go through
sparse LU and large systems through CG with an algebraic-multigrid
preconditioner, with an explicit residual check either way.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .carpet import cells_at_level, encode_points
from .errors import InputError, NumericError, ResourceCapError, StructuralError
from .graphs import _corner_offsets, _lex_rows

DENSE_CAP = 1200
SPLU_CAP = 150_000
MAX_UNKNOWNS = 2_000_000
RESIDUAL_TOL = 1e-8


def _factorize(matrix, dense_cap=DENSE_CAP, splu_cap=SPLU_CAP):
    """Return (solve, backend) for an SPD sparse matrix."""
    n = matrix.shape[0]
    if n <= dense_cap:
        chol = sla.cho_factor(matrix.toarray())

        def solve(b):
            return sla.cho_solve(chol, b)
        return solve, "dense-cholesky"
    if n <= splu_cap:
        lu = spla.splu(matrix.tocsc())

        def solve(b):
            return lu.solve(np.asarray(b, dtype=float))
        return solve, "sparse-lu"
    import pyamg
    ml = pyamg.smoothed_aggregation_solver(matrix.tocsr(), max_coarse=500)

    def solve(b):
        b = np.asarray(b, dtype=float)
        if b.ndim == 1:
            return ml.solve(b, tol=1e-12, accel="cg", maxiter=400)
        return np.stack([ml.solve(col, tol=1e-12, accel="cg", maxiter=400)
                         for col in b.T], axis=1)
    return solve, "amg-cg"


class DirichletOperator:
    """Killed Laplacian on a keep set with a reusable factorization.

    ``keep`` indexes vertices of ``graph``; it defaults to all of them.
    Each connected component of the kept subgraph must leak at least one
    ambient edge, otherwise the operator is singular (the walk would never
    be killed) and a StructuralError is raised.
    """

    def __init__(self, graph, keep=None, dense_cap=DENSE_CAP,
                 splu_cap=SPLU_CAP, residual_tol=RESIDUAL_TOL,
                 max_unknowns=MAX_UNKNOWNS):
        self.graph = graph
        if keep is None:
            keep = np.arange(graph.n_vertices)
        keep = np.unique(np.asarray(keep, dtype=np.int64))
        if len(keep) == 0:
            raise InputError("keep set is empty")
        if len(keep) > max_unknowns:
            raise ResourceCapError(
                f"{len(keep)} unknowns exceed cap {max_unknowns}")
        self.keep = keep
        self.n = len(keep)
        self.residual_tol = residual_tol
        self._dense_cap = dense_cap
        self._splu_cap = splu_cap

        local = np.full(graph.n_vertices, -1, dtype=np.int64)
        local[keep] = np.arange(self.n)
        eu, ev = graph.edges[:, 0], graph.edges[:, 1]
        inside = (local[eu] >= 0) & (local[ev] >= 0)
        self.edges_local = np.stack(
            [local[eu[inside]], local[ev[inside]]], axis=1)
        self._local = local

        self.diag = graph.degree_ambient[keep].astype(float)
        u, v = self.edges_local[:, 0], self.edges_local[:, 1]
        adj = sp.csr_matrix(
            (np.ones(2 * len(u)), (np.concatenate([u, v]),
                                   np.concatenate([v, u]))),
            shape=(self.n, self.n))
        self.adjacency = adj
        deg_int = np.asarray(adj.sum(axis=1)).ravel()
        self.leak = self.diag - deg_int
        if (self.leak < -1e-9).any():
            raise StructuralError("ambient degree below internal degree")
        self.matrix = (sp.diags(self.diag) - adj).tocsc()

        ncomp, comp = connected_components(adj, directed=False)
        leak_per = np.zeros(ncomp)
        np.add.at(leak_per, comp, self.leak)
        if (leak_per <= 0).any():
            raise StructuralError(
                "a kept component has no killing: operator is singular "
                "(non-transient configuration)")

        self._solve, self.backend = _factorize(
            self.matrix, dense_cap, splu_cap)
        self._columns = {}
        self._complement = {}
        self._incidence = None

    # -- solves ------------------------------------------------------------

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        out = self._solve(rhs)
        self._check_residual(self.matrix, rhs, out)
        return out

    def _check_residual(self, matrix, rhs, out):
        denom = np.linalg.norm(rhs)
        if denom == 0:
            return
        res = np.linalg.norm(matrix @ out - rhs) / denom
        if res > self.residual_tol:
            raise NumericError(
                f"solve residual {res:.3e} above {self.residual_tol:.1e}")

    def green_column(self, w):
        """Green function G(., w) for a local keep index w."""
        w = int(w)
        if w not in self._columns:
            e = np.zeros(self.n)
            e[w] = 1.0
            self._columns[w] = self.solve(e)
        return self._columns[w]

    def green_entries(self, pairs):
        """G(u, v) at local index pairs, one solve per distinct column."""
        pairs = np.atleast_2d(np.asarray(pairs, dtype=np.int64))
        out = np.empty(len(pairs))
        for i, (u, v) in enumerate(pairs):
            out[i] = self.green_column(v)[u]
        return out

    def random_walk_green(self, pairs):
        """Expected visit counts of the killed walk: G(u, v) times the
        ambient degree of v.  Derived accessor; the combinatorial G is the
        canonical one everywhere else."""
        pairs = np.atleast_2d(np.asarray(pairs, dtype=np.int64))
        return self.green_entries(pairs) * self.diag[pairs[:, 1]]

    def green_diagonal(self):
        """Full diagonal of the Green matrix (dense-scale sizes only)."""
        if self.n > 2000:
            raise ResourceCapError(
                "full Green diagonal requires n <= 2000; solve columns "
                "selectively instead")
        eye = np.eye(self.n)
        return np.diagonal(self._solve(eye)).copy()

    # -- energies ----------------------------------------------------------

    def ambient_energy(self, f, g=None):
        """Dirichlet energy of kept functions inside the ambient graph:
        the kept-edge sum plus the leak edges against the zero exterior.
        Computed by explicit summation, independent of the solver path."""
        f = np.asarray(f, dtype=float)
        g = f if g is None else np.asarray(g, dtype=float)
        u, v = self.edges_local[:, 0], self.edges_local[:, 1]
        inner = np.sum((f[u] - f[v]) * (g[u] - g[v]))
        return float(inner + np.sum(self.leak * f * g))

    def quad_form_inverse_green(self, sub, f):
        """<f, (G_SS)^{-1} f> for S = ``sub`` (local indices) without any
        dense inverse, via the Schur complement of the complement block."""
        sub = np.unique(np.asarray(sub, dtype=np.int64))
        if len(sub) == 0:
            raise InputError("subset must be non-empty")
        f = np.asarray(f, dtype=float)
        if len(f) != len(sub):
            raise InputError("f must align with the subset")
        if len(sub) == self.n:
            return float(f @ (self.matrix @ f))
        mask = np.zeros(self.n, dtype=bool)
        mask[sub] = True
        comp_solve, l_bs = self._complement_context(sub)
        head = f @ (self.matrix[sub][:, sub] @ f)
        v = l_bs @ f
        return float(head - v @ comp_solve(v))

    def _complement_context(self, sub):
        key = hash(sub.tobytes())
        if key not in self._complement:
            mask = np.zeros(self.n, dtype=bool)
            mask[sub] = True
            rest = np.nonzero(~mask)[0]
            l_bb = self.matrix[rest][:, rest]
            l_bs = self.matrix[rest][:, sub]
            solve, _ = _factorize(l_bb, self._dense_cap, self._splu_cap)

            def checked(b):
                out = solve(b)
                self._check_residual(l_bb, b, out)
                return out
            self._complement = {key: (checked, l_bs)}  # keep only the latest
        return self._complement[key]

    # -- potentials --------------------------------------------------------

    def harmonic_extension(self, interior, values):
        """Replace ``values`` on ``interior`` (local indices) by the
        harmonic extension of the remaining kept values, zero outside."""
        interior = np.unique(np.asarray(interior, dtype=np.int64))
        out = np.array(values, dtype=float)
        mask = np.zeros(self.n, dtype=bool)
        mask[interior] = True
        rest = np.nonzero(~mask)[0]
        l_ii = self.matrix[interior][:, interior]
        l_ib = self.matrix[interior][:, rest]
        solve, _ = _factorize(l_ii, self._dense_cap, self._splu_cap)
        rhs = -(l_ib @ out[rest])
        u = solve(rhs)
        self._check_residual(l_ii, rhs, u)
        out[interior] = u
        return out

    def equilibrium_potential(self, target):
        """Equilibrium potential, measure and capacity of a target set.

        The potential is 1 on the target, harmonic elsewhere in the keep
        set, zero outside.  The measure is the (nonnegative) killed
        Laplacian applied to the potential, supported on the target; its
        total mass equals the capacity, which is returned as the explicit
        ambient energy of the potential.
        """
        target = np.unique(np.asarray(target, dtype=np.int64))
        e = np.zeros(self.n)
        e[target] = 1.0
        mask = np.zeros(self.n, dtype=bool)
        mask[target] = True
        rest = np.nonzero(~mask)[0]
        if len(rest):
            e = self.harmonic_extension(rest, e)
        mu_full = self.matrix @ e
        mu = mu_full[target]
        cap = self.ambient_energy(e, e)
        return e, mu, cap

    # -- sampling support --------------------------------------------------

    def incidence_factor(self):
        """Sparse B with B^T B = matrix: one row per kept edge and one
        sqrt-leak row per leaking vertex.  Used for exact field sampling."""
        if self._incidence is None:
            u, v = self.edges_local[:, 0], self.edges_local[:, 1]
            ne = len(u)
            leaky = np.nonzero(self.leak > 0)[0]
            rows = np.concatenate([np.arange(ne), np.arange(ne),
                                   ne + np.arange(len(leaky))])
            cols = np.concatenate([u, v, leaky])
            vals = np.concatenate([np.ones(ne), -np.ones(ne),
                                   np.sqrt(self.leak[leaky])])
            self._incidence = sp.csr_matrix(
                (vals, (rows, cols)), shape=(ne + len(leaky), self.n))
        return self._incidence


# ---------------------------------------------------------------------------
# free functions mirroring the operator methods

def assemble(graph, keep=None, **kwargs):
    return DirichletOperator(graph, keep, **kwargs)


def green_entries(op, pairs):
    return op.green_entries(pairs)


def green_column(op, w):
    return op.green_column(w)


def quad_form_inverse_green(op, sub, f):
    return op.quad_form_inverse_green(sub, f)


def harmonic_extension(op, interior, values):
    return op.harmonic_extension(interior, values)


def equilibrium_potential(op, target):
    return op.equilibrium_potential(target)


def dirichlet_energy(graph_or_edges, f, g=None):
    """Plain edge-sum Dirichlet energy sum_{u~v} (f_u - f_v)(g_u - g_v)
    over unordered edges of a graph (no ambient leak terms)."""
    edges = getattr(graph_or_edges, "edges", graph_or_edges)
    f = np.asarray(f, dtype=float)
    g = f if g is None else np.asarray(g, dtype=float)
    u, v = edges[:, 0], edges[:, 1]
    return float(np.sum((f[u] - f[v]) * (g[u] - g[v])))


def green_form(op, h, n_level, rho_hat):
    """Scaled quadratic form of the Green function against a density given
    on the kept vertices: rho^-N |K|^-2 sum_{w,w'} G(w,w') h(w) h(w')."""
    h = np.asarray(h, dtype=float)
    val = float(h @ op.solve(h))
    return rho_hat ** (-n_level) * val / op.n**2


# ---------------------------------------------------------------------------
# crosswire resistance networks

@dataclass(frozen=True)
class ResistanceScale:
    spec_id: str
    levels: tuple
    resistances: tuple
    ratios: tuple
    rho_hat: float


def crosswire_resistance(spec, n_level, max_cells=None, return_graph=False):
    """Effective resistance of the corner-to-center wire network.

    Every retained level-N cube contributes a unit resistor from each of its
    2**d corners to its center; the two opposite faces x_1 = 0 and
    x_1 = ell**N are shorted exactly, by merging their corner nodes into
    terminal super-nodes.  Returns the resistance between the terminals.
    """
    from .graphs import LatticeGraph

    d, ell = spec.dimension, spec.length_scale
    side = ell**n_level
    cells = cells_at_level(spec, n_level, max_cells=max_cells)
    base = 2 * side + 3
    offs = _corner_offsets(d, step=2)
    corner_keys = np.unique(encode_points(
        (2 * cells[:, None, :] + offs[None, :, :]).reshape(-1, d), base))
    x1 = corner_keys // base ** (d - 1)
    is_s = x1 == 0
    is_t = x1 == 2 * side
    mid_keys = corner_keys[~is_s & ~is_t]
    nmid = len(mid_keys)
    s_id, t_id = nmid, nmid + 1
    ncent = len(cells)
    cent0 = nmid + 2
    n_nodes = cent0 + ncent

    rows = []
    cols = []
    cent_ids = cent0 + np.arange(ncent)
    for off in offs:
        ck = encode_points(2 * cells + off[None, :], base)
        pos = np.searchsorted(mid_keys, ck)
        pos[pos >= max(nmid, 1)] = max(nmid, 1) - 1
        hit = mid_keys[pos] == ck if nmid else np.zeros(len(ck), dtype=bool)
        node = np.where(hit, pos, -1)
        cx1 = ck // base ** (d - 1)
        node = np.where(cx1 == 0, s_id, node)
        node = np.where(cx1 == 2 * side, t_id, node)
        if (node < 0).any():
            raise StructuralError("corner fell outside the merged node set")
        rows.append(node)
        cols.append(cent_ids)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    wires = sp.csr_matrix((np.ones(len(rows)), (rows, cols)),
                          shape=(n_nodes, n_nodes))
    wires = wires + wires.T
    lap = sp.diags(np.asarray(wires.sum(axis=1)).ravel()) - wires

    keep = np.arange(n_nodes) != t_id          # ground one terminal
    reduced = lap[keep][:, keep].tocsc()
    rhs = np.zeros(n_nodes)
    rhs[s_id] = 1.0                            # unit current injection
    solve, _ = _factorize(reduced)
    u = solve(rhs[keep])
    res = np.linalg.norm(reduced @ u - rhs[keep])
    if res > 1e-8:
        raise NumericError(f"resistance solve residual {res:.3e}")
    resistance = float(u[s_id])

    if not return_graph:
        return resistance
    # merged network as a graph: mid corners, the two terminal super-nodes
    # (sentinel coordinates -1 and -2), then the cube centers
    from .carpet import decode_points
    coords = np.concatenate([
        decode_points(mid_keys, base, d),
        np.full((1, d), -1, np.int64),
        np.full((1, d), -2, np.int64),
        2 * cells + 1])
    mask = np.zeros(len(coords), dtype=bool)
    mask[cent0:] = True
    edges = _lex_rows(np.stack([rows, cols], axis=1))
    degrees = np.asarray(wires.sum(axis=1)).ravel().astype(np.int64)
    graph = LatticeGraph("crosswire", spec, n_level, coords, 2, edges,
                         degrees, center_mask=mask)
    return resistance, graph


def estimate_rho(spec, n_max=3, n_min=0, max_cells=None):
    """Resistance scale factor from successive crosswire levels.

    The reported ``rho_hat`` is the last ratio R_{n}/R_{n-1}; earlier
    ratios are kept so the caller can judge convergence.
    """
    if n_max <= n_min:
        raise InputError("need n_max > n_min")
    levels = tuple(range(n_min, n_max + 1))
    res = tuple(crosswire_resistance(spec, n, max_cells=max_cells)
                for n in levels)
    ratios = tuple(res[i + 1] / res[i] for i in range(len(res) - 1))
    return ResistanceScale(spec.spec_id, levels, res, ratios, ratios[-1])


def pad_convergence(spec, n_level, pads=(1, 2), probe=None, max_cells=None):
    """Green diagonal at a probe vertex as the padded ambient grows.

    Killing further out only adds paths, so the values increase with the
    pad; the last increment says how far the padded surrogate may still
    move at that vertex.  The probe defaults to the deepest vertex of the
    level-N graph (the same anchor policy the coarse sets use).
    """
    from .graphs import build_outer_graph, default_anchor
    if probe is None:
        probe = default_anchor(spec, n_level)
    probe = np.asarray(probe, dtype=np.int64)
    values = []
    for pad in pads:
        if pad < 1:
            raise InputError("pads must be >= 1")
        outer = build_outer_graph(spec, n_level + pad, max_cells=max_cells)
        op = DirichletOperator(outer)
        w = int(outer.index_of(probe[None, :])[0])
        values.append(float(op.green_column(w)[w]))
    increments = tuple(values[i] - values[i - 1]
                       for i in range(1, len(values)))
    return {"probe": tuple(int(x) for x in probe), "pads": tuple(pads),
            "values": tuple(values), "increments": increments}
