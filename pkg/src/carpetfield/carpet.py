"""Generalized Sierpinski carpet cell patterns.

A carpet is specified by its level-1 data: the ambient dimension ``d``, an
integer length scale ``ell >= 3``, and the set of retained cells inside the
``ell**d`` subdivision of the unit cube.  Iterating the pattern produces the
level-N cell sets from which the lattice graphs, Green functions and field
samples elsewhere in the package are built.

Four structural axioms are checked by :func:`validate_gsc`:

* symmetry    -- the pattern is preserved by every isometry of the cube
                 (coordinate permutations composed with axis reflections,
                 ``2**d * d!`` maps in total);
* connectivity-- the closed union of retained cells is connected, where two
                 closed cells meet iff they are within Chebyshev distance 1;
* non-diagonality -- in every axis-aligned block of 2-per-axis cells the
                 retained cells form a single component under face adjacency,
                 so the interior of the union cannot pinch off diagonally;
* borders     -- the full bottom row of cells ``(i, 0, ..., 0)`` is retained.

A full-cube pattern (every cell retained) violates the strict-subset
requirement and is only constructible with ``allow_full_cube=True``; it is
used to calibrate scaling estimates against the ordinary lattice.
"""

from dataclasses import dataclass
from itertools import permutations, product
import hashlib
import os

import numpy as np

from .errors import InputError, ResourceCapError

DEFAULT_MAX_CELLS = int(os.environ.get("CARPETFIELD_MAX_CELLS", 10_000_000))


def _as_cell_tuple(c, d):
    t = tuple(int(x) for x in c)
    if len(t) != d:
        raise InputError(f"cell {c!r} does not have {d} coordinates")
    return t


@dataclass(frozen=True)
class CarpetSpec:
    dimension: int
    length_scale: int
    cells: tuple
    allow_full_cube: bool = False
    label: str = ""

    def __post_init__(self):
        problems = []
        d, ell = self.dimension, self.length_scale
        if not (isinstance(d, int) and d >= 2):
            problems.append(f"dimension must be an integer >= 2, got {d!r}")
        if not (isinstance(ell, int) and ell >= 3):
            problems.append(f"length_scale must be an integer >= 3, got {ell!r}")
        if problems:
            raise InputError("; ".join(problems))
        cells = tuple(sorted(_as_cell_tuple(c, d) for c in self.cells))
        if len(cells) == 0:
            problems.append("cells must be nonempty")
        if len(set(cells)) != len(cells):
            dupes = sorted({c for c in cells if cells.count(c) > 1})
            problems.append(f"duplicate cells {dupes}")
        for c in cells:
            if any(not (0 <= x < ell) for x in c):
                problems.append(f"cell {c} out of range [0, {ell})")
                break
        if len(cells) == ell**d and not self.allow_full_cube:
            problems.append(
                "all cells retained: a carpet must be a strict subset of the "
                "cube (pass allow_full_cube=True for calibration patterns)")
        if problems:
            raise InputError("; ".join(problems))
        object.__setattr__(self, "cells", cells)

    @property
    def cell_count(self):
        return len(self.cells)

    @property
    def is_full_cube(self):
        return self.cell_count == self.length_scale**self.dimension

    def cells_array(self):
        return np.array(self.cells, dtype=np.int64)

    @property
    def spec_id(self):
        """Short stable identifier derived from the canonical pattern."""
        if self.label:
            return self.label
        canon = f"{self.dimension}|{self.length_scale}|{self.cells}"
        return "gsc-" + hashlib.sha256(canon.encode()).hexdigest()[:8]


# ---------------------------------------------------------------------------
# stock patterns

def standard_carpet():
    """d=2, ell=3, all cells except the center."""
    cells = [(i, j) for i in range(3) for j in range(3) if (i, j) != (1, 1)]
    return CarpetSpec(2, 3, cells, label="sc2d")


def menger_sponge():
    """d=3, ell=3, the 27 cells minus 6 face centers and the body center."""
    cells = [c for c in product(range(3), repeat=3)
             if sum(x == 1 for x in c) <= 1]
    return CarpetSpec(3, 3, cells, label="menger3d")


def full_cube(dimension=3, length_scale=3):
    """Calibration pattern retaining every cell."""
    cells = list(product(range(length_scale), repeat=dimension))
    return CarpetSpec(dimension, length_scale, cells, allow_full_cube=True,
                      label=f"full{dimension}d{length_scale}")


def four_corners():
    """d=2 fixture: four isolated corner cells (fails connectivity)."""
    return CarpetSpec(2, 3, [(0, 0), (2, 0), (0, 2), (2, 2)], label="corners2d")


def diagonal_cross():
    """d=2 fixture: corners plus center, connected only through corner
    contact (fails non-diagonality and borders)."""
    return CarpetSpec(2, 3, [(0, 0), (2, 0), (0, 2), (2, 2), (1, 1)],
                      label="diagcross2d")


# ---------------------------------------------------------------------------
# axiom checks

@dataclass(frozen=True)
class AxiomCheck:
    name: str
    passed: bool
    witness: str = ""


@dataclass(frozen=True)
class ValidationReport:
    spec: CarpetSpec
    symmetry: AxiomCheck
    connectivity: AxiomCheck
    non_diagonality: AxiomCheck
    borders: AxiomCheck
    calibration: bool = False

    @property
    def checks(self):
        return (self.symmetry, self.connectivity, self.non_diagonality,
                self.borders)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def summary(self):
        lines = []
        for c in self.checks:
            status = "ok" if c.passed else f"FAIL ({c.witness})"
            lines.append(f"{c.name}: {status}")
        if self.calibration:
            lines.append("note: full-cube calibration pattern")
        return "\n".join(lines)


def _cube_isometries(d, ell):
    """All 2**d * d! cell maps induced by isometries of the cube."""
    for perm in permutations(range(d)):
        for flips in product((False, True), repeat=d):
            yield perm, flips


def _apply_isometry(cell, perm, flips, ell):
    return tuple((ell - 1 - cell[perm[i]]) if flips[i] else cell[perm[i]]
                 for i in range(len(cell)))


def _check_symmetry(spec):
    cells = set(spec.cells)
    for perm, flips in _cube_isometries(spec.dimension, spec.length_scale):
        image = {_apply_isometry(c, perm, flips, spec.length_scale)
                 for c in cells}
        if image != cells:
            missing = sorted(cells - image)[0]
            return AxiomCheck(
                "symmetry", False,
                f"isometry perm={perm} flips={flips} moves the pattern; "
                f"cell {missing} is not in the image")
    return AxiomCheck("symmetry", True)


def _components(cells, adjacent):
    labels = {c: None for c in cells}
    comps = []
    for start in cells:
        if labels[start] is not None:
            continue
        comp = [start]
        labels[start] = len(comps)
        stack = [start]
        while stack:
            c = stack.pop()
            for o in cells:
                if labels[o] is None and adjacent(c, o):
                    labels[o] = len(comps)
                    comp.append(o)
                    stack.append(o)
        comps.append(sorted(comp))
    return comps


def _check_connectivity(spec):
    def chebyshev_touch(a, b):
        return a != b and max(abs(x - y) for x, y in zip(a, b)) <= 1

    comps = _components(list(spec.cells), chebyshev_touch)
    if len(comps) == 1:
        return AxiomCheck("connectivity", True)
    return AxiomCheck(
        "connectivity", False,
        f"{len(comps)} components; e.g. {comps[0][0]} and {comps[1][0]} "
        "cannot be joined through touching closed cells")


def _face_component_lut(d):
    """Component count of every occupancy mask of the 2-per-axis block
    under face adjacency.  Mask bit order follows product((0,1), repeat=d)."""
    verts = list(product((0, 1), repeat=d))
    nv = len(verts)
    nbr = [[j for j in range(nv)
            if sum(abs(a - b) for a, b in zip(verts[i], verts[j])) == 1]
           for i in range(nv)]
    lut = np.zeros(1 << nv, dtype=np.uint8)
    for mask in range(1, 1 << nv):
        seen = 0
        ncomp = 0
        for i in range(nv):
            bit = 1 << i
            if mask & bit and not seen & bit:
                ncomp += 1
                stack = [i]
                seen |= bit
                while stack:
                    v = stack.pop()
                    for w in nbr[v]:
                        wb = 1 << w
                        if mask & wb and not seen & wb:
                            seen |= wb
                            stack.append(w)
        lut[mask] = ncomp
    return lut


def _non_diagonality_witness(cells_nd, side, d):
    """First 2-per-axis block whose retained cells split under face
    adjacency, or None.  Vectorized over all (side-1)**d blocks."""
    grid = np.zeros((side,) * d, dtype=bool)
    grid[tuple(cells_nd.T)] = True
    offsets = list(product((0, 1), repeat=d))
    mask = np.zeros((side - 1,) * d, dtype=np.uint32)
    for bit, off in enumerate(offsets):
        sl = tuple(slice(o, o + side - 1) for o in off)
        mask |= grid[sl].astype(np.uint32) << bit
    lut = _face_component_lut(d)
    bad = lut[mask] > 1
    if not bad.any():
        return None
    corner = np.argwhere(bad)[0]
    block_cells = [tuple(int(corner[i]) + off[i] for i in range(d))
                   for bit, off in enumerate(offsets)
                   if mask[tuple(corner)] >> bit & 1]
    return tuple(int(x) for x in corner), block_cells


def _check_non_diagonality(spec, level=1):
    if spec.dimension > 4:
        raise InputError("non-diagonality check implemented for d <= 4")
    cells_nd = cells_at_level(spec, level)
    side = spec.length_scale**level
    hit = _non_diagonality_witness(cells_nd, side, spec.dimension)
    if hit is None:
        return AxiomCheck("non_diagonality", True,
                          f"checked at level {level}" if level > 1 else "")
    corner, block_cells = hit
    return AxiomCheck(
        "non_diagonality", False,
        f"block at {corner} (level {level}) retains {block_cells} in more "
        "than one face-adjacency component")


def _check_borders(spec):
    for i in range(spec.length_scale):
        row = (i,) + (0,) * (spec.dimension - 1)
        if row not in spec.cells:
            return AxiomCheck("borders", False, f"bottom-row cell {row} missing")
    return AxiomCheck("borders", True)


def validate_gsc(spec, deep=False):
    """Run the four axiom checks and return a :class:`ValidationReport`.

    Non-diagonality is decided on the declared level-1 pattern; ``deep=True``
    re-runs it on the level-2 subdivision as a consistency probe (the axiom
    at deeper levels does not follow automatically from level 1).
    """
    nd = _check_non_diagonality(spec, level=1)
    if deep and nd.passed:
        nd = _check_non_diagonality(spec, level=2)
    return ValidationReport(
        spec=spec,
        symmetry=_check_symmetry(spec),
        connectivity=_check_connectivity(spec),
        non_diagonality=nd,
        borders=_check_borders(spec),
        calibration=spec.is_full_cube,
    )


# ---------------------------------------------------------------------------
# cell iteration

def cells_at_level(spec, n_level, max_cells=None):
    """Level-``n_level`` cells as a lex-sorted ``(m**n, d)`` int64 array.

    Each retained cell ``c`` of level N spawns the cells ``ell*c + b`` for b
    in the level-1 pattern, so coordinates live in ``[0, ell**n)``.
    """
    if n_level < 0:
        raise InputError("level must be >= 0")
    cap = DEFAULT_MAX_CELLS if max_cells is None else max_cells
    if spec.cell_count**n_level > cap:
        raise ResourceCapError(
            f"{spec.cell_count}**{n_level} cells exceeds cap {cap}")
    d, ell = spec.dimension, spec.length_scale
    base = spec.cells_array()
    out = np.zeros((1, d), dtype=np.int64)
    for _ in range(n_level):
        out = (ell * out[:, None, :] + base[None, :, :]).reshape(-1, d)
    order = np.lexsort(out.T[::-1])
    return out[order]


def encode_points(points, base):
    """Pack integer coordinate rows into int64 keys; lexicographic order of
    rows equals numeric order of keys."""
    points = np.asarray(points, dtype=np.int64)
    keys = np.zeros(len(points), dtype=np.int64)
    for i in range(points.shape[1]):
        keys = keys * base + points[:, i]
    return keys


def decode_points(keys, base, d):
    keys = np.asarray(keys, dtype=np.int64)
    out = np.zeros((len(keys), d), dtype=np.int64)
    rem = keys.copy()
    for i in range(d - 1, -1, -1):
        out[:, i] = rem % base
        rem //= base
    return out


# ---------------------------------------------------------------------------
# half-open partition

@dataclass
class HalfOpenPartition:
    """Assignment of the level-N lattice vertices to level-``j`` cells.

    Interior vertices go to the cell whose half-open box ``[p*s, (p+1)*s)``
    contains them (``s = ell**(N-j)``).  Vertices on the far faces of the
    whole carpet are folded back onto the last cell along that axis.  A
    vertex whose floor cell was removed sits on the boundary of retained
    cells; it is assigned to the lexicographically smallest retained cell
    whose closure contains it, which makes the assignment a true partition.
    """
    spec: CarpetSpec
    level: int
    cell_level: int
    points: np.ndarray       # (n, d) vertices that were assigned
    owner: np.ndarray        # (n, d) owning level-j cell per vertex

    def groups(self):
        """dict mapping owning cell tuple -> indices of its vertices."""
        out = {}
        for idx, cell in enumerate(map(tuple, self.owner)):
            out.setdefault(cell, []).append(idx)
        return {c: np.array(v, dtype=np.int64) for c, v in out.items()}


def half_open_partition(spec, j, n_level, points=None):
    """Partition the level-``n_level`` outer vertices into level-``j`` cells.

    ``points`` defaults to the vertex coordinates of the level-N outer
    graph; pass an explicit ``(n, d)`` integer array to partition any other
    vertex collection at the same scale.
    """
    if not 0 <= j <= n_level:
        raise InputError(f"need 0 <= j <= N, got j={j}, N={n_level}")
    if points is None:
        from .graphs import build_outer_graph
        points = build_outer_graph(spec, n_level).coords
    points = np.asarray(points, dtype=np.int64)
    d, ell = spec.dimension, spec.length_scale
    side = ell ** (n_level - j)
    n_cells_axis = ell ** j
    owner = points // side
    np.minimum(owner, n_cells_axis - 1, out=owner)  # far-face completion

    cells_j = cells_at_level(spec, j)
    base = n_cells_axis + 1
    cell_keys = encode_points(cells_j, base)
    ok = np.isin(encode_points(owner, base), cell_keys)

    if not ok.all():
        retained = set(map(tuple, cells_j))
        for i in np.nonzero(~ok)[0]:
            x = points[i]
            best = None
            # closures containing x: decrement the floor cell on any subset
            # of axes where x sits on a cell face
            movable = [ax for ax in range(d)
                       if x[ax] % side == 0 and owner[i, ax] > 0
                       and x[ax] // side == owner[i, ax]]
            for sub in product((0, 1), repeat=len(movable)):
                cand = owner[i].copy()
                for ax, dec in zip(movable, sub):
                    cand[ax] -= dec
                t = tuple(int(v) for v in cand)
                if t in retained and (best is None or t < best):
                    best = t
            if best is None:
                raise InputError(
                    f"vertex {tuple(x)} lies in no retained level-{j} cell")
            owner[i] = best
    return HalfOpenPartition(spec, n_level, j, points, owner)


# ---------------------------------------------------------------------------
# dimension arithmetic

@dataclass(frozen=True)
class DimensionReport:
    spec_id: str
    mass_scale: int          # cells per level
    rho_hat: float           # resistance scale estimate
    time_scale: float        # mass * resistance
    hausdorff: float
    walk: float
    spectral: float
    transient: bool
    rho_lower: float         # a-priori window for the resistance scale
    rho_upper: float

    @property
    def rho_in_window(self):
        return self.rho_lower <= self.rho_hat <= self.rho_upper


def dimensions(spec, rho_hat):
    """Fractal dimension triple implied by the pattern and a resistance
    scale estimate: mass exponent, walk exponent, and their spectral ratio."""
    if rho_hat <= 0:
        raise InputError("rho_hat must be positive")
    m = spec.cell_count
    ell = spec.length_scale
    t = m * rho_hat
    log_ell = np.log(ell)
    return DimensionReport(
        spec_id=spec.spec_id,
        mass_scale=m,
        rho_hat=float(rho_hat),
        time_scale=float(t),
        hausdorff=float(np.log(m) / log_ell),
        walk=float(np.log(t) / log_ell),
        spectral=float(2 * np.log(m) / np.log(t)),
        transient=bool(rho_hat < 1),
        rho_lower=float(ell**2 / m),
        rho_upper=float(2 ** (1 - spec.dimension) * ell),
    )
