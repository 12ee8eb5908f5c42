"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's own recursion and solver
paths: membership by digit rules, vertex sets by brute-force box scans,
Green matrices by dense numpy inversion of an explicitly assembled
Laplacian, conditioned means by rejection sampling.  Tests compare library
output against these.
"""

from itertools import product

import numpy as np
import pytest

from carpetfield.carpet import menger_sponge, standard_carpet
from carpetfield.graphs import LatticeGraph
from carpetfield.green import DirichletOperator


# ---------------------------------------------------------------------------
# membership oracles by base-ell digit rules

def sc_cell_retained(cell, n_level):
    """2-d standard pattern: drop iff some digit position has both digits
    equal to 1."""
    i, j = cell
    for _ in range(n_level):
        if i % 3 == 1 and j % 3 == 1:
            return False
        i //= 3
        j //= 3
    return True


def menger_cell_retained(cell, n_level):
    """3-d pattern: drop iff some digit position has two or more
    coordinate digits equal to 1."""
    x, y, z = cell
    for _ in range(n_level):
        if (x % 3 == 1) + (y % 3 == 1) + (z % 3 == 1) >= 2:
            return False
        x //= 3
        y //= 3
        z //= 3
    return True


def oracle_cells(spec_name, n_level):
    rule = {"sc": sc_cell_retained, "menger": menger_cell_retained}[spec_name]
    d = 2 if spec_name == "sc" else 3
    side = 3**n_level
    return np.array([c for c in product(range(side), repeat=d)
                     if rule(c, n_level)], dtype=np.int64)


def oracle_outer_vertices(spec_name, n_level):
    """Brute force: a lattice point is a vertex iff it lies in the closure
    of some retained cell."""
    cells = oracle_cells(spec_name, n_level)
    d = cells.shape[1]
    side = 3**n_level
    points = np.array(list(product(range(side + 1), repeat=d)),
                      dtype=np.int64)
    keep = np.zeros(len(points), dtype=bool)
    for c in cells:
        inside = np.all((points >= c) & (points <= c + 1), axis=1)
        keep |= inside
    return points[keep]


# ---------------------------------------------------------------------------
# tiny graphs

def line_graph(n, ambient_extra=None):
    """Path on n vertices; ambient degree defaults to the interior value 2
    at the ends as well, so both ends leak."""
    coords = np.arange(n).reshape(-1, 1)
    edges = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
    deg = np.full(n, 2, dtype=np.int64)
    if ambient_extra is not None:
        deg = deg + np.asarray(ambient_extra, dtype=np.int64)
    return LatticeGraph("outer", None, 0, coords, 1, edges, deg)


def star_graph(spokes=4, hub_extra=0):
    """Hub 0 joined to each spoke; every vertex leaks once, the hub
    ``hub_extra`` more times."""
    coords = np.arange(spokes + 1).reshape(-1, 1)
    edges = np.stack([np.zeros(spokes, dtype=np.int64),
                      np.arange(1, spokes + 1)], axis=1)
    deg = np.concatenate([[spokes + 1 + hub_extra], np.full(spokes, 2)])
    return LatticeGraph("outer", None, 0, coords, 1, edges,
                        deg.astype(np.int64))


def dense_laplacian(op):
    """Explicit numpy assembly from first principles, for inverse oracles."""
    n = op.n
    lap = np.zeros((n, n))
    np.fill_diagonal(lap, op.diag)
    for u, v in op.edges_local:
        lap[u, v] -= 1.0
        lap[v, u] -= 1.0
    return lap


def rejection_wall_samples(op, wall, n_draws, rng, batch=4096):
    """Exact draws of the field conditioned nonnegative on ``wall``."""
    from carpetfield.field import sample_gff_matrix
    wall = np.asarray(wall, dtype=np.int64)
    keep = []
    total = 0
    while total < n_draws:
        phi = sample_gff_matrix(op, rng, batch)
        ok = (phi[:, wall] >= 0).all(axis=1)
        keep.append(phi[ok])
        total += int(ok.sum())
    return np.concatenate(keep)[:n_draws]


@pytest.fixture(scope="session")
def sc():
    return standard_carpet()


@pytest.fixture(scope="session")
def menger():
    return menger_sponge()


@pytest.fixture(scope="session")
def path_op():
    """Path 0-1-2-3 with ends killed, keep {1, 2}; G = (1/3)[[2,1],[1,2]]."""
    g = line_graph(4)
    return DirichletOperator(g, keep=[1, 2])


# acceptance verdicts collected for the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
