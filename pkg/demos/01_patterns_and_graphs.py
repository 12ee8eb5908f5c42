"""Cell patterns, their axioms, and the two lattice graphs.

A carpet here is a subset of the ell**d cells of a box, iterated: keep the
pattern's cells, subdivide each kept cell, keep the pattern again.  The
validator checks the four structural axioms that the rest of the package
relies on; the two bundled reference patterns pass, and two deliberately
broken fixtures show what a failure report looks like.
"""

import numpy as np

from carpetfield.carpet import (diagonal_cross, dimensions, four_corners,
                                menger_sponge, standard_carpet, validate_gsc)
from carpetfield.graphs import build_inner_graph, build_outer_graph
from carpetfield.green import estimate_rho

print("=== axiom checks ===")
for spec in (standard_carpet(), menger_sponge(), four_corners(),
             diagonal_cross()):
    report = validate_gsc(spec)
    state = "passes" if report.passed else "FAILS"
    print(f"\n{spec.label or spec.spec_id}: {state}")
    for check in report.checks:
        mark = "ok " if check.passed else "BAD"
        line = f"  [{mark}] {check.name}"
        if not check.passed and check.witness:
            line += f"  witness: {check.witness}"
        print(line)

print("\n=== graph growth ===")
for spec in (standard_carpet(), menger_sponge()):
    print(f"\n{spec.label}: {spec.cell_count} cells per box "
          f"(of {spec.length_scale ** spec.dimension})")
    for n in range(4):
        outer = build_outer_graph(spec, n)
        inner = build_inner_graph(spec, n)
        print(f"  level {n}: outer {outer.n_vertices:>6} vertices "
              f"/ {len(outer.edges):>6} edges,  inner {inner.n_vertices:>6}")

# Degrees tell the boundary story: the ambient degree counts neighbors in
# the one-level-larger graph, so the difference to the internal degree is
# positive exactly where the walk can escape (the far faces).
sc = standard_carpet()
g = build_outer_graph(sc, 1)
leak = g.degree_ambient - g.degree_internal()
print(f"\nstandard carpet level 1: {int((leak > 0).sum())} of "
      f"{g.n_vertices} vertices leak into the ambient")
for i in np.nonzero(leak > 0)[0][:4]:
    where = tuple(int(c) for c in g.coords[i])
    print(f"  vertex {i} at {where}: leak {int(leak[i])}")

print("\n=== fractal dimensions from the resistance run ===")
for spec in (standard_carpet(), menger_sponge()):
    rho = estimate_rho(spec, n_max=2).rho_hat
    dims = dimensions(spec, rho)
    kind = "transient" if dims.transient else "recurrent"
    print(f"{spec.label}: hausdorff {dims.hausdorff:.4f}  "
          f"walk {dims.walk:.4f}  spectral {dims.spectral:.4f}  ({kind})")
