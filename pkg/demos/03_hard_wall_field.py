"""The Gaussian field on a carpet graph, free and behind a hard wall.

Exact samples come from one sparse solve per draw (factor the operator as
B^T B, push standard normals through), so their covariance is the Green
function to machine precision in law.  Conditioning the field to stay
nonnegative has no closed form; a blocked Gibbs sampler handles it, and
on fixtures small enough for rejection sampling the two agree.
"""

import numpy as np

from carpetfield.carpet import standard_carpet
from carpetfield.field import (ChainConfig, chain_rng, conditional_decompose,
                               empirical_covariance, estimate_wall_probability,
                               gibbs_hard_wall, sample_gff_matrix)
from carpetfield.graphs import build_outer_graph, coarse_sets
from carpetfield.green import DirichletOperator

sc = standard_carpet()
op = DirichletOperator(build_outer_graph(sc, 1))

print("=== exact sampling ===")
phi = sample_gff_matrix(op, chain_rng(0, 1), 20000)
pairs = np.array([(0, 0), (0, 5), (3, 12)])
est, se = empirical_covariance(phi, pairs)
want = op.green_entries(pairs)
for (x, y), e, s, g in zip(pairs, est, se, want):
    print(f"cov(phi_{x}, phi_{y}): empirical {e:+.4f} +- {s:.4f}, "
          f"Green {g:+.4f}")

print("\n=== conditioning on a coarse grid ===")
# Values on the grid lines split the field: a harmonic mean part plus
# independent fluctuations in the grid-bounded components.
cs = coarse_sets(sc, 1, 1)
sample = phi[0]
probe = next(int(b.interior[0]) for b in cs.blocks if len(b.interior))
parts = conditional_decompose(op, cs.grid, sample, var_at=[probe])
print(f"grid: {len(cs.grid)} of {op.n} vertices; "
      f"residual on grid: {np.abs(parts.residual[cs.grid]).max():.1e}")
print(f"conditional variance at vertex {probe}: "
      f"{parts.variances[probe]:.5f} "
      f"(free variance {op.green_column(probe)[probe]:.5f})")

print("\n=== the hard wall ===")
config = ChainConfig(n_burnin=400, n_steps=4000, thinning=10, master_seed=3)
wall = np.arange(op.n)
samples, stats = gibbs_hard_wall(op, wall, config)
st = stats.observables["mean_height"]
print(f"Gibbs, {config.n_chains} chains x {config.n_steps} sweeps "
      f"({stats.sweep_order} order)")
print(f"mean height {st.mean:.4f} +- {st.stderr:.4f}  "
      f"(iat {st.iat:.1f}, chain agreement z {st.agreement_z:.2f})")
print(f"free field mean would be 0; the wall pushes the field up.")
lowest = min(s.values.min() for s in samples)
print(f"smallest emitted wall value: {lowest:.2e} (never negative)")

print("\n=== how rare is the wall event ===")
direct = estimate_wall_probability(op, wall, 0.0, 100000, chain_rng(0, 4))
tilt = 1.2
shifted = estimate_wall_probability(op, wall, tilt, 100000, chain_rng(0, 5))
print(f"P(phi >= 0 everywhere), rejection: log p = "
      f"{direct.log_p_hat:.3f} +- {direct.stderr_log:.3f} "
      f"({direct.hits} hits)")
print(f"same, shifted by {tilt}: log p = {shifted.log_p_hat:.3f} +- "
      f"{shifted.stderr_log:.3f} ({shifted.hits} hits, "
      f"effective sample size {shifted.ess:.0f})")
print("the shift buys hits; the weights pay for them. On larger walls the")
print("effective sample size collapses and the low_ess flag in the study")
print("tables marks the estimate as a lower-tail one.")
