"""Gaussian free fields on killed carpet operators.

Exact sampling uses the factor B with B^T B = L (edge incidence rows plus
sqrt-leak rows): if z is iid standard normal then solving L phi = B^T z
gives a field with covariance L^{-1} exactly, at the cost of one linear
solve per sample against the operator's cached factorization.

The hard-wall measure (the field conditioned to be nonnegative on a wall
set) is sampled by single-site Gibbs updates.  The full conditional at x is
Normal(sum of kept neighbor values / ambient degree, 1 / ambient degree),
truncated to [0, inf) on wall sites.  Sites of one color of a proper
coloring are conditionally independent given the rest, so the default sweep
updates the two parity classes alternately as vectorized blocks; plain
site-by-site scans (lexicographic or freshly permuted) are kept for
small-fixture cross-checks.

Truncated normals are drawn by inverse CDF on the log scale,
z = -ndtri_exp(log u + log_ndtr(-alpha)), which stays accurate however far
below zero the conditional mean sits.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.special import log_ndtr, ndtri_exp

from .errors import InputError, NumericError, StructuralError

_SWEEP_ORDERS = ("checkerboard", "lexicographic", "random")


@dataclass
class FieldSample:
    values: np.ndarray
    kind: str                      # "exact" | "gibbs" | "shifted"
    seed_path: tuple               # lineage from the master seed
    sweep: int = -1                # gibbs only
    chain: int = -1


@dataclass(frozen=True)
class ChainConfig:
    n_burnin: int = 500
    n_steps: int = 1000
    thinning: int = 10
    sweep_order: str = "checkerboard"
    master_seed: int = 0
    n_chains: int = 2

    def __post_init__(self):
        if self.sweep_order not in _SWEEP_ORDERS:
            raise InputError(f"sweep_order must be one of {_SWEEP_ORDERS}")
        if min(self.n_burnin, self.n_steps, self.thinning) < 0 or \
                self.thinning == 0 or self.n_steps == 0 or self.n_chains < 1:
            raise InputError("chain sizes must be positive")


@dataclass
class ObservableStats:
    mean: float
    variance: float
    stderr: float                  # autocorrelation adjusted
    iat: float
    chain_means: tuple
    agreement_z: float             # worst between-chain discrepancy


@dataclass
class WallRunStats:
    n_chains: int
    n_sweeps: int
    sweep_order: str
    master_seed: int
    observables: dict              # name -> ObservableStats


def chain_rng(master_seed, *path):
    """Deterministic generator derived from the master seed and a path of
    integers; every random draw in the package flows through these."""
    return np.random.default_rng(np.random.SeedSequence((master_seed,) + path))


# ---------------------------------------------------------------------------
# exact sampling

def sample_gff_matrix(op, rng, size):
    """(size, n) exact samples of the centered field with covariance
    L^{-1} on the operator's keep set."""
    inc = op.incidence_factor()
    z = rng.standard_normal((inc.shape[0], size))
    phi = op.solve(inc.T @ z)
    return np.ascontiguousarray(phi.T)


def sample_gff(op, rng, seed_path=()):
    values = sample_gff_matrix(op, rng, 1)[0]
    return FieldSample(values, "exact", tuple(seed_path))


def empirical_covariance(samples, pairs):
    """Pairwise sample covariances with delete-one jackknife errors.

    ``samples`` is (S, n); ``pairs`` is (k, 2) local indices.  Returns
    (estimates, standard_errors).
    """
    samples = np.asarray(samples, dtype=float)
    pairs = np.atleast_2d(np.asarray(pairs, dtype=np.int64))
    s = samples.shape[0]
    if s < 3:
        raise InputError("need at least 3 samples for a jackknife")
    x = samples[:, pairs[:, 0]]
    y = samples[:, pairs[:, 1]]
    sx, sy, sxy = x.sum(0), y.sum(0), (x * y).sum(0)
    est = (sxy - sx * sy / s) / (s - 1)
    # delete-one covariances, vectorized over samples
    m = s - 1
    loo = ((sxy - x * y) - (sx - x) * (sy - y) / m) / (m - 1)
    se = np.sqrt((s - 1) / s * ((loo - loo.mean(0)) ** 2).sum(0))
    return est, se


# ---------------------------------------------------------------------------
# truncated normal draws

def truncated_normal_lower(rng, mean, sd, lower=0.0):
    """Vectorized Normal(mean, sd**2) conditioned on being >= lower."""
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    alpha = (lower - mean) / sd
    u = rng.random(mean.shape)
    with np.errstate(divide="ignore"):
        logu = np.log(u)
    z = -ndtri_exp(logu + log_ndtr(-alpha))
    out = mean + sd * z
    return np.maximum(out, lower)    # guards float round-off at the wall


# ---------------------------------------------------------------------------
# hard-wall Gibbs

def _proper_coloring(op):
    try:
        color = op.graph.two_coloring()[op.keep]
        u, v = op.edges_local[:, 0], op.edges_local[:, 1]
        if len(u) == 0 or (color[u] != color[v]).all():
            return color
    except (StructuralError, AttributeError):
        pass
    # greedy fallback for ad-hoc graphs
    adj = op.adjacency.tolil(copy=False)
    color = np.full(op.n, -1, dtype=np.int8)
    for i in range(op.n):
        used = {color[j] for j in adj.rows[i] if color[j] >= 0}
        c = 0
        while c in used:
            c += 1
        color[i] = c
    return color


def _site_update(rng, op, phi, i, wall_mask):
    nb = op.adjacency[i].indices
    mean = phi[nb].sum() / op.diag[i]
    sd = 1.0 / np.sqrt(op.diag[i])
    if wall_mask[i]:
        phi[i] = truncated_normal_lower(rng, np.array(mean), np.array(sd))
    else:
        phi[i] = mean + sd * rng.standard_normal()


def _sweep(rng, op, phi, wall_mask, order, color_classes):
    if order == "checkerboard":
        for cls in color_classes:
            mean = (op.adjacency[cls] @ phi) / op.diag[cls]
            sd = 1.0 / np.sqrt(op.diag[cls])
            wall = wall_mask[cls]
            free = ~wall
            new = np.empty(len(cls))
            if wall.any():
                new[wall] = truncated_normal_lower(rng, mean[wall], sd[wall])
            if free.any():
                new[free] = mean[free] + sd[free] * rng.standard_normal(
                    int(free.sum()))
            phi[cls] = new
    elif order == "lexicographic":
        for i in range(op.n):
            _site_update(rng, op, phi, i, wall_mask)
    else:
        for i in rng.permutation(op.n):
            _site_update(rng, op, phi, int(i), wall_mask)


def gibbs_hard_wall(op, wall, config, observables=None):
    """Sample the hard-wall field by Gibbs sweeps.

    ``wall`` holds local keep indices forced nonnegative.  Returns
    (samples, stats): thinned post-burn-in FieldSamples from every chain,
    and per-observable summaries whose standard errors are adjusted by the
    integrated autocorrelation time of the sweep series.  Observables map a
    field vector to a float; the default is the mean over the wall.
    """
    wall = np.unique(np.asarray(wall, dtype=np.int64))
    wall_mask = np.zeros(op.n, dtype=bool)
    wall_mask[wall] = True
    if observables is None:
        track = wall if len(wall) else np.arange(op.n)
        observables = {"mean_height": lambda phi: float(phi[track].mean())}
    color = _proper_coloring(op)
    classes = [np.nonzero(color == c)[0] for c in range(int(color.max()) + 1)]

    samples = []
    series = {name: [] for name in observables}
    for chain in range(config.n_chains):
        rng = chain_rng(config.master_seed, 7, chain)
        phi = np.zeros(op.n)
        chain_series = {name: np.empty(config.n_steps) for name in observables}
        for sweep in range(config.n_burnin + config.n_steps):
            _sweep(rng, op, phi, wall_mask, config.sweep_order, classes)
            if not np.isfinite(phi).all():
                raise NumericError(
                    f"chain {chain} produced a non-finite value at sweep "
                    f"{sweep}")
            t = sweep - config.n_burnin
            if t < 0:
                continue
            for name, fn in observables.items():
                chain_series[name][t] = fn(phi)
            if (t + 1) % config.thinning == 0:
                samples.append(FieldSample(
                    phi.copy(), "gibbs",
                    (config.master_seed, 7, chain), sweep=t, chain=chain))
        for name in observables:
            series[name].append(chain_series[name])

    stats = {}
    for name, per_chain in series.items():
        stats[name] = _series_stats(per_chain)
    return samples, WallRunStats(
        config.n_chains, config.n_steps, config.sweep_order,
        config.master_seed, stats)


def integrated_autocorr(x):
    """Initial-positive-sequence estimate of the integrated autocorrelation
    time: sum paired autocovariances until the first negative pair."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    x = x - x.mean()
    var = np.dot(x, x) / n
    if var == 0 or n < 4:
        return 1.0
    acf = np.correlate(x, x, mode="full")[n - 1:] / (n * var)
    tau = -1.0                      # lag-0 pair counts acf[0] + acf[1]
    for m in range(0, n // 2 - 1):
        pair = acf[2 * m] + acf[2 * m + 1]
        if pair < 0:
            break
        tau += 2 * pair
    return max(tau, 1.0)


def _series_stats(per_chain):
    per_chain = [np.asarray(c, dtype=float) for c in per_chain]
    pooled = np.concatenate(per_chain)
    chain_means = []
    chain_ses = []
    taus = []
    for c in per_chain:
        tau = integrated_autocorr(c)
        taus.append(tau)
        chain_means.append(float(c.mean()))
        chain_ses.append(float(np.sqrt(c.var(ddof=1) * tau / len(c))))
    mean = float(np.mean(chain_means))
    se = float(np.sqrt(np.sum(np.square(chain_ses))) / len(per_chain))
    z = 0.0
    for i in range(len(per_chain)):
        for j in range(i + 1, len(per_chain)):
            denom = np.hypot(chain_ses[i], chain_ses[j])
            if denom > 0:
                z = max(z, abs(chain_means[i] - chain_means[j]) / denom)
    return ObservableStats(
        mean=mean, variance=float(pooled.var(ddof=1)), stderr=se,
        iat=float(np.mean(taus)), chain_means=tuple(chain_means),
        agreement_z=float(z))


# ---------------------------------------------------------------------------
# conditional decomposition on a separating grid

@dataclass
class ConditionalParts:
    grid: np.ndarray
    interior: np.ndarray
    mu: np.ndarray                 # harmonic extension of the grid values
    residual: np.ndarray           # phi - mu, zero on the grid
    variances: dict                # requested index -> conditional variance


def conditional_decompose(op, grid, values, var_at=()):
    """Split a field into its grid-conditional mean and fluctuation.

    Conditioned on the values on ``grid`` (and the zero exterior), the field
    inside each grid-bounded component is Gaussian with mean the harmonic
    extension of the grid data and covariance the Green function of the
    component's own killed operator; fluctuations in different components
    are independent.  Conditional variances are solved only at ``var_at``.
    """
    grid = np.unique(np.asarray(grid, dtype=np.int64))
    values = np.asarray(values, dtype=float)
    mask = np.zeros(op.n, dtype=bool)
    mask[grid] = True
    interior = np.nonzero(~mask)[0]
    mu = op.harmonic_extension(interior, values)
    residual = values - mu
    variances = {}
    if len(var_at):
        from .green import _factorize
        l_ii = op.matrix[interior][:, interior]
        solve, _ = _factorize(l_ii)
        pos = {int(v): i for i, v in enumerate(interior)}
        for x in np.asarray(var_at, dtype=np.int64):
            x = int(x)
            if x not in pos:
                raise InputError(f"variance requested on grid vertex {x}")
            e = np.zeros(len(interior))
            e[pos[x]] = 1.0
            col = solve(e)
            variances[x] = float(col[pos[x]])
    return ConditionalParts(grid, interior, mu, residual, variances)


# ---------------------------------------------------------------------------
# wall probabilities by constant-shift importance sampling

@dataclass
class WallProbability:
    p_hat: float
    log_p_hat: float
    stderr_log: float
    shift: float
    n_samples: int
    hits: int
    no_hits: bool
    ess: float = 0.0               # (sum w)^2 / sum w^2 over surviving draws


def relative_entropy(op, sub, shift):
    """KL divergence of the restriction to ``sub`` between the field with
    constant mean ``shift`` and the centered field: a**2/2 times the
    inverse-restricted-Green quadratic form of the all-ones vector."""
    ones = np.ones(len(np.unique(np.asarray(sub, dtype=np.int64))))
    return 0.5 * shift**2 * op.quad_form_inverse_green(sub, ones)


def estimate_wall_probability(op, wall, shift, n_samples, rng,
                              batch_size=512):
    """Probability that the centered field is nonnegative on ``wall``,
    estimated under the proposal shifted by a constant.

    The unbiased weight attached to a proposal draw phi is
    exp(-a <1, L phi> + a**2/2 <1, L 1>); with a = 0 this is plain
    rejection counting.  Errors are reported on the log scale by the delta
    method.  ``no_hits`` flags an estimate with no surviving sample.

    The log-weight spread grows like a * sqrt(<1, L 1>), so a large shift
    on a large boundary makes the estimate a heavy-tailed underestimate in
    practice; ``ess`` records the effective sample size of the surviving
    weights and should be checked before trusting the error bar.
    """
    if shift < 0:
        raise InputError("shift must be nonnegative")
    wall = np.unique(np.asarray(wall, dtype=np.int64))
    l_ones = op.matrix @ np.ones(op.n)
    ent2 = float(np.ones(op.n) @ l_ones)      # <1, L 1>
    logw = np.empty(n_samples)
    hit = np.empty(n_samples, dtype=bool)
    done = 0
    while done < n_samples:
        b = min(batch_size, n_samples - done)
        phi = sample_gff_matrix(op, rng, b) + shift
        logw[done:done + b] = -shift * (phi @ l_ones) + 0.5 * shift**2 * ent2
        hit[done:done + b] = (phi[:, wall] >= 0).all(axis=1)
        done += b
    hits = int(hit.sum())
    if hits == 0:
        return WallProbability(0.0, -np.inf, np.nan, shift, n_samples, 0,
                               True)
    peak = logw[hit].max()
    w = np.where(hit, np.exp(logw - peak), 0.0)
    mean_w = w.mean()
    p = float(np.exp(peak) * mean_w)
    log_p = float(peak + np.log(mean_w))
    se_w = w.std(ddof=1) / np.sqrt(n_samples)
    se_log = float(se_w / mean_w)
    ess = float(w.sum() ** 2 / np.square(w).sum())
    if not np.isfinite(log_p):
        raise NumericError("wall probability overflowed the log scale")
    return WallProbability(p, log_p, se_log, shift, n_samples, hits, False,
                           ess)


# ---------------------------------------------------------------------------
# observables

def field_observables(values, neighborhoods=None, blocks=None,
                      thresholds=(), rip=None, theta_alphas=(),
                      n_level=None, mu=None):
    """Summaries of one field vector.

    * ``neighborhoods``: name -> vertex indices; reports the window means.
    * ``blocks``: key -> vertex indices; reports per-block means.
    * ``thresholds``: empirical occupation fractions #{phi <= t} / n.
    * ``rip`` + ``theta_alphas`` + ``n_level``: counts of rip vertices with
      phi <= sqrt(alpha * N), and the same for ``mu`` when given.
    """
    values = np.asarray(values, dtype=float)
    out = {}
    if neighborhoods:
        out["window_mean"] = {name: float(values[idx].mean())
                              for name, idx in neighborhoods.items()}
    if blocks:
        out["block_mean"] = {key: float(values[idx].mean())
                             for key, idx in blocks.items()}
    if len(thresholds):
        out["occupation"] = {float(t): float((values <= t).mean())
                             for t in thresholds}
    if rip is not None and len(theta_alphas):
        if n_level is None:
            raise InputError("theta counts need n_level")
        rip = np.asarray(rip, dtype=np.int64)
        theta = {}
        for alpha in theta_alphas:
            cut = np.sqrt(alpha * n_level)
            entry = {"field": int((values[rip] <= cut).sum())}
            if mu is not None:
                entry["mean_part"] = int(
                    (np.asarray(mu)[rip] <= cut).sum())
            theta[float(alpha)] = entry
        out["theta"] = theta
    return out
