"""Finite-level scaling experiments, reported as deterministic tables.

Each study walks a range of construction levels N and emits rows of
renormalized quantities (capacities, Green forms, log wall probabilities,
mean heights) so that stabilization, or its absence, can be read off the
successive entries.  No extrapolation is performed: reported ratios are the
data, not fitted limits.

Two operator scopes appear.  Capacity rows restrict the Green function of
a *padded* domain (the level N + pad graph, killed at its far boundary) to
the level-N vertex set; that restriction plays the role of the whole-space
kernel in the capacity and entropy formulas.  Wall and height rows instead
use the level-N killed operator itself as the field's law, which keeps the
Monte Carlo affordable and makes the entropy formula for the constant tilt
exact rather than approximate.
"""

import time
from dataclasses import dataclass, asdict, replace

import numpy as np

from .carpet import CarpetSpec
from .errors import InputError
from .field import (ChainConfig, chain_rng, estimate_wall_probability,
                    gibbs_hard_wall, relative_entropy)
from .graphs import (build_inner_graph, build_outer_graph, corner_indices,
                     cubic_neighborhood, mean_value_operator,
                     project_to_inner)
from .green import DirichletOperator, dirichlet_energy, estimate_rho
from .reporting import StudyReport

RATIO_GATE = (0.125, 8.0)          # sanity interval for successive ratios
SLACK_TOL = 1e-10                  # relative float guard for inequality audits


@dataclass(frozen=True)
class StudyPlan:
    """Shared knobs for every study.

    ``n_min``..``n_max`` is the level range, ``pad`` the extra levels of
    ambient used for whole-space surrogates, ``k_coarse`` the coarse-set
    level, ``eps_list`` the window radii for local height means.  The tilt
    used by the wall study is ``tilt_shift`` when given, otherwise
    sqrt(alpha N log t) with alpha = ``tilt_alpha`` or twice the largest
    available Green diagonal.
    """
    spec: CarpetSpec
    n_min: int = 0
    n_max: int = 2
    pad: int = 2
    k_coarse: int = 1
    chain: ChainConfig = ChainConfig()
    tilt_alpha: float = None
    tilt_shift: float = None
    n_importance: int = 4000
    eps_list: tuple = (1.0,)
    master_seed: int = 0
    rho_hat: float = None
    max_cells: int = None

    def __post_init__(self):
        if self.pad < 1:
            raise InputError("pad must be at least 1")
        if not 0 <= self.n_min <= self.n_max:
            raise InputError("need 0 <= n_min <= n_max")
        if self.n_importance < 2:
            raise InputError("n_importance must be at least 2")

    def resolved_rho(self):
        if self.rho_hat is not None:
            return float(self.rho_hat)
        n_top = min(3, max(self.n_max, 1))
        scale = estimate_rho(self.spec, n_max=n_top,
                             max_cells=self.max_cells)
        return scale.rho_hat

    def log_time_scale(self, rho_hat):
        # t = m * rho; every shipped pattern has m * rho > 1
        t_hat = self.spec.cell_count * rho_hat
        if t_hat <= 1:
            raise InputError(
                "time scale at or below 1; rate normalization undefined")
        return float(np.log(t_hat))


def _metadata(plan, rho_hat, **extra):
    meta = {"plan": asdict(plan), "rho_hat": rho_hat}
    meta["plan"]["spec"] = plan.spec.spec_id
    meta.update(extra)
    return meta


class _Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = (time.perf_counter() - self.t0) * 1e3
        return False


# ---------------------------------------------------------------------------
# capacities of the carpet inside its padded ambient

def padded_operator(spec, n_level, pad, max_cells=None):
    """Killed operator on the level N + pad graph plus the local indices of
    the level-N vertex set inside it (levels nest, so lookup never fails)."""
    inner = build_outer_graph(spec, n_level, max_cells=max_cells)
    outer = build_outer_graph(spec, n_level + pad, max_cells=max_cells)
    sub = outer.index_of(inner.coords)
    return DirichletOperator(outer), sub


def capacity_sequence(plan):
    """Renormalized capacities of V_N inside the padded ambient, by two
    routes that agree identically: the inverse-restricted-Green quadratic
    form of the all-ones vector, and the equilibrium-potential energy."""
    rho = plan.resolved_rho()
    report = StudyReport("capacity_sequence",
                         metadata=_metadata(plan, rho, pad=plan.pad))
    for n in range(plan.n_min, plan.n_max + 1):
        with _Clock() as ck:
            op, sub = padded_operator(plan.spec, n, plan.pad, plan.max_cells)
            ones = np.ones(len(sub))
            value_a = rho**n * op.quad_form_inverse_green(sub, ones)
            _, _, cap = op.equilibrium_potential(sub)
            value_b = rho**n * cap
        common = dict(spec=plan.spec.spec_id, n_level=n, runtime_ms=ck.ms)
        report.add(quantity="scaled_capacity_schur", value=value_a, **common)
        report.add(quantity="scaled_capacity_equilibrium", value=value_b,
                   **common)
        report.add(quantity="capacity_route_ratio", value=value_a / value_b,
                   **common)
    return report


# ---------------------------------------------------------------------------
# Green forms of a density against the inner-graph kernel

def green_form_convergence(plan, density=None, refine=1):
    """Renormalized Green forms of a density on cell centers.

    ``density`` maps an (m, d) array of level-M center coordinates in the
    unit cube to m values; omitted means the uniform density.  ``refine``
    is the number of extra levels M - N the density is sampled at before
    the mean-value projection down to level N.
    """
    rho = plan.resolved_rho()
    report = StudyReport("green_form_convergence",
                         metadata=_metadata(plan, rho, refine=refine))
    values = []
    for n in range(plan.n_min, plan.n_max + 1):
        with _Clock() as ck:
            graph = build_inner_graph(plan.spec, n, max_cells=plan.max_cells)
            m_level = n + refine
            if density is None:
                h = np.ones(graph.n_vertices)
            else:
                fine = build_inner_graph(plan.spec, m_level,
                                         max_cells=plan.max_cells)
                unit = fine.true_coords() / plan.spec.length_scale**m_level
                h_fine = np.asarray(density(unit), dtype=float)
                h = mean_value_operator(plan.spec, n, m_level, h_fine)
            op = DirichletOperator(graph)
            raw = float(h @ op.solve(h))
            g_n = rho**(-n) * raw / graph.n_vertices**2
        report.add(quantity="green_form", value=g_n, spec=plan.spec.spec_id,
                   n_level=n, runtime_ms=ck.ms)
        values.append(g_n)
        if len(values) > 1:
            ratio = values[-1] / values[-2]
            flags = "" if RATIO_GATE[0] <= ratio <= RATIO_GATE[1] \
                else "outside_gate"
            report.add(quantity="successive_ratio", value=ratio,
                       spec=plan.spec.spec_id, n_level=n, flags=flags,
                       runtime_ms=0.0)
    return report


# ---------------------------------------------------------------------------
# randomized audits of the outer-vs-inner comparison inequalities

def comparison_audit(plan, trials=1000):
    """Random-function trials of the two projection inequalities.

    For the corner-average projection Q from outer vertices to cells:
    the graph Dirichlet energy of f dominates the inner energy of Qf for
    every f, and for nonnegative f the outer Green form is at most 2^(2d)
    times the inner Green form of Qf.  Rows report violation counts (zero
    expected) and the worst observed slack.
    """
    rho = plan.resolved_rho()
    report = StudyReport("comparison_audit",
                         metadata=_metadata(plan, rho, trials=trials))
    d = plan.spec.dimension
    factor = float(4**d)
    for n in range(max(plan.n_min, 1), plan.n_max + 1):
        with _Clock() as ck:
            outer = build_outer_graph(plan.spec, n, max_cells=plan.max_cells)
            inner = build_inner_graph(plan.spec, n, max_cells=plan.max_cells)
            corner_indices(outer, inner)
            op_v = DirichletOperator(outer)
            op_i = DirichletOperator(inner)
            rng = chain_rng(plan.master_seed, 3, n)
            e_viol = g_viol = 0
            e_slack = np.inf
            g_slack = np.inf
            for _ in range(trials):
                f = rng.standard_normal(outer.n_vertices)
                qf = project_to_inner(outer, inner, f)
                lhs = dirichlet_energy(outer, f)
                rhs = dirichlet_energy(inner, qf)
                slack = lhs - rhs
                e_slack = min(e_slack, slack)
                if slack < -SLACK_TOL * max(lhs, 1.0):
                    e_viol += 1
                f = np.abs(f)
                qf = project_to_inner(outer, inner, f)
                form_v = float(f @ op_v.solve(f))
                form_i = float(qf @ op_i.solve(qf))
                slack = factor * form_i - form_v
                g_slack = min(g_slack, slack)
                if slack < -SLACK_TOL * max(form_v, 1.0):
                    g_viol += 1
        common = dict(spec=plan.spec.spec_id, n_level=n,
                      seed=plan.master_seed, runtime_ms=ck.ms)
        report.add(quantity="energy_violations", value=e_viol, **common)
        report.add(quantity="energy_worst_slack", value=e_slack, **common)
        report.add(quantity="green_form_violations", value=g_viol, **common)
        report.add(quantity="green_form_worst_slack", value=g_slack, **common)
    return report


# ---------------------------------------------------------------------------
# wall probabilities

ESS_FLOOR = 50                     # below this the error bar is not credible


def _estimate_flags(est):
    if est.no_hits:
        return "no_hits"
    if est.ess < ESS_FLOOR:
        return "low_ess"
    return ""


def _green_diag_max(op, rng, sample_cap=2000):
    if op.n <= sample_cap:
        return float(op.green_diagonal().max())
    pick = rng.choice(op.n, size=64, replace=False)
    pairs = np.stack([pick, pick], axis=1)
    return float(op.green_entries(pairs).max())


def default_tilt(plan, op, n_level, rho_hat, rng):
    if plan.tilt_shift is not None:
        return float(plan.tilt_shift), None
    alpha = plan.tilt_alpha
    if alpha is None:
        alpha = 2.0 * _green_diag_max(op, rng)
    if n_level == 0:
        return 0.75 * np.sqrt(alpha), float(alpha)   # ad-hoc small bump
    return float(np.sqrt(alpha * n_level * plan.log_time_scale(rho_hat))), \
        float(alpha)


def wall_probability_scaling(plan):
    """Log probability that the level-N field stays nonnegative everywhere,
    with its rate normalization and the constant-tilt entropy lower bound.

    Direct rejection rows appear for N <= 1 where hits are plentiful; the
    tilted estimator covers the full range.  The rate row divides by
    rho^(-N) N log t and is therefore undefined at N = 0 (flag no_rate).
    The entropy bound row evaluates log q - (KL + 1/e)/q at the tilted
    hit fraction q, a valid lower bound for any tilt.
    """
    rho = plan.resolved_rho()
    log_t = plan.log_time_scale(rho)
    report = StudyReport("wall_probability_scaling",
                         metadata=_metadata(plan, rho, log_t=log_t))
    for n in range(plan.n_min, plan.n_max + 1):
        with _Clock() as ck:
            graph = build_outer_graph(plan.spec, n, max_cells=plan.max_cells)
            op = DirichletOperator(graph)
            wall = np.arange(op.n)
            shift, alpha = default_tilt(plan, op, n, rho,
                                        chain_rng(plan.master_seed, 4, n, 0))
            tilted = estimate_wall_probability(
                op, wall, shift, plan.n_importance,
                chain_rng(plan.master_seed, 4, n, 1))
            direct = None
            if n <= 1:
                direct = estimate_wall_probability(
                    op, wall, 0.0, plan.n_importance,
                    chain_rng(plan.master_seed, 4, n, 2))
            ent = relative_entropy(op, wall, shift)
            q_hat = tilted.hits / tilted.n_samples
            if q_hat > 0:
                bound = float(np.log(q_hat)
                              - (ent + np.exp(-1.0)) / q_hat)
                se_q = np.sqrt(q_hat * (1 - q_hat) / tilted.n_samples)
                bound_se = float(
                    (1 / q_hat + (ent + np.exp(-1.0)) / q_hat**2) * se_q)
            else:
                bound, bound_se = -np.inf, np.nan
        common = dict(spec=plan.spec.spec_id, n_level=n,
                      seed=plan.master_seed, runtime_ms=ck.ms)
        report.add(quantity="tilt_shift", value=shift, **common)
        report.add(quantity="log_p_tilted", value=tilted.log_p_hat,
                   stderr=tilted.stderr_log,
                   flags=_estimate_flags(tilted), **common)
        if direct is not None:
            report.add(quantity="log_p_rejection", value=direct.log_p_hat,
                       stderr=direct.stderr_log,
                       flags=_estimate_flags(direct), **common)
        denom = rho**(-n) * n * log_t
        if n == 0 or tilted.no_hits:
            report.add(quantity="rate_ratio", value=np.nan,
                       flags="no_rate", **common)
        else:
            report.add(quantity="rate_ratio",
                       value=tilted.log_p_hat / denom,
                       stderr=tilted.stderr_log / abs(denom),
                       flags=_estimate_flags(tilted), **common)
        report.add(quantity="entropy_lower_bound", value=bound,
                   stderr=bound_se,
                   flags="" if np.isfinite(bound) else "no_hits", **common)
        report.add(quantity="relative_entropy", value=float(ent), **common)
    return report


# ---------------------------------------------------------------------------
# hard-wall heights

def _window_indices(graph, eps_list):
    d = graph.dimension
    center = np.full(d, 0.5)
    out = {}
    for eps in eps_list:
        if eps >= 1.0:
            out[float(eps)] = np.arange(graph.n_vertices)
        else:
            out[float(eps)] = cubic_neighborhood(graph, center, eps)
    return out


def height_scaling(plan):
    """Gibbs mean heights of the hard-wall field, raw and normalized.

    Per level: the global mean height (window eps >= 1) and one row per
    requested window, each divided by sqrt(N log t) in a companion row for
    N >= 1.  Where the padded ambient is small enough to invert exactly,
    a reference row carries sqrt(2 G_min) with G_min the smallest padded
    Green diagonal over the level-N vertices.
    """
    rho = plan.resolved_rho()
    log_t = plan.log_time_scale(rho)
    report = StudyReport("height_scaling",
                         metadata=_metadata(plan, rho, log_t=log_t))
    for n in range(plan.n_min, plan.n_max + 1):
        with _Clock() as ck:
            graph = build_outer_graph(plan.spec, n, max_cells=plan.max_cells)
            op = DirichletOperator(graph)
            wall = np.arange(op.n)
            windows = _window_indices(graph, plan.eps_list)
            obs = {f"height_eps_{eps:g}":
                   (lambda phi, idx=idx: float(phi[idx].mean()))
                   for eps, idx in windows.items()}
            config = replace(plan.chain, master_seed=plan.master_seed + n)
            _, stats = gibbs_hard_wall(op, wall, config, obs)
        common = dict(spec=plan.spec.spec_id, n_level=n,
                      seed=plan.master_seed, runtime_ms=ck.ms)
        for name, st in stats.observables.items():
            flags = "" if st.agreement_z < 4 else "chain_disagreement"
            report.add(quantity=name, value=st.mean, stderr=st.stderr,
                       flags=flags, **common)
            if n >= 1:
                scale = np.sqrt(n * log_t)
                report.add(quantity=name + "_normalized",
                           value=st.mean / scale, stderr=st.stderr / scale,
                           flags=flags, **common)
        ref = _reference_height(plan, n)
        if ref is None:
            report.add(quantity="reference_sqrt_2gmin", value=np.nan,
                       flags="reference_unavailable", **common)
        else:
            report.add(quantity="reference_sqrt_2gmin", value=ref, **common)
    return report


def _reference_height(plan, n_level, diag_cap=2000):
    """sqrt(2 G_min) over V_N from the padded ambient, or None when the
    padded graph is too large to invert densely."""
    outer = build_outer_graph(plan.spec, n_level + plan.pad,
                              max_cells=plan.max_cells)
    if outer.n_vertices > diag_cap:
        return None
    op = DirichletOperator(outer)
    inner = build_outer_graph(plan.spec, n_level, max_cells=plan.max_cells)
    sub = outer.index_of(inner.coords)
    g_min = float(op.green_diagonal()[sub].min())
    return float(np.sqrt(2.0 * g_min))


# ---------------------------------------------------------------------------

def run_all(plan, trials=1000, density=None):
    """The full study suite with per-study level ranges capped to keep the
    whole run inside a desk-scale budget."""
    reports = [
        capacity_sequence(replace(plan, n_max=min(plan.n_max, 2))),
        green_form_convergence(replace(plan, n_max=min(plan.n_max, 3)),
                               density=density),
        comparison_audit(replace(plan, n_max=min(plan.n_max, 2)),
                         trials=trials),
        wall_probability_scaling(replace(plan, n_max=min(plan.n_max, 2))),
        height_scaling(plan),
    ]
    return reports
