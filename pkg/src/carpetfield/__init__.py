"""Lattice graphs on generalized Sierpinski carpets: Green functions,
capacities, and hard-wall Gaussian free fields."""

__version__ = "0.1.0"

from .carpet import (
    CarpetSpec,
    DimensionReport,
    ValidationReport,
    cells_at_level,
    diagonal_cross,
    dimensions,
    four_corners,
    full_cube,
    half_open_partition,
    menger_sponge,
    standard_carpet,
    validate_gsc,
)
from .errors import (
    CarpetError,
    ConfigError,
    InputError,
    NumericError,
    ResourceCapError,
    StructuralError,
)
from .field import (
    ChainConfig,
    FieldSample,
    WallProbability,
    WallRunStats,
    chain_rng,
    conditional_decompose,
    empirical_covariance,
    estimate_wall_probability,
    gibbs_hard_wall,
    relative_entropy,
    sample_gff,
    sample_gff_matrix,
    truncated_normal_lower,
)
from .graphs import (
    CoarseSets,
    LatticeGraph,
    build_inner_graph,
    build_outer_graph,
    coarse_sets,
    cubic_neighborhood,
    default_anchor,
    mean_value_operator,
    project_to_inner,
)
from .green import (
    DirichletOperator,
    ResistanceScale,
    crosswire_resistance,
    dirichlet_energy,
    equilibrium_potential,
    estimate_rho,
    green_form,
    pad_convergence,
)
from .studies import (
    StudyPlan,
    capacity_sequence,
    comparison_audit,
    green_form_convergence,
    height_scaling,
    run_all,
    wall_probability_scaling,
)
from .config import ConfigDocument, parse_config
from .reporting import RunManifest, StudyReport, StudyRow

__all__ = [name for name in dir() if not name.startswith("_")]
