"""Generalized rank-breaking for Plackett-Luce models."""

from .diagnostics import (
    ComparisonLaplacian,
    DiagnosticsReport,
    comparison_laplacian,
    cramer_rao_lower_bound,
    diagnose,
    eta,
    numerical_hessian_check,
    spectral_quantities,
    theorem1_bounds,
    topology_constants,
)
from .errors import (
    ComplexityCapError,
    ConfigError,
    DataError,
    EmptyLikelihoodError,
    InconsistentPosetError,
    NumericalError,
    UndefinedBoundError,
)
from .estimator import (
    FitOptions,
    FitResult,
    fit_order_M,
    full_mle_small,
    oracle_mle,
    pairwise_rb_inconsistent,
)
from .likelihood import Dataset, GradientResult, edge_log_prob, edge_log_prob_gradient, total_log_likelihood
from .model import Ranking, Theta, project_to_omega, ranking_probability, sample_ranking
from .poset import (
    Observation,
    OrderedPartition,
    Poset,
    RankBreakingEdge,
    breaking_edges,
    extract_ordered_partition,
    filter_order_M,
)
from .synth import ScenarioConfig, generate_canonical, generate_tradeoff

__version__ = "0.1.0"
