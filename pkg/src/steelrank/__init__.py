"""Rank-based many-to-one and all-pairs comparisons under the conditional
randomization model, with exact tie handling throughout."""

from .confidence import (
    ConfidenceResult,
    IndexSelection,
    pairwise_differences,
    select_indices,
    simultaneous_bounds,
    simultaneous_intervals,
)
from .errors import BudgetError, NumericError, ParameterError
from .gauss import (
    FactorModel,
    joint_lower_box_prob,
    solve_common_threshold,
    std_normal_cdf,
    tail_prob_abs,
    tail_prob_max,
    tail_prob_min,
)
from .moments import MomentSet, cov_w, factor_decomposition, mean_w, var_w
from .pairwise import PairwiseMoments, pairwise_moment_matrix, pairwise_test
from .randomization import (
    ExactMoments,
    NullSample,
    PValue,
    TestResult,
    exact_moments,
    exact_null_distribution,
    exact_p_value,
    simulate_p_value,
    simulated_tail_curve,
    split_count,
)
from .ranks import (
    Diagnostics,
    RankedSamples,
    TiePattern,
    check_asymptotic_conditions,
    compute_midranks,
    extract_tie_pattern,
    rank_samples,
)
from .statistics import SteelObservation, mann_whitney_star, rank_sums, steel_statistics

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "ConfidenceResult",
    "Diagnostics",
    "ExactMoments",
    "FactorModel",
    "IndexSelection",
    "MomentSet",
    "NullSample",
    "NumericError",
    "PValue",
    "PairwiseMoments",
    "ParameterError",
    "RankedSamples",
    "SteelObservation",
    "TestResult",
    "TiePattern",
    "check_asymptotic_conditions",
    "compute_midranks",
    "cov_w",
    "exact_moments",
    "exact_null_distribution",
    "exact_p_value",
    "extract_tie_pattern",
    "factor_decomposition",
    "joint_lower_box_prob",
    "mann_whitney_star",
    "mean_w",
    "pairwise_differences",
    "pairwise_moment_matrix",
    "pairwise_test",
    "rank_samples",
    "rank_sums",
    "select_indices",
    "simulate_p_value",
    "simulated_tail_curve",
    "simultaneous_bounds",
    "simultaneous_intervals",
    "solve_common_threshold",
    "split_count",
    "std_normal_cdf",
    "steel_statistics",
    "tail_prob_abs",
    "tail_prob_max",
    "tail_prob_min",
    "var_w",
]
