"""Estimate numerical sparsity and effective rank from random linear sketches.

Core entry points:

* :func:`estimate_sparsity` on a :func:`acquire_sketch` result gives
  ``s_hat`` for ``s(x) = ||x||_1**2 / ||x||_2**2`` with a confidence interval;
* :func:`estimate_effective_rank` does the same for ``tr(X)**2 / ||X||_F**2``;
* :func:`recover_with_estimated_sparsity` sizes a Gaussian design from
  ``s_hat`` and reconstructs by Basis Pursuit;
* :mod:`sparsity_sketch.adversarial` shows why fixed designs cannot do this.
"""

__version__ = "0.1.0"

from .adversarial import (
    AdversarialPair,
    dense_null_perturbation,
    lemma1_bound,
    minimax_lower_bound,
    null_space_basis,
)
from .errors import (
    BudgetUndefinedError,
    ConstructionFailedError,
    DegenerateSketchError,
    DomainError,
    HypothesisViolationError,
    InfeasibleError,
    NoNullSpaceError,
    ParameterError,
)
from .operators import ExplicitOperator, StackedOperator, StreamedOperator, as_operator
from .rank_sketch import MatrixSketch, RankEstimate, acquire_matrix_sketch, estimate_effective_rank
from .recovery import RecoveryResult, adaptive_budget, basis_pursuit, recover_with_estimated_sparsity
from .sketch_estimation import (
    NOISELESS,
    NoiseSpec,
    SketchEstimate,
    VectorSketch,
    acquire_sketch,
    acquire_sketch_by_law,
    ci_half_widths,
    estimate_l1,
    estimate_l2,
    estimate_sparsity,
    normal_quantile,
    theoretical_relative_error,
)
from .sparsity_measures import (
    best_t_term,
    effective_rank,
    numerical_sparsity,
    prop1_necessary_T,
    prop1_sufficient_T,
    t_term_relative_error,
)
from .stable_sampling import RngStream, StableKind, draw_stable_vector, stable_scale_of_projection
