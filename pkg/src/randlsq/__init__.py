"""Stability and accuracy of least squares approximation on random and
deterministic samples: orthonormal basis families, Gram concentration
bounds, sample budgets, truncated estimators, and an experiment harness.
"""

from .bases import (
    BasisFamily,
    CoefficientVector,
    FamilyKind,
    basis_matrix,
    best_error,
    chebyshev_family,
    christoffel_bound,
    christoffel_bound_numeric,
    equal_measure_piecewise_family,
    eval_basis,
    legendre_family,
    piecewise_family,
    project_best,
    shrunk_family,
    squared_basis_sum,
    trigonometric_family,
    zero_coefficients,
)
from .errors import DomainError, QuadratureError
from .estimator import (
    FitResult,
    QuadratureSpec,
    add_noise,
    empirical_norm,
    fit_least_squares,
    l2_error,
    solve_gram,
    truncate,
)
from .experiments import (
    BoundReport,
    ExperimentRecord,
    OptimalMTable,
    SlopeEstimate,
    TargetFunction,
    deterministic_gap_bound,
    deterministic_stability_table,
    error_vs_m_curve,
    instability_onset,
    noiseless_bound_experiment,
    noisy_bound_experiment,
    optimal_m_curve,
    scaling_exponent,
    target_function,
)
from .measures import Measure, MeasureKind, chebyshev_measure, shrunk_measure, uniform_measure
from .quadrature import adaptive_simpson, integrate_against_measure, l2_norm_squared
from .sampling import SampleSet, deterministic_points, draw_iid, trial_seed
from .stability import (
    GramSystem,
    StabilityCheck,
    TailBoundInputs,
    TailEstimate,
    accuracy_epsilon,
    budget_kappa,
    build_gram,
    chernoff_rate,
    chernoff_tail_bound,
    clopper_pearson,
    jacobi_eigensystem,
    jacobi_eigenvalues,
    mc_tail_probability,
    spectral_gap,
    stability_budget,
    stability_constant_check,
)

__version__ = "0.1.0"
