"""Least squares fitting, truncation, and error measurement.

The fit solves the m x m normal system assembled by ``build_gram``.  When
the Gram matrix is numerically singular (smallest eigenvalue below a
scale-free threshold of the largest) the fit returns identically zero
coefficients and flags the result instead of raising.

Errors are measured in the family's own weighted L2 norm by adaptive
Simpson quadrature; for the arcsine weight the integral runs in the angle
variable so the endpoint singularity never appears.  The truncation
operator clamps pointwise values to [-L, L]; it is a 1-Lipschitz
contraction that leaves any function bounded by L unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .bases import BasisFamily, CoefficientVector, zero_coefficients
from .measures import Measure
from .quadrature import DEFAULT_MAX_DEPTH, DEFAULT_TOL, l2_norm_squared
from .sampling import SampleSet
from .stability import (
    SINGULARITY_RTOL,
    GramSystem,
    build_gram,
    jacobi_eigenvalues,
)


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerance, depth limit, and measure for error quadrature."""

    measure: Measure
    tol: float = DEFAULT_TOL
    max_depth: int = DEFAULT_MAX_DEPTH

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


@dataclass(frozen=True)
class FitResult:
    """Outcome of one least squares solve."""

    coeffs: CoefficientVector
    singular: bool
    gap: float
    truncation_level: float | None = None

    @property
    def m(self) -> int:
        return self.coeffs.m

    def truncated(self, level: float) -> "FitResult":
        """Same fit, with pointwise clamping to [-level, level] when evaluated."""
        if level <= 0.0:
            raise ValueError("truncation level must be positive")
        return replace(self, truncation_level=level)

    def evaluate(self, points):
        """Fitted (and possibly truncated) values at the given points."""
        vals = self.coeffs.evaluate(points)
        if self.truncation_level is not None:
            vals = truncate(vals, self.truncation_level)
        return vals


def fit_least_squares(
    family: BasisFamily, m: int, samples: SampleSet, y: np.ndarray
) -> FitResult:
    """Solve the normal system for the least squares coefficients.

    Records the Gram spectral gap alongside the solution.  A singular
    system (including any m > n) yields the zero fit, flagged, rather
    than an error.
    """
    gram = build_gram(family, m, samples, y)
    return solve_gram(gram, family)


def solve_gram(gram: GramSystem, family: BasisFamily) -> FitResult:
    """Solve an already-assembled Gram system."""
    vals = jacobi_eigenvalues(gram.matrix)
    lam_min = float(vals[0])
    lam_max = float(vals[-1])
    gap = float(np.max(np.abs(vals - 1.0)))
    if lam_max <= 0.0 or lam_min < SINGULARITY_RTOL * lam_max:
        return FitResult(
            coeffs=zero_coefficients(family, gram.m), singular=True, gap=gap
        )
    try:
        u = cho_solve(cho_factor(gram.matrix, lower=True), gram.rhs)
    except np.linalg.LinAlgError:
        return FitResult(
            coeffs=zero_coefficients(family, gram.m), singular=True, gap=gap
        )
    return FitResult(
        coeffs=CoefficientVector(family, u), singular=False, gap=gap
    )


def truncate(value, level: float):
    """Clamp to [-level, level]: sign(t) min(level, |t|), elementwise."""
    if level <= 0.0:
        raise ValueError("truncation level must be positive")
    return np.clip(value, -level, level)


def l2_error(
    fn: Callable[[np.ndarray], np.ndarray],
    fit: FitResult,
    quad: QuadratureSpec,
) -> float:
    """Weighted L2 distance between the target and the (truncated) fit."""
    sq = l2_norm_squared(
        lambda x: np.asarray(fn(x)) - fit.evaluate(x),
        quad.measure,
        tol=quad.tol,
        max_depth=quad.max_depth,
    )
    return math.sqrt(sq)


def empirical_norm(v, samples: SampleSet) -> float:
    """Root mean square of v over the sample points.

    ``v`` may be a callable, a CoefficientVector, or a FitResult.
    """
    if isinstance(v, (CoefficientVector, FitResult)):
        vals = v.evaluate(samples.points)
    else:
        vals = np.asarray(v(samples.points), dtype=float)
    return math.sqrt(float(np.mean(vals * vals)))


def add_noise(y_clean: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Add centered Gaussian noise of standard deviation sigma, seeded.

    Gaussian noise realizes the maximal-conditional-variance model with
    equality; sigma = 0 returns the input unchanged.
    """
    if sigma < 0.0:
        raise ValueError("sigma must be >= 0")
    y = np.asarray(y_clean, dtype=float)
    if sigma == 0.0:
        return y.copy()
    rng = np.random.default_rng(seed)
    return y + sigma * rng.standard_normal(len(y))
