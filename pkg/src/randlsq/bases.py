"""Orthonormal basis families and their Christoffel-type bounds.

Each family couples a function system, orthonormal under the family's own
measure, with closed-form evaluation and the sup of the squared basis sum

    sup_x  sum_j L_j(x)^2,

which controls how many random samples stabilize a least squares fit of
dimension m.  Supported families:

* ``legendre``   scaled Legendre polynomials, uniform measure on [-1, 1];
  the bound is m^2.
* ``chebyshev``  first-kind Chebyshev polynomials with sqrt(2) scaling,
  arcsine measure; the bound is 2m - 1.
* ``trig``       real trigonometric system {1, sqrt2 cos kx, sqrt2 sin kx},
  uniform measure on [-pi, pi], odd m only; the bound is m.
* ``piecewise``  indicator functions of a partition, scaled to unit norm;
  the bound is max_k 1 / rho(I_k), minimized by equal-measure cells.
* ``shrunk``     the degenerate two-element example {1, sqrt3 x / eps} on
  [-1, 1] under a uniform measure squeezed onto [-eps, eps]; its bound
  1 + 3 / eps^2 blows up as eps -> 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError
from .measures import Measure, chebyshev_measure, shrunk_measure, uniform_measure
from .quadrature import DEFAULT_MAX_DEPTH, DEFAULT_TOL, integrate_against_measure

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)


class FamilyKind(str, enum.Enum):
    LEGENDRE_UNIFORM = "legendre"
    CHEBYSHEV_ARCSINE = "chebyshev"
    TRIGONOMETRIC_UNIFORM = "trig"
    PIECEWISE_CONSTANT = "piecewise"
    SHRUNK_UNIFORM_LINEAR = "shrunk"


@dataclass(frozen=True)
class BasisFamily:
    """An orthonormal system together with its measure.

    ``partition`` (piecewise only) holds the sorted cell boundaries,
    endpoints included.  ``epsilon`` (shrunk only) is the half-width of the
    squeezed measure's support.  Instances are immutable and safe to share
    across worker processes.
    """

    kind: FamilyKind
    partition: tuple[float, ...] | None = None
    epsilon: float | None = None
    cell_measure: Measure | None = field(default=None)
    cell_mass: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        if self.kind is FamilyKind.PIECEWISE_CONSTANT:
            if self.partition is None or len(self.partition) < 2:
                raise ValueError("piecewise family needs >= 2 partition boundaries")
            bounds = tuple(float(b) for b in self.partition)
            if any(bounds[i] >= bounds[i + 1] for i in range(len(bounds) - 1)):
                raise ValueError("partition boundaries must be strictly increasing")
            object.__setattr__(self, "partition", bounds)
            if self.cell_measure is None:
                object.__setattr__(
                    self, "cell_measure", uniform_measure(bounds[0], bounds[-1])
                )
            if self.cell_mass is not None and len(self.cell_mass) != len(bounds) - 1:
                raise ValueError("cell_mass needs one entry per cell")
        elif self.kind is FamilyKind.SHRUNK_UNIFORM_LINEAR:
            if self.epsilon is None or not 0.0 < self.epsilon <= 1.0:
                raise ValueError("shrunk family needs epsilon in (0, 1]")

    @property
    def domain(self) -> tuple[float, float]:
        if self.kind is FamilyKind.TRIGONOMETRIC_UNIFORM:
            return (-math.pi, math.pi)
        if self.kind is FamilyKind.PIECEWISE_CONSTANT:
            return (self.partition[0], self.partition[-1])
        return (-1.0, 1.0)

    @property
    def measure(self) -> Measure:
        """The measure the family is orthonormal against."""
        if self.kind is FamilyKind.LEGENDRE_UNIFORM:
            return uniform_measure(-1.0, 1.0)
        if self.kind is FamilyKind.CHEBYSHEV_ARCSINE:
            return chebyshev_measure()
        if self.kind is FamilyKind.TRIGONOMETRIC_UNIFORM:
            return uniform_measure(-math.pi, math.pi)
        if self.kind is FamilyKind.PIECEWISE_CONSTANT:
            return self.cell_measure
        return shrunk_measure(self.epsilon)

    @property
    def num_cells(self) -> int:
        if self.kind is not FamilyKind.PIECEWISE_CONSTANT:
            raise ValueError("num_cells only applies to piecewise families")
        return len(self.partition) - 1

    def cell_weights(self) -> np.ndarray:
        """Measure of each partition cell (piecewise families).

        Constructors that know the masses analytically store them in
        ``cell_mass``; otherwise the masses come from CDF differences.
        """
        if self.cell_mass is not None:
            return np.asarray(self.cell_mass)
        bounds = np.asarray(self.partition)
        cdf = self.cell_measure.cdf(bounds)
        return np.diff(cdf)

    def max_dimension(self) -> int | None:
        """Largest supported m, or None when unbounded."""
        if self.kind is FamilyKind.PIECEWISE_CONSTANT:
            return self.num_cells
        if self.kind is FamilyKind.SHRUNK_UNIFORM_LINEAR:
            return 2
        return None


def legendre_family() -> BasisFamily:
    return BasisFamily(FamilyKind.LEGENDRE_UNIFORM)


def chebyshev_family() -> BasisFamily:
    return BasisFamily(FamilyKind.CHEBYSHEV_ARCSINE)


def trigonometric_family() -> BasisFamily:
    return BasisFamily(FamilyKind.TRIGONOMETRIC_UNIFORM)


def piecewise_family(
    boundaries, measure: Measure | None = None, cell_mass=None
) -> BasisFamily:
    return BasisFamily(
        FamilyKind.PIECEWISE_CONSTANT,
        partition=tuple(float(b) for b in boundaries),
        cell_measure=measure,
        cell_mass=tuple(float(w) for w in cell_mass) if cell_mass is not None else None,
    )


def equal_measure_piecewise_family(measure: Measure, num_cells: int) -> BasisFamily:
    """Partition the measure's support into cells of equal mass 1/num_cells.

    The masses are stored exactly (each cell carries 1/num_cells by
    construction), so one-point-per-cell Gram matrices come out exactly
    diagonal instead of inheriting boundary roundoff.
    """
    if num_cells < 1:
        raise ValueError("num_cells must be >= 1")
    u = np.arange(num_cells + 1) / num_cells
    boundaries = measure.inverse_cdf(u)
    return piecewise_family(
        boundaries, measure=measure, cell_mass=(1.0 / num_cells,) * num_cells
    )


def shrunk_family(epsilon: float) -> BasisFamily:
    return BasisFamily(FamilyKind.SHRUNK_UNIFORM_LINEAR, epsilon=epsilon)


def family_from_token(token: str, **kwargs) -> BasisFamily:
    """Build a family from its CLI token (legendre, chebyshev, trig, ...)."""
    kind = FamilyKind(token)
    if kind is FamilyKind.PIECEWISE_CONSTANT:
        cells = kwargs.get("num_cells")
        if cells is None:
            raise ValueError("piecewise family needs num_cells")
        return equal_measure_piecewise_family(
            kwargs.get("measure") or uniform_measure(-1.0, 1.0), cells
        )
    if kind is FamilyKind.SHRUNK_UNIFORM_LINEAR:
        eps = kwargs.get("epsilon")
        if eps is None:
            raise ValueError("shrunk family needs epsilon")
        return shrunk_family(eps)
    return BasisFamily(kind)


def _validate_m(family: BasisFamily, m: int) -> None:
    if m < 1:
        raise ValueError("m must be >= 1")
    if family.kind is FamilyKind.TRIGONOMETRIC_UNIFORM and m % 2 == 0:
        raise ValueError("trigonometric family needs odd m (m = 2p + 1)")
    if family.kind is FamilyKind.PIECEWISE_CONSTANT and m != family.num_cells:
        raise ValueError(
            f"piecewise family has {family.num_cells} cells; m must match"
        )
    if family.kind is FamilyKind.SHRUNK_UNIFORM_LINEAR and m > 2:
        raise ValueError("shrunk family only defines m <= 2")


def _check_domain(family: BasisFamily, x: np.ndarray) -> None:
    lo, hi = family.domain
    if np.any(x < lo) or np.any(x > hi):
        raise DomainError(f"point outside domain [{lo}, {hi}]")


def basis_matrix(family: BasisFamily, m: int, points) -> np.ndarray:
    """Evaluate the first m basis functions on an array of points.

    Returns an (n, m) matrix whose (i, k) entry is L_{k+1}(x_i).
    """
    _validate_m(family, m)
    x = np.atleast_1d(np.asarray(points, dtype=float))
    _check_domain(family, x)
    n = x.size

    if family.kind is FamilyKind.LEGENDRE_UNIFORM:
        # three-term recurrence on unnormalized polynomials, scaled at the
        # end; rows are contiguous during the recurrence
        out = np.empty((m, n))
        out[0] = 1.0
        if m > 1:
            out[1] = x
        for k in range(2, m):
            out[k] = ((2 * k - 1) * x * out[k - 1] - (k - 1) * out[k - 2]) / k
        scale = np.sqrt(2.0 * np.arange(1, m + 1) - 1.0)
        return (out * scale[:, None]).T

    if family.kind is FamilyKind.CHEBYSHEV_ARCSINE:
        theta = np.arccos(np.clip(x, -1.0, 1.0))
        out = np.empty((m, n))
        out[0] = 1.0
        for k in range(1, m):
            out[k] = SQRT2 * np.cos(k * theta)
        return out.T

    if family.kind is FamilyKind.TRIGONOMETRIC_UNIFORM:
        p = (m - 1) // 2
        out = np.empty((m, n))
        out[0] = 1.0
        for k in range(1, p + 1):
            out[2 * k - 1] = SQRT2 * np.cos(k * x)
            out[2 * k] = SQRT2 * np.sin(k * x)
        return out.T

    if family.kind is FamilyKind.PIECEWISE_CONSTANT:
        # boundary points belong to the cell on their right; last cell closed
        interior = np.asarray(family.partition)[1:-1]
        idx = np.searchsorted(interior, x, side="right")
        weights = family.cell_weights()
        out = np.zeros((n, m))
        out[np.arange(n), idx] = 1.0 / np.sqrt(weights[idx])
        return out

    out = np.empty((n, m))
    out[:, 0] = 1.0
    if m == 2:
        out[:, 1] = (SQRT3 / family.epsilon) * x
    return out


def eval_basis(family: BasisFamily, m: int, x: float) -> np.ndarray:
    """Values (L_1(x), ..., L_m(x)) at a single point."""
    return basis_matrix(family, m, [x])[0]


def squared_basis_sum(family: BasisFamily, m: int, points) -> np.ndarray:
    """sum_j L_j(x)^2 evaluated on an array of points."""
    B = basis_matrix(family, m, points)
    return np.einsum("ij,ij->i", B, B)


def christoffel_bound(family: BasisFamily, m: int) -> float:
    """Closed-form sup over the domain of the squared basis sum."""
    if family.kind is FamilyKind.SHRUNK_UNIFORM_LINEAR:
        if m != 2:
            raise ValueError("shrunk family bound is only defined for m = 2")
        return 1.0 + 3.0 / family.epsilon**2
    _validate_m(family, m)
    if family.kind is FamilyKind.LEGENDRE_UNIFORM:
        return float(m * m)
    if family.kind is FamilyKind.CHEBYSHEV_ARCSINE:
        return float(2 * m - 1)
    if family.kind is FamilyKind.TRIGONOMETRIC_UNIFORM:
        return float(m)
    return float(np.max(1.0 / family.cell_weights()))


def _golden_section_max(
    fn: Callable[[float], float], a: float, b: float, iters: int = 80
) -> float:
    """Maximum value of fn on [a, b] by golden-section search."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = fn(x1), fn(x2)
    best = max(f1, f2)
    for _ in range(iters):
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = fn(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = fn(x1)
        best = max(best, f1, f2)
    return best


def christoffel_bound_numeric(
    family: BasisFamily, m: int, grid_size: int = 10001
) -> float:
    """Grid search for the squared-basis-sum sup, polished around the argmax.

    The result never exceeds the analytic bound (the sum is bounded by it
    pointwise) and converges to it as the grid is refined.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    _validate_m(family, m)
    lo, hi = family.domain
    grid = np.linspace(lo, hi, grid_size)
    vals = squared_basis_sum(family, m, grid)
    i = int(np.argmax(vals))
    best = float(vals[i])

    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid_size - 1)]

    def point_val(x: float) -> float:
        return float(squared_basis_sum(family, m, np.array([x]))[0])

    return max(best, _golden_section_max(point_val, a, b))


@dataclass(frozen=True)
class CoefficientVector:
    """Coefficients of an expansion v = sum_j u_j L_j.

    Orthonormality makes the L2 norm of v equal to the Euclidean norm of
    the coefficients.
    """

    family: BasisFamily
    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "coeffs", arr)
        _validate_m(self.family, self.m)

    @property
    def m(self) -> int:
        return len(self.coeffs)

    def evaluate(self, points):
        """Value of the expansion at one point or an array of points."""
        vals = basis_matrix(self.family, self.m, points) @ self.coeffs
        if np.isscalar(points) or np.ndim(points) == 0:
            return float(vals[0])
        return vals

    __call__ = evaluate

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def zero_coefficients(family: BasisFamily, m: int) -> CoefficientVector:
    return CoefficientVector(family, np.zeros(m))


def project_best(
    fn: Callable[[np.ndarray], np.ndarray],
    family: BasisFamily,
    m: int,
    quad_tol: float = DEFAULT_TOL,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> CoefficientVector:
    """Orthogonal projection of ``fn`` onto the span of the first m basis
    functions, computed coefficient by coefficient from the inner-product
    integrals against the family's measure.
    """
    _validate_m(family, m)
    measure = family.measure
    coeffs = np.empty(m)
    for k in range(m):
        def integrand(x, _k=k):
            return np.asarray(fn(x)) * basis_matrix(family, m, x)[:, _k]

        coeffs[k] = integrate_against_measure(
            integrand, measure, tol=quad_tol, max_depth=max_depth
        )
    return CoefficientVector(family, coeffs)


def best_error(
    fn: Callable[[np.ndarray], np.ndarray],
    family: BasisFamily,
    m: int,
    quad_tol: float = DEFAULT_TOL,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> float:
    """Distance from ``fn`` to the m-dimensional span in the family's L2.

    Uses the Pythagorean identity: squared norm of fn minus the squared
    coefficient sum, clamped at zero before the square root.
    """
    proj = project_best(fn, family, m, quad_tol=quad_tol, max_depth=max_depth)
    norm_sq = integrate_against_measure(
        lambda x: np.asarray(fn(x)) ** 2, family.measure, tol=quad_tol,
        max_depth=max_depth,
    )
    return math.sqrt(max(norm_sq - float(np.sum(proj.coeffs**2)), 0.0))
