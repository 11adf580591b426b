"""Empirical Gram systems, spectral gaps, and sample-budget bounds.

The central object is the m x m Gram matrix of empirical inner products
G_jk = (1/n) sum_i L_j(x_i) L_k(x_i), which equals the identity in
expectation under random sampling.  Its spectral gap max |eig(G) - 1|
measures how far the empirical norm is from the true L2 norm on the span,
and a matrix Chernoff argument bounds the probability of a large gap by

    2 m exp(-c_delta n / K(m)),   c_delta = delta + (1 - delta) log(1 - delta),

where K(m) is the family's Christoffel-type bound.  Inverting the delta =
1/2 case gives the largest dimension m that n samples stabilize with
probability 1 - 2 n^{-r}:

    K(m) <= kappa n / log n,      kappa = (1 - log 2) / (2 + 2 r).

Eigenvalues are computed with a cyclic Jacobi sweep (deterministic, both
spectrum ends converged simultaneously) rather than an iterative method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .bases import (
    BasisFamily,
    CoefficientVector,
    FamilyKind,
    basis_matrix,
    christoffel_bound,
)
from .errors import DomainError
from .sampling import SampleSet, draw_iid, trial_seed

# relative eigenvalue threshold below which a Gram matrix is treated as
# singular (scale-free, far below the well-conditioned regime)
SINGULARITY_RTOL = 1e-12

JACOBI_OFF_TOL = 1e-13
_JACOBI_MAX_SWEEPS = 60


def _jacobi_kernel(A, V, tol, max_sweeps, want_vectors):
    """Cyclic-by-row Jacobi sweeps on the symmetric matrix A, in place.

    Returns the number of sweeps used, or -1 if the off-diagonal norm did
    not reach ``tol``.
    """
    m = A.shape[0]
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(m):
            for j in range(i + 1, m):
                off += A[i, j] * A[i, j]
        off = math.sqrt(2.0 * off)
        if off <= tol:
            return sweep
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[p, q]
                if abs(apq) <= 1e-200:
                    A[p, q] = 0.0
                    A[q, p] = 0.0
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                app = A[p, p]
                aqq = A[q, q]
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0
                for i in range(m):
                    if i != p and i != q:
                        aip = A[i, p]
                        aiq = A[i, q]
                        A[i, p] = aip - s * (aiq + tau * aip)
                        A[p, i] = A[i, p]
                        A[i, q] = aiq + s * (aip - tau * aiq)
                        A[q, i] = A[i, q]
                if want_vectors:
                    for i in range(m):
                        vip = V[i, p]
                        viq = V[i, q]
                        V[i, p] = vip - s * (viq + tau * vip)
                        V[i, q] = viq + s * (vip - tau * viq)
    # final check after the last sweep
    off = 0.0
    for i in range(m):
        for j in range(i + 1, m):
            off += A[i, j] * A[i, j]
    if math.sqrt(2.0 * off) <= tol:
        return max_sweeps
    return -1


try:  # compiled kernel; the pure-Python body above is the fallback
    from numba import njit

    _jacobi_kernel = njit(cache=True)(_jacobi_kernel)
except ImportError:  # pragma: no cover
    pass


def _jacobi(A: np.ndarray, tol: float, want_vectors: bool):
    m = A.shape[0]
    work = np.array(A, dtype=float, copy=True)
    V = np.eye(m) if want_vectors else np.empty((1, 1))
    # large-norm input makes an absolute 1e-13 off-norm unattainable in
    # float64; loosen the target just enough in that case
    scale = float(np.linalg.norm(work, "fro"))
    tol_eff = max(tol, 16.0 * np.finfo(float).eps * scale)
    sweeps = _jacobi_kernel(work, V, tol_eff, _JACOBI_MAX_SWEEPS, want_vectors)
    if sweeps < 0:
        raise RuntimeError("Jacobi eigensolver failed to converge")
    vals = np.diag(work).copy()
    order = np.argsort(vals)
    if want_vectors:
        return vals[order], V[:, order]
    return vals[order], None


def jacobi_eigenvalues(A: np.ndarray, tol: float = JACOBI_OFF_TOL) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi."""
    vals, _ = _jacobi(A, tol, want_vectors=False)
    return vals


def jacobi_eigensystem(
    A: np.ndarray, tol: float = JACOBI_OFF_TOL
) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and matching eigenvector columns."""
    vals, vecs = _jacobi(A, tol, want_vectors=True)
    return vals, vecs


@dataclass(frozen=True)
class GramSystem:
    """The empirical Gram matrix and right-hand side of the normal system."""

    matrix: np.ndarray
    rhs: np.ndarray
    m: int
    n: int


def build_gram(
    family: BasisFamily, m: int, samples: SampleSet, y: np.ndarray | None = None
) -> GramSystem:
    """Assemble G_jk = (1/n) sum_i L_j(x_i) L_k(x_i) and the data vector
    rhs_k = (1/n) sum_i y_i L_k(x_i).

    Symmetry is exact: the upper triangle is computed once and mirrored.
    """
    B = basis_matrix(family, m, samples.points)
    n = samples.n
    G = B.T @ B / n
    G = np.triu(G)
    G = G + np.triu(G, 1).T
    if y is None:
        rhs = np.zeros(m)
    else:
        y = np.asarray(y, dtype=float)
        if len(y) != n:
            raise ValueError("y must have one entry per sample point")
        rhs = B.T @ y / n
    return GramSystem(matrix=G, rhs=rhs, m=m, n=n)


def _as_matrix(G) -> np.ndarray:
    if isinstance(G, GramSystem):
        return G.matrix
    return np.asarray(G, dtype=float)


def spectral_gap(G) -> float:
    """max_i |eig_i(G) - 1|, the spectral-norm distance from the identity.

    Accepts a GramSystem or a symmetric ndarray; asymmetry beyond 1e-12
    (relative to the largest entry) is rejected.
    """
    A = _as_matrix(G)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("spectral_gap needs a square matrix")
    scale = 1.0 + float(np.max(np.abs(A)))
    if float(np.max(np.abs(A - A.T))) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    vals = jacobi_eigenvalues(A)
    return float(np.max(np.abs(vals - 1.0)))


def chernoff_rate(delta: float) -> float:
    """The exponent rate delta + (1 - delta) log(1 - delta), positive on (0, 1)."""
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    return delta + (1.0 - delta) * math.log1p(-delta)


@dataclass(frozen=True)
class TailBoundInputs:
    """Inputs of the Gram concentration tail bound."""

    m: int
    n: int
    K: float
    delta: float
    r: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise DomainError("delta must lie in (0, 1)")
        if self.K < self.m:
            raise ValueError("K must be at least m")
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be >= 1")


def chernoff_tail_bound(inputs: TailBoundInputs) -> float:
    """min(1, 2m exp(-c_delta n / K)): probability bound for a gap > delta."""
    rate = chernoff_rate(inputs.delta)
    return min(1.0, 2.0 * inputs.m * math.exp(-rate * inputs.n / inputs.K))


def budget_kappa(r: float) -> float:
    """The budget constant kappa = c_{1/2} / (1 + r) = (1 - log 2) / (2 + 2r)."""
    if r <= 0.0:
        raise ValueError("r must be positive")
    return chernoff_rate(0.5) / (1.0 + r)


def accuracy_epsilon(n: int, r: float) -> float:
    """The vanishing factor 4 kappa / log(n) in the expected-error bounds."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return 4.0 * budget_kappa(r) / math.log(n)


def _budget_index_maps(family: BasisFamily):
    """Map a search index to (m, K(m)) for the family, K nondecreasing."""
    kind = family.kind
    if kind is FamilyKind.LEGENDRE_UNIFORM:
        return (lambda i: i + 1), (lambda m: float(m * m))
    if kind is FamilyKind.CHEBYSHEV_ARCSINE:
        return (lambda i: i + 1), (lambda m: float(2 * m - 1))
    if kind is FamilyKind.TRIGONOMETRIC_UNIFORM:
        return (lambda i: 2 * i + 1), (lambda m: float(m))
    if kind is FamilyKind.PIECEWISE_CONSTANT:
        # equal-measure partitions attain the minimal bound K(m) = m
        return (lambda i: i + 1), (lambda m: float(m))
    return None


def stability_budget(family: BasisFamily, n: int, r: float) -> int:
    """Largest m whose Christoffel bound fits under kappa n / log n.

    Returns 0 when even m = 1 does not fit.  For the trigonometric family
    only odd m are admissible; for the shrunk example only m = 2 exists.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    target = budget_kappa(r) * n / math.log(n)
    if family.kind is FamilyKind.SHRUNK_UNIFORM_LINEAR:
        return 2 if christoffel_bound(family, 2) <= target else 0
    m_of, k_of = _budget_index_maps(family)
    if k_of(m_of(0)) > target:
        return 0
    # doubling then bisection; K is nondecreasing in the index
    lo = 0
    hi = 1
    while k_of(m_of(hi)) <= target:
        lo = hi
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if k_of(m_of(mid)) <= target:
            lo = mid
        else:
            hi = mid
    return m_of(lo)


@dataclass(frozen=True)
class TailEstimate:
    """Monte Carlo estimate of Pr[gap > delta] with a Clopper-Pearson CI."""

    probability: float
    ci_low: float
    ci_high: float
    exceed_count: int
    trials: int
    m: int
    n: int
    delta: float
    seed: int

    @property
    def ci_halfwidth(self) -> float:
        return (self.ci_high - self.ci_low) / 2.0


def clopper_pearson(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval for k successes out of n."""
    alpha = 1.0 - confidence
    low = 0.0 if k == 0 else float(stats.beta.ppf(alpha / 2.0, k, n - k + 1))
    high = 1.0 if k == n else float(stats.beta.ppf(1.0 - alpha / 2.0, k + 1, n - k))
    return low, high


def mc_tail_probability(
    family: BasisFamily,
    m: int,
    n: int,
    delta: float,
    trials: int,
    seed: int,
) -> TailEstimate:
    """Fraction of independent draws whose Gram gap exceeds delta.

    Each trial uses the derived seed ``seed ^ trial`` so trials are order
    independent and the estimate is reproducible.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    measure = family.measure
    count = 0
    for t in range(trials):
        samples = draw_iid(measure, n, trial_seed(seed, t))
        gram = build_gram(family, m, samples)
        if spectral_gap(gram.matrix) > delta:
            count += 1
    low, high = clopper_pearson(count, trials)
    return TailEstimate(
        probability=count / trials,
        ci_low=low,
        ci_high=high,
        exceed_count=count,
        trials=trials,
        m=m,
        n=n,
        delta=delta,
        seed=seed,
    )


@dataclass(frozen=True)
class StabilityCheck:
    """Both sides of the norm-stability inequality for one fit."""

    applicable: bool
    gap: float
    coeff_norm: float
    data_norm_scaled: float

    @property
    def holds(self) -> bool | None:
        if not self.applicable:
            return None
        return self.coeff_norm <= self.data_norm_scaled


def stability_constant_check(
    gram: GramSystem, w: CoefficientVector, y: np.ndarray
) -> StabilityCheck:
    """Check the fitted-norm bound |coeffs| <= sqrt(6) ||y||_n.

    The bound is only asserted when the Gram gap is at most 1/2; outside
    that regime the check is reported as inapplicable rather than failed.
    """
    y = np.asarray(y, dtype=float)
    gap = spectral_gap(gram.matrix)
    data_norm = math.sqrt(float(np.mean(y * y)))
    return StabilityCheck(
        applicable=gap <= 0.5,
        gap=gap,
        coeff_norm=w.norm(),
        data_norm_scaled=math.sqrt(6.0) * data_norm,
    )
