"""Experiment drivers: error curves, optimal-dimension scaling, and
empirical checks of the concentration and accuracy bounds.

All drivers are deterministic for a fixed (config, seed) pair.  Trials fan
out as independent work items keyed by trial index; per-trial seeds are
derived as ``seed ^ trial`` and results are reduced in submission order,
so serial and parallel runs produce identical record streams.  BLAS is
pinned to one thread inside each work item to keep floating point results
independent of worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import lapack, solve_triangular
from threadpoolctl import threadpool_limits

from .bases import BasisFamily, FamilyKind, basis_matrix, best_error
from .estimator import (
    QuadratureSpec,
    add_noise,
    fit_least_squares,
    l2_error,
    solve_gram,
)
from .quadrature import DEFAULT_TOL
from .sampling import deterministic_points, draw_iid, trial_seed
from .stability import (
    SINGULARITY_RTOL,
    GramSystem,
    accuracy_epsilon,
    spectral_gap,
    stability_budget,
)

DEFAULT_SEED = 42

# salt for the noise stream so it never collides with the draw stream
_NOISE_SEED_SALT = 0x517CC1B7

# below this measured error the optimal dimension cannot be located
# reliably (floating point floor) and the trial is marked unresolved
UNRESOLVED_ERROR_FLOOR = 1e-14


# ---------------------------------------------------------------------------
# target functions

@dataclass(frozen=True)
class TargetFunction:
    """A named target with a known sup bound on [-1, 1]."""

    label: str
    fn: Callable[[np.ndarray], np.ndarray]
    sup_bound: float


def _runge(x):
    x = np.asarray(x, dtype=float)
    return 1.0 / (1.0 + 25.0 * x * x)


def _absval(x):
    return np.abs(np.asarray(x, dtype=float))


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


TARGETS = {
    "runge": TargetFunction("runge", _runge, 1.0),
    "abs": TargetFunction("abs", _absval, 1.0),
    "zero": TargetFunction("zero", _zero, 1.0),
}


def target_function(label: str) -> TargetFunction:
    try:
        return TARGETS[label]
    except KeyError:
        raise ValueError(
            f"unknown target {label!r}; choose from {sorted(TARGETS)}"
        ) from None


# ---------------------------------------------------------------------------
# records

@dataclass(frozen=True)
class ExperimentRecord:
    """One row of an experiment sweep."""

    experiment: str
    family: str
    measure: str
    f: str
    n: int
    m: int
    seed: int
    trial: int
    error: float
    gap: float
    bounds: dict[str, float]


# ---------------------------------------------------------------------------
# parallel fan-out

def _run_jobs(worker, args_list: list, jobs: int) -> list:
    """Map ``worker`` over work items, in order, optionally in processes."""
    if jobs is None or jobs <= 1 or len(args_list) <= 1:
        return [worker(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, args_list))


# ---------------------------------------------------------------------------
# fixed quadrature grid for full m-sweeps

@lru_cache(maxsize=8)
def _gauss_rule(npts: int):
    return np.polynomial.legendre.leggauss(npts)


def _sweep_quad_grid(family: BasisFamily, m_max: int):
    """Gauss nodes and probability weights for measuring sweep errors.

    Two panels split at the domain midpoint (the |x| kink lands on the
    panel boundary); the arcsine measure is handled in the angle variable.
    The node count grows with m_max so that untruncated squared residuals
    of polynomial fits are integrated exactly.
    """
    npts = 256
    while npts < m_max + 16:
        npts *= 2
    nodes, weights = _gauss_rule(npts)

    def mapped(lo, hi):
        half = (hi - lo) / 2.0
        return half * nodes + (lo + hi) / 2.0, half * weights

    if family.kind is FamilyKind.CHEBYSHEV_ARCSINE:
        t1, w1 = mapped(0.0, math.pi / 2.0)
        t2, w2 = mapped(math.pi / 2.0, math.pi)
        theta = np.concatenate([t1, t2])
        w = np.concatenate([w1, w2]) / math.pi
        return np.cos(theta), w
    lo, hi = family.domain
    mid = (lo + hi) / 2.0
    x1, w1 = mapped(lo, mid)
    x2, w2 = mapped(mid, hi)
    x = np.concatenate([x1, x2])
    w = np.concatenate([w1, w2]) / (hi - lo)
    return x, w


def _valid_m_values(family: BasisFamily, n: int) -> list[int]:
    if family.kind is FamilyKind.TRIGONOMETRIC_UNIFORM:
        return list(range(1, n + 1, 2))
    return list(range(1, n + 1))


def _require_sweepable(family: BasisFamily) -> None:
    if family.kind not in (
        FamilyKind.LEGENDRE_UNIFORM,
        FamilyKind.CHEBYSHEV_ARCSINE,
        FamilyKind.TRIGONOMETRIC_UNIFORM,
    ):
        raise ValueError(
            "error sweeps need a family with unbounded dimension "
            f"(got {family.kind.value})"
        )


def _ls_error_sweep(
    family: BasisFamily,
    points: np.ndarray,
    y: np.ndarray,
    m_max: int,
    sup_bound: float,
    fn: Callable[[np.ndarray], np.ndarray],
    gram: np.ndarray | None = None,
    rhs: np.ndarray | None = None,
) -> np.ndarray:
    """Truncated-fit L2 errors for every dimension 1..m_max on one sample.

    Solves the normal equations for every leading block at once: the
    Cholesky factor of a leading block of the Gram matrix is the leading
    block of the full factor, so a single factorization serves all m, and
    errors are measured on a fixed Gauss grid.  Dimensions at or past the
    solver's near-singularity cutoff (smallest eigenvalue below 1e-12 of
    the largest, located by bisection underneath a Cholesky-pivot bound)
    fall back to the zero fit, matching the singular-system convention.
    """
    n = len(points)
    if gram is None or rhs is None:
        B = basis_matrix(family, m_max, points)
        gram = B.T @ B / n
        gram = np.triu(gram) + np.triu(gram, 1).T
        rhs = B.T @ np.asarray(y, dtype=float) / n

    L, info = lapack.dpotrf(gram, lower=1, clean=1)
    m_fact = m_max if info == 0 else info - 1
    pivots = np.diag(L)[:m_fact] ** 2
    scale = np.maximum.accumulate(np.diag(gram))[:m_fact]
    bad = np.flatnonzero(pivots <= SINGULARITY_RTOL * scale)
    m_sing = int(bad[0]) + 1 if len(bad) else m_fact + 1

    # refine to the eigenvalue rule the solver itself applies; the ratio
    # lam_min/lam_max decreases strictly in m (interlacing), and the
    # eigenvalue cutoff can only precede the pivot cutoff
    def _singular(m: int) -> bool:
        lam = np.linalg.eigvalsh(gram[:m, :m])
        return lam[0] < SINGULARITY_RTOL * lam[-1]

    hi = min(m_sing - 1, m_max)
    if hi >= 1 and _singular(hi):
        if _singular(1):
            m_sing = 1
        else:
            lo = 1  # sing(lo) False, sing(hi) True: bisect for the first True
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if _singular(mid):
                    hi = mid
                else:
                    lo = mid
            m_sing = hi

    m_ok = m_sing - 1  # largest dimension solved as nonsingular
    U = np.zeros((m_max, m_max))
    if m_ok > 0:
        Lk = L[:m_ok, :m_ok]
        Linv = solve_triangular(Lk, np.eye(m_ok), lower=True)
        z = Linv @ rhs[:m_ok]
        # u_m = (L_m)^{-T} z_m for every m: cumulative sums over columns
        U[:m_ok, :m_ok] = np.cumsum(Linv.T * z[None, :], axis=1)

    xq, wq = _sweep_quad_grid(family, m_max)
    PHI = basis_matrix(family, m_max, xq)
    with np.errstate(all="ignore"):
        W = PHI @ U
        resid = fn(xq)[:, None] - np.clip(W, -sup_bound, sup_bound)
        err_sq = wq @ (resid * resid)
    errors = np.sqrt(np.maximum(err_sq, 0.0))
    return np.where(np.isfinite(errors), errors, np.inf)


# ---------------------------------------------------------------------------
# error as a function of m, one fixed sample

def error_vs_m_curve(
    f: TargetFunction,
    family: BasisFamily,
    n: int,
    m_values: Sequence[int] | None = None,
    seed: int = DEFAULT_SEED,
    quad: QuadratureSpec | None = None,
) -> list[ExperimentRecord]:
    """Truncated least squares error for each m, fitted on one random
    sample of n points drawn once and reused across all m."""
    _require_sweepable(family)
    if m_values is None:
        m_values = _valid_m_values(family, n)
    m_values = sorted(set(int(m) for m in m_values))
    measure = family.measure
    if quad is None:
        quad = QuadratureSpec(measure)
    samples = draw_iid(measure, n, seed)
    y = f.fn(samples.points)

    m_max = max(m_values)
    B = basis_matrix(family, m_max, samples.points)
    G = B.T @ B / n
    G = np.triu(G) + np.triu(G, 1).T
    rhs = B.T @ y / n

    records = []
    for m in m_values:
        gram = GramSystem(G[:m, :m], rhs[:m], m, n)
        fit = solve_gram(gram, family).truncated(f.sup_bound)
        err = l2_error(f.fn, fit, quad)
        records.append(
            ExperimentRecord(
                experiment="error-vs-m",
                family=family.kind.value,
                measure=measure.kind.value,
                f=f.label,
                n=n,
                m=m,
                seed=seed,
                trial=0,
                error=err,
                gap=fit.gap,
                bounds={},
            )
        )
    return records


def instability_onset(records: Sequence[ExperimentRecord], factor: float = 10.0) -> int | None:
    """First m whose error exceeds ``factor`` times the running minimum."""
    running = math.inf
    for rec in sorted(records, key=lambda r: r.m):
        if rec.error > factor * running:
            return rec.m
        running = min(running, rec.error)
    return None


# ---------------------------------------------------------------------------
# optimal dimension as a function of n

@dataclass(frozen=True)
class OptimalMTable:
    """Per-trial best dimensions m(n); NaN marks unresolved trials."""

    f_label: str
    family_kind: str
    n_values: tuple[int, ...]
    trials: int
    seed: int
    trial_m: np.ndarray
    trial_error: np.ndarray

    @property
    def mean_m(self) -> np.ndarray:
        with np.errstate(all="ignore"):
            return np.nanmean(self.trial_m, axis=1)

    @property
    def stderr_m(self) -> np.ndarray:
        with np.errstate(all="ignore"):
            counts = np.sum(np.isfinite(self.trial_m), axis=1)
            sd = np.nanstd(self.trial_m, axis=1, ddof=1)
            return np.where(counts > 1, sd / np.sqrt(np.maximum(counts, 1)), 0.0)

    @classmethod
    def from_means(cls, n_values: Sequence[int], means: Sequence[float]) -> "OptimalMTable":
        """Synthetic single-trial table, for slope checks on exact curves."""
        n_values = tuple(int(n) for n in n_values)
        arr = np.asarray(means, dtype=float)[:, None]
        return cls(
            f_label="synthetic",
            family_kind="synthetic",
            n_values=n_values,
            trials=1,
            seed=0,
            trial_m=arr,
            trial_error=np.zeros_like(arr),
        )


def _optimal_m_worker(args):
    family, f_label, n, trial, seed, unresolved_tol = args
    with threadpool_limits(limits=1):
        f = target_function(f_label)
        samples = draw_iid(family.measure, n, trial_seed(seed, trial))
        y = f.fn(samples.points)
        m_values = _valid_m_values(family, n)
        m_max = m_values[-1]
        B = basis_matrix(family, m_max, samples.points)
        G = B.T @ B / n
        G = np.triu(G) + np.triu(G, 1).T
        rhs = B.T @ y / n
        errors = _ls_error_sweep(
            family, samples.points, y, m_max, f.sup_bound, f.fn, gram=G, rhs=rhs
        )
        errs = errors[np.asarray(m_values) - 1]
        idx = int(np.argmin(errs))  # ties resolve toward smaller m
        m_star = m_values[idx]
        err_min = float(errs[idx])
        resolved = err_min >= unresolved_tol
        gap = spectral_gap(G[:m_star, :m_star])
    return n, trial, m_star, err_min, resolved, gap


def optimal_m_curve(
    f: TargetFunction,
    family: BasisFamily,
    n_values: Sequence[int],
    trials: int = 50,
    seed: int = DEFAULT_SEED,
    jobs: int = 1,
    unresolved_tol: float = UNRESOLVED_ERROR_FLOOR,
) -> tuple[OptimalMTable, list[ExperimentRecord]]:
    """Average best dimension over independent samples, per n.

    For each (n, trial) one sample is drawn and the error of the truncated
    fit is measured for every admissible m <= n; the reported m(n) is the
    argmin, ties broken toward smaller m.  Trials whose minimum error sits
    at the floating point floor are marked unresolved (m recorded as 0)
    and excluded from the averages.
    """
    _require_sweepable(family)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n_values = list(dict.fromkeys(int(n) for n in n_values))
    args = [
        (family, f.label, n, t, seed, unresolved_tol)
        for n in n_values
        for t in range(trials)
    ]
    results = _run_jobs(_optimal_m_worker, args, jobs)

    trial_m = np.full((len(n_values), trials), np.nan)
    trial_err = np.full((len(n_values), trials), np.nan)
    records = []
    measure_token = family.measure.kind.value
    for (n, t, m_star, err_min, resolved, gap) in results:
        i = n_values.index(n)
        if resolved:
            trial_m[i, t] = m_star
            trial_err[i, t] = err_min
        records.append(
            ExperimentRecord(
                experiment="optimal-m",
                family=family.kind.value,
                measure=measure_token,
                f=f.label,
                n=n,
                m=m_star if resolved else 0,
                seed=seed,
                trial=t,
                error=err_min,
                gap=gap,
                bounds={},
            )
        )
    table = OptimalMTable(
        f_label=f.label,
        family_kind=family.kind.value,
        n_values=tuple(n_values),
        trials=trials,
        seed=seed,
        trial_m=trial_m,
        trial_error=trial_err,
    )
    return table, records


# ---------------------------------------------------------------------------
# log-log slope of the m(n) curve

@dataclass(frozen=True)
class SlopeEstimate:
    slope: float
    ci_low: float
    ci_high: float
    n_used: tuple[int, ...]


def _ols_slope(log_n: np.ndarray, log_m: np.ndarray) -> float:
    return float(np.polyfit(log_n, log_m, 1)[0])


def scaling_exponent(
    table: OptimalMTable,
    bootstrap_samples: int = 1000,
    seed: int = 0,
) -> SlopeEstimate:
    """Ordinary least squares slope of log mean-m(n) against log n.

    Fitted over the top half of the n grid (small n is dominated by
    integer effects); the confidence interval is a percentile bootstrap
    over trials.
    """
    n_values = np.asarray(table.n_values, dtype=float)
    if len(np.unique(n_values)) < 5:
        raise ValueError("need at least 5 distinct n values")
    means = table.mean_m
    if not np.all(np.isfinite(means)) or np.any(means < 1.0):
        raise ValueError("table is degenerate: every n needs a resolved mean m >= 1")

    order = np.argsort(n_values)
    take = order[-max(2, math.ceil(len(order) / 2)):]
    log_n = np.log(n_values[take])
    slope = _ols_slope(log_n, np.log(means[take]))

    rng = np.random.default_rng(seed)
    trials = table.trials
    sub = table.trial_m[take]
    slopes = np.empty(bootstrap_samples)
    for b in range(bootstrap_samples):
        picks = rng.integers(0, trials, size=(len(take), trials))
        resampled = np.take_along_axis(sub, picks, axis=1)
        with np.errstate(all="ignore"):
            boot_means = np.nanmean(resampled, axis=1)
        if not np.all(np.isfinite(boot_means)) or np.any(boot_means <= 0.0):
            slopes[b] = slope
        else:
            slopes[b] = _ols_slope(log_n, np.log(boot_means))
    lo, hi = np.percentile(slopes, [2.5, 97.5])
    return SlopeEstimate(
        slope=slope,
        ci_low=float(lo),
        ci_high=float(hi),
        n_used=tuple(int(n) for n in n_values[take]),
    )


# ---------------------------------------------------------------------------
# expected-error bound experiments

@dataclass(frozen=True)
class BoundReport:
    """Monte Carlo mean squared error against its theoretical bound."""

    experiment: str
    f_label: str
    family_kind: str
    n: int
    m: int
    r: float
    sigma: float
    trials: int
    seed: int
    applicable: bool
    mean_sq_error: float
    ci_halfwidth: float
    bound: float
    best_approx_error: float
    epsilon_n: float
    records: tuple[ExperimentRecord, ...]

    @property
    def passed(self) -> bool | None:
        if not self.applicable:
            return None
        return self.mean_sq_error - self.ci_halfwidth <= self.bound


def _bound_worker(args):
    family, f_label, n, m, sigma, seed, trial, quad_tol = args
    with threadpool_limits(limits=1):
        f = target_function(f_label)
        samples = draw_iid(family.measure, n, trial_seed(seed, trial))
        y = f.fn(samples.points)
        if sigma > 0.0:
            y = add_noise(y, sigma, trial_seed(seed, trial) ^ _NOISE_SEED_SALT)
        fit = fit_least_squares(family, m, samples, y).truncated(f.sup_bound)
        err = l2_error(f.fn, fit, QuadratureSpec(family.measure, tol=quad_tol))
    return trial, err, fit.gap


def _inapplicable_report(experiment, f, family, n, r, sigma, trials, seed):
    return BoundReport(
        experiment=experiment,
        f_label=f.label,
        family_kind=family.kind.value,
        n=n,
        m=0,
        r=r,
        sigma=sigma,
        trials=trials,
        seed=seed,
        applicable=False,
        mean_sq_error=math.nan,
        ci_halfwidth=math.nan,
        bound=math.nan,
        best_approx_error=math.nan,
        epsilon_n=accuracy_epsilon(n, r),
        records=(),
    )


def _run_bound_trials(experiment, f, family, n, m, r, sigma, trials, seed, jobs, quad_tol):
    eps_factor = 1.0 if sigma == 0.0 else 2.0
    eps = accuracy_epsilon(n, r)
    e_m = best_error(f.fn, family, m, quad_tol=quad_tol)
    L = f.sup_bound
    bound = (1.0 + eps_factor * eps) * e_m**2 + 8.0 * L * L * n ** (-r)
    if sigma > 0.0:
        bound += 8.0 * sigma * sigma * m / n

    args = [(family, f.label, n, m, sigma, seed, t, quad_tol) for t in range(trials)]
    results = _run_jobs(_bound_worker, args, jobs)

    sq = np.array([err * err for (_, err, _) in results])
    mean = float(np.mean(sq))
    ci = 1.96 * float(np.std(sq, ddof=1)) / math.sqrt(trials) if trials > 1 else 0.0
    records = tuple(
        ExperimentRecord(
            experiment=experiment,
            family=family.kind.value,
            measure=family.measure.kind.value,
            f=f.label,
            n=n,
            m=m,
            seed=seed,
            trial=t,
            error=err,
            gap=gap,
            bounds={"theorem_bound": bound, "best_sq_error": e_m**2},
        )
        for (t, err, gap) in results
    )
    return BoundReport(
        experiment=experiment,
        f_label=f.label,
        family_kind=family.kind.value,
        n=n,
        m=m,
        r=r,
        sigma=sigma,
        trials=trials,
        seed=seed,
        applicable=True,
        mean_sq_error=mean,
        ci_halfwidth=ci,
        bound=bound,
        best_approx_error=e_m,
        epsilon_n=eps,
        records=records,
    )


def noiseless_bound_experiment(
    f: TargetFunction,
    family: BasisFamily,
    n: int,
    r: float = 1.0,
    trials: int = 200,
    seed: int = DEFAULT_SEED,
    jobs: int = 1,
    quad_tol: float = DEFAULT_TOL,
) -> BoundReport:
    """Mean squared error of the truncated fit at the budget dimension,
    against (1 + eps(n)) e_m^2 + 8 L^2 n^{-r}."""
    m = stability_budget(family, n, r)
    if m == 0:
        return _inapplicable_report("noiseless-bound", f, family, n, r, 0.0, trials, seed)
    return _run_bound_trials(
        "noiseless-bound", f, family, n, m, r, 0.0, trials, seed, jobs, quad_tol
    )


def noisy_bound_experiment(
    f: TargetFunction,
    family: BasisFamily,
    n: int,
    sigma: float,
    r: float = 1.0,
    trials: int = 200,
    seed: int = DEFAULT_SEED,
    jobs: int = 1,
    m_values: Sequence[int] | None = None,
    quad_tol: float = DEFAULT_TOL,
) -> list[BoundReport]:
    """Noisy-data variant, against (1 + 2 eps) e_m^2 + 8 L^2 n^{-r}
    + 8 sigma^2 m / n, swept over all admissible m up to the budget."""
    if sigma < 0.0:
        raise ValueError("sigma must be >= 0")
    budget = stability_budget(family, n, r)
    if budget == 0:
        return [_inapplicable_report("noisy-bound", f, family, n, r, sigma, trials, seed)]
    if m_values is None:
        m_values = [m for m in _valid_m_values(family, budget)]
    reports = []
    for m in m_values:
        if m > budget:
            raise ValueError(f"m={m} exceeds the stability budget {budget}")
        reports.append(
            _run_bound_trials(
                "noisy-bound", f, family, n, m, r, sigma, trials, seed, jobs, quad_tol
            )
        )
    return reports


# ---------------------------------------------------------------------------
# deterministic sampling stability

# proved gap bounds for the deterministic samplings; the trigonometric and
# piecewise samplings give exact norm equality, so their "bounds" are pure
# roundoff allowances
_EXACT_GAP_TRIG = 1e-12
_EXACT_GAP_PIECEWISE = 1e-14


def deterministic_gap_bound(family: BasisFamily, m: int, n: int) -> float:
    kind = family.kind
    if kind is FamilyKind.LEGENDRE_UNIFORM:
        return 2.0 * (m - 1) ** 2 / n
    if kind is FamilyKind.CHEBYSHEV_ARCSINE:
        return math.pi * (m - 1) / n
    if kind is FamilyKind.TRIGONOMETRIC_UNIFORM:
        return _EXACT_GAP_TRIG
    if kind is FamilyKind.PIECEWISE_CONSTANT:
        return _EXACT_GAP_PIECEWISE
    raise ValueError(f"no deterministic sampling bound for {kind.value}")


def deterministic_stability_table(
    family: BasisFamily,
    n_values: Sequence[int],
    m_values: Sequence[int],
) -> list[ExperimentRecord]:
    """Measured Gram gaps of the deterministic samplings, one record per
    valid (n, m) pair, each carrying its proved bound."""
    n_values = sorted(set(int(n) for n in n_values))
    m_values = sorted(set(int(m) for m in m_values))
    kind = family.kind
    records = []
    measure_token = family.measure.kind.value
    for n in n_values:
        if kind is FamilyKind.PIECEWISE_CONSTANT and n != family.num_cells:
            continue
        valid = []
        for m in m_values:
            if kind is FamilyKind.TRIGONOMETRIC_UNIFORM and (m % 2 == 0 or m > n):
                continue
            if kind is FamilyKind.PIECEWISE_CONSTANT and m != family.num_cells:
                continue
            valid.append(m)
        if not valid:
            continue
        samples = deterministic_points(family, n)
        m_max = max(valid)
        B = basis_matrix(family, m_max, samples.points)
        G = B.T @ B / n
        G = np.triu(G) + np.triu(G, 1).T
        for m in valid:
            gap = spectral_gap(G[:m, :m])
            records.append(
                ExperimentRecord(
                    experiment="det-stability",
                    family=kind.value,
                    measure=measure_token,
                    f="-",
                    n=n,
                    m=m,
                    seed=0,
                    trial=0,
                    error=0.0,
                    gap=gap,
                    bounds={"stability_bound": deterministic_gap_bound(family, m, n)},
                )
            )
    return records
