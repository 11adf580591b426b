"""Adaptive Simpson quadrature and measure-weighted integration.

The integrator keeps a worklist of panels and refines every unconverged
panel at once, so integrands are evaluated on arrays rather than point by
point.  A panel is accepted when the classical Simpson error estimate
|S2 - S1| / 15 falls below the share of the tolerance proportional to the
panel's width, and the accepted value includes the Richardson correction
(making the rule exact on quintics per panel).

``integrate_against_measure`` hides the change of variable used for the
arcsine weight: with x = cos(theta) the endpoint singularity of
1 / sqrt(1 - x^2) disappears and the integrand becomes g(cos theta) / pi
on [0, pi].
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import QuadratureError
from .measures import Measure, MeasureKind

DEFAULT_TOL = 1e-10
DEFAULT_MAX_DEPTH = 48

# safety valve: a singular integrand can otherwise multiply panels without
# bound before the depth limit is reached
_MAX_PANELS = 1 << 19


def adaptive_simpson(
    fn: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = DEFAULT_TOL,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> tuple[float, float]:
    """Integrate ``fn`` over [a, b] to absolute tolerance ``tol``.

    ``fn`` must accept an ndarray of points and return the values as an
    ndarray of the same shape.

    Returns
    -------
    (value, error_bound)
        The integral estimate and the accumulated error estimate.

    Raises
    ------
    QuadratureError
        If panels remain unconverged at ``max_depth``.  The exception
        carries the best estimate and its error bound.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if a > b:
        a, b = b, a
        sign = -1.0

    total_len = b - a
    # panel state: left endpoint, width, f at left/mid/right, Simpson value
    left = np.array([a])
    width = np.array([total_len])
    fl = np.atleast_1d(np.asarray(fn(np.array([a])), dtype=float))
    fm = np.atleast_1d(np.asarray(fn(np.array([(a + b) / 2.0])), dtype=float))
    fr = np.atleast_1d(np.asarray(fn(np.array([b])), dtype=float))
    simp = width / 6.0 * (fl + 4.0 * fm + fr)

    value = 0.0
    err_bound = 0.0
    for depth in range(max_depth + 1):
        mid = left + width / 2.0
        q1 = left + width / 4.0
        q3 = left + 3.0 * width / 4.0
        fq = np.atleast_1d(np.asarray(fn(np.concatenate([q1, q3])), dtype=float))
        fq1, fq3 = fq[: len(q1)], fq[len(q1):]

        with np.errstate(invalid="ignore"):
            s_left = width / 12.0 * (fl + 4.0 * fq1 + fm)
            s_right = width / 12.0 * (fm + 4.0 * fq3 + fr)
            s2 = s_left + s_right
            err = (s2 - simp) / 15.0

        done = np.abs(err) <= tol * (width / total_len)
        exhausted = depth == max_depth or len(left) > _MAX_PANELS
        if exhausted:
            # out of depth (or panel budget): fold in the unconverged
            # panels and report the best estimate with its error bound
            with np.errstate(invalid="ignore"):
                best = value + float(np.nansum(s2 + err))
                bound = err_bound + float(np.nansum(np.abs(err)))
            if np.all(done):
                return sign * best, bound
            raise QuadratureError(
                f"adaptive Simpson did not converge within depth {max_depth}",
                estimate=sign * best,
                error_bound=bound,
            )

        value += float(np.sum(s2[done] + err[done]))
        err_bound += float(np.sum(np.abs(err[done])))
        if np.all(done):
            return sign * value, err_bound

        keep = ~done
        left = np.concatenate([left[keep], mid[keep]])
        width = np.concatenate([width[keep] / 2.0, width[keep] / 2.0])
        new_fl = np.concatenate([fl[keep], fm[keep]])
        new_fm = np.concatenate([fq1[keep], fq3[keep]])
        new_fr = np.concatenate([fm[keep], fr[keep]])
        simp = np.concatenate([s_left[keep], s_right[keep]])
        fl, fm, fr = new_fl, new_fm, new_fr
    raise AssertionError("unreachable")


def integrate_against_measure(
    fn: Callable[[np.ndarray], np.ndarray],
    measure: Measure,
    tol: float = DEFAULT_TOL,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> float:
    """Compute the integral of ``fn`` with respect to ``measure``.

    For the arcsine measure the integral is evaluated in the angle variable
    so the integrand stays bounded; the other measures use their constant
    densities directly.
    """
    if measure.kind is MeasureKind.CHEBYSHEV_ARCSINE:
        def g(theta):
            return fn(np.cos(theta)) / math.pi

        value, _ = adaptive_simpson(g, 0.0, math.pi, tol=tol, max_depth=max_depth)
        return value

    lo, hi = measure.support
    dens = 1.0 / (hi - lo)

    def h(x):
        return fn(x) * dens

    value, _ = adaptive_simpson(h, lo, hi, tol=tol, max_depth=max_depth)
    return value


def l2_norm_squared(
    fn: Callable[[np.ndarray], np.ndarray],
    measure: Measure,
    tol: float = DEFAULT_TOL,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> float:
    """Squared L2 norm of ``fn`` under ``measure``, clamped at zero."""
    value = integrate_against_measure(lambda x: fn(x) ** 2, measure, tol, max_depth)
    return max(value, 0.0)
