"""Probability measures on intervals: density, CDF, and inverse CDF.

Three measures are supported:

* ``uniform`` on an interval [a, b],
* the arcsine (Chebyshev) measure dx / (pi sqrt(1 - x^2)) on [-1, 1],
* a uniform measure shrunk onto [-eps, eps] inside the interval [-1, 1].

All of them integrate to 1 and expose an analytic inverse CDF, so sampling
consumes exactly one uniform variate per draw.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


class MeasureKind(str, enum.Enum):
    UNIFORM = "uniform"
    CHEBYSHEV_ARCSINE = "chebyshev"
    UNIFORM_SHRUNK = "shrunk"


@dataclass(frozen=True)
class Measure:
    """A probability measure on a closed interval.

    For ``UNIFORM`` the interval is [a, b]; for ``CHEBYSHEV_ARCSINE`` it is
    [-1, 1]; for ``UNIFORM_SHRUNK`` the support is [-epsilon, epsilon].
    """

    kind: MeasureKind
    a: float = -1.0
    b: float = 1.0
    epsilon: float = 1.0

    def __post_init__(self):
        if self.kind is MeasureKind.UNIFORM and not self.a < self.b:
            raise ValueError("uniform measure needs a < b")
        if self.kind is MeasureKind.UNIFORM_SHRUNK and not 0.0 < self.epsilon <= 1.0:
            raise ValueError("shrunk measure needs epsilon in (0, 1]")

    @property
    def support(self) -> tuple[float, float]:
        if self.kind is MeasureKind.UNIFORM:
            return (self.a, self.b)
        if self.kind is MeasureKind.CHEBYSHEV_ARCSINE:
            return (-1.0, 1.0)
        return (-self.epsilon, self.epsilon)

    def density(self, x):
        """Lebesgue density, vectorized; zero outside the support."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        inside = (x >= lo) & (x <= hi)
        if self.kind is MeasureKind.UNIFORM:
            vals = np.full_like(x, 1.0 / (self.b - self.a))
        elif self.kind is MeasureKind.CHEBYSHEV_ARCSINE:
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = 1.0 / (math.pi * np.sqrt(np.maximum(1.0 - x * x, 0.0)))
        else:
            vals = np.full_like(x, 1.0 / (2.0 * self.epsilon))
        return np.where(inside, vals, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        xc = np.clip(x, lo, hi)
        if self.kind is MeasureKind.UNIFORM:
            out = (xc - self.a) / (self.b - self.a)
        elif self.kind is MeasureKind.CHEBYSHEV_ARCSINE:
            out = 1.0 - np.arccos(xc) / math.pi
        else:
            out = (xc + self.epsilon) / (2.0 * self.epsilon)
        return out

    def inverse_cdf(self, u):
        """Quantile function; maps [0, 1] onto the support.

        Uniform(a, b): a + (b - a) u.  Arcsine: -cos(pi u).
        Shrunk: epsilon (2u - 1).
        """
        u = np.asarray(u, dtype=float)
        if np.any(u < 0.0) or np.any(u > 1.0):
            raise DomainError("inverse_cdf argument must lie in [0, 1]")
        if self.kind is MeasureKind.UNIFORM:
            return self.a + (self.b - self.a) * u
        if self.kind is MeasureKind.CHEBYSHEV_ARCSINE:
            return -np.cos(math.pi * u)
        return self.epsilon * (2.0 * u - 1.0)


def uniform_measure(a: float = -1.0, b: float = 1.0) -> Measure:
    return Measure(MeasureKind.UNIFORM, a=a, b=b)


def chebyshev_measure() -> Measure:
    return Measure(MeasureKind.CHEBYSHEV_ARCSINE)


def shrunk_measure(epsilon: float) -> Measure:
    return Measure(MeasureKind.UNIFORM_SHRUNK, epsilon=epsilon)
