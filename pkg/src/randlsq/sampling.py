"""Random draws from a measure and the deterministic samplings per family.

Random sampling is inverse-CDF based, one uniform variate per point, from
a seeded PCG64 generator.  Deterministic samplings place one point per
equal-measure cell (midpoints, in the measure's own coordinates), except
for the trigonometric family which uses the exact equispaced grid.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .bases import BasisFamily, FamilyKind
from .measures import Measure


class Provenance(str, enum.Enum):
    RANDOM = "random"
    DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class SampleSet:
    """n sample points plus how they were produced.

    Random sample sets are reproducible: the same (measure, n, seed)
    triple always yields the same points.
    """

    points: np.ndarray
    provenance: Provenance
    seed: int | None = None
    measure: Measure | None = None
    scheme: str | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "points", np.atleast_1d(np.asarray(self.points, dtype=float))
        )

    @property
    def n(self) -> int:
        return len(self.points)


def draw_iid(measure: Measure, n: int, seed: int) -> SampleSet:
    """n independent draws from ``measure`` via inverse-CDF sampling."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    return SampleSet(
        points=measure.inverse_cdf(u),
        provenance=Provenance.RANDOM,
        seed=seed,
        measure=measure,
    )


def trial_seed(base_seed: int, trial: int) -> int:
    """Per-trial derived seed; trials are order independent."""
    return int(base_seed) ^ int(trial)


def deterministic_points(family: BasisFamily, n: int) -> SampleSet:
    """The family's deterministic sampling.

    trig:       x_i = -pi + 2 pi i / n, i = 1..n.
    legendre:   midpoints of n equal-length cells of [-1, 1].
    chebyshev:  midpoints in angle of n equal-arcsine-measure cells,
                x_i = cos(pi (i - 1/2) / n), sorted ascending.
    piecewise:  one point per cell (midpoints); requires n equal to the
                number of cells.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    kind = family.kind
    if kind is FamilyKind.TRIGONOMETRIC_UNIFORM:
        i = np.arange(1, n + 1)
        # algebraically -pi + 2 pi i / n; this form cannot round past pi
        pts = math.pi * (2.0 * i / n - 1.0)
        scheme = "equispaced"
    elif kind is FamilyKind.LEGENDRE_UNIFORM:
        i = np.arange(1, n + 1)
        pts = -1.0 + (2.0 * i - 1.0) / n
        scheme = "equal-length-midpoints"
    elif kind is FamilyKind.CHEBYSHEV_ARCSINE:
        i = np.arange(1, n + 1)
        pts = np.sort(np.cos(math.pi * (i - 0.5) / n))
        scheme = "equal-measure-midpoints"
    elif kind is FamilyKind.PIECEWISE_CONSTANT:
        if n != family.num_cells:
            raise ValueError(
                "piecewise deterministic sampling needs one point per cell"
            )
        bounds = np.asarray(family.partition)
        pts = (bounds[:-1] + bounds[1:]) / 2.0
        scheme = "cell-midpoints"
    else:
        raise ValueError(f"no deterministic sampling defined for {kind.value}")
    return SampleSet(points=pts, provenance=Provenance.DETERMINISTIC, scheme=scheme)
