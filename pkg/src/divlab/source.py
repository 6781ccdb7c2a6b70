"""Unit-variance Gaussian source: distortion-rate and symmetric two-description region."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasiblePointError

# optimizer probes land exactly on the region boundary
FEASIBILITY_TOL = 1e-12


@dataclass(frozen=True)
class SourceModel:
    variance: float = 1.0
    d_max: float = 1.0

    def __post_init__(self):
        if self.variance != 1.0 or self.d_max != self.variance:
            raise DomainError("only the unit-variance source with d_max = 1 is supported")


@dataclass(frozen=True)
class MDPoint:
    """Symmetric two-description operating point.

    ``rate_sum`` is the total over both descriptions, in bits per source sample.
    """

    rate_sum: float
    d_side: float
    d_central: float

    def __post_init__(self):
        p = distortion_rate(self.rate_sum)
        side_min = min_side_distortion(self.rate_sum)
        tol = FEASIBILITY_TOL
        if not (p - tol <= self.d_central <= self.d_side + tol and self.d_side <= 1.0 + tol):
            raise InfeasiblePointError(f"inconsistent MD point {self}")
        if self.d_side < side_min - tol:
            raise InfeasiblePointError(f"side distortion {self.d_side} below {side_min}")


def distortion_rate(rate: float) -> float:
    """D(R) = 2^(-2R) for a unit-variance Gaussian source."""
    if not rate >= 0:
        raise DomainError(f"rate must be >= 0, got {rate!r}")
    return 2.0 ** (-2.0 * rate)


def min_side_distortion(rate_sum: float) -> float:
    """Smallest side distortion: each description carries rate_sum/2 bits."""
    return distortion_rate(rate_sum / 2.0)


def no_penalty_side_distortion(rate_sum: float) -> float:
    """Side distortion at and beyond which the central distortion reaches D(rate_sum)."""
    return 0.5 * (1.0 + distortion_rate(rate_sum))


def md_central(d_side: float, rate_sum: float) -> float:
    """Minimum central distortion for symmetric side distortion ``d_side``.

    Ozarow's Gaussian region with ``P = 2^(-2*rate_sum)``: once
    ``2*d_side >= 1 + P`` there is no penalty and the central distortion is
    ``P``; otherwise it is ``P / (1 - ((1 - d) - sqrt(d^2 - P))^2)``.
    """
    if not rate_sum >= 0:
        raise DomainError(f"rate_sum must be >= 0, got {rate_sum!r}")
    if not 0 < d_side <= 1.0 + FEASIBILITY_TOL:
        raise InfeasiblePointError(f"side distortion must lie in (0, 1], got {d_side!r}")
    p = distortion_rate(rate_sum)
    side_min = math.sqrt(p)
    if d_side < side_min - FEASIBILITY_TOL:
        raise InfeasiblePointError(
            f"side distortion {d_side!r} below the single-description bound {side_min!r}"
        )
    if 2.0 * d_side >= 1.0 + p:
        return p
    gap = (1.0 - d_side) - math.sqrt(max(d_side * d_side - p, 0.0))
    return min(max(p / (1.0 - gap * gap), p), d_side)


def md_tradeoff_curve(rate_sum: float, n_points: int) -> list[MDPoint]:
    """Sample the side/central boundary from the minimum-side corner to the no-penalty corner."""
    if not rate_sum > 0:
        raise DomainError(f"rate_sum must be > 0, got {rate_sum!r}")
    if n_points < 2:
        raise DomainError(f"n_points must be >= 2, got {n_points!r}")
    lo, hi = min_side_distortion(rate_sum), no_penalty_side_distortion(rate_sum)
    sides = np.linspace(lo, hi, n_points)
    sides[0], sides[-1] = lo, hi
    return [MDPoint(rate_sum, float(d), md_central(float(d), rate_sum)) for d in sides]
