"""Two-channel quasi-static Rayleigh fading model.

Each channel has a unit-mean exponential power gain ``g`` and supports
``I = log2(1 + snr * g)`` bits per channel use. All mutual informations are in
bits. The product ``(1 + snr*g0) * (1 + snr*g1)`` therefore equals
``2 ** (I0 + I1)``, which is the base convention behind
:func:`exp_mi_sum_cdf`.

The module also hosts the quadrature helpers used by the scheme evaluators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from scipy import integrate

from .errors import DomainError, NumericalError

LN2 = math.log(2.0)


@dataclass(frozen=True)
class ChannelParams:
    """SNR of the two i.i.d. Rayleigh channels (linear, not dB)."""

    snr: float
    num_channels: int = 2
    gain_law: str = "exponential"

    def __post_init__(self):
        if not (math.isfinite(self.snr) and self.snr > 0):
            raise DomainError(f"snr must be positive and finite, got {self.snr!r}")
        if self.num_channels != 2:
            raise DomainError("only two parallel channels are supported")
        if self.gain_law != "exponential":
            raise DomainError("only unit-mean exponential power gains are supported")

    @classmethod
    def from_db(cls, snr_db: float) -> "ChannelParams":
        return cls(snr=10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 2000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")

    @property
    def gain_cutoff(self) -> float:
        """Gain beyond which the exponential tail mass is below abs_tol/10."""
        return math.log(10.0 / self.abs_tol)


DEFAULT_QUADRATURE = QuadratureSpec()


def integrate_1d(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    q: QuadratureSpec = DEFAULT_QUADRATURE,
    points: Optional[Sequence[float]] = None,
    abs_tol: Optional[float] = None,
    truncation: Optional[float] = None,
) -> float:
    """Adaptive Gauss-Kronrod integral of ``func`` over the finite ``[lo, hi]``.

    Raises NumericalError when the integrator reports non-convergence.
    """
    if hi <= lo:
        return 0.0
    eps_abs = q.abs_tol if abs_tol is None else abs_tol
    inner = None
    if points:
        inner = sorted(p for p in points if lo < p < hi) or None
        if inner and len(inner) + 1 >= q.max_subdivisions:
            inner = None
    out = integrate.quad(
        func,
        lo,
        hi,
        epsabs=eps_abs,
        epsrel=q.rel_tol,
        limit=q.max_subdivisions,
        points=inner,
        full_output=1,
    )
    value, err = out[0], out[1]
    # a warning with an error estimate inside tolerance (round-off) is accepted
    if len(out) > 3 and not err <= max(eps_abs, q.rel_tol * abs(value)):
        raise NumericalError(
            f"quadrature did not converge on [{lo:.6g}, {hi:.6g}]: {out[3]}",
            error_estimate=err,
            truncation=truncation,
        )
    return value


def _check_rate(r: float) -> None:
    if not r >= 0:
        raise DomainError(f"rate must be >= 0, got {r!r}")


def _snr_threshold(r: float, snr: float) -> float:
    """Gain below which a channel at SNR ``snr`` cannot carry ``r`` bits."""
    return math.expm1(r * LN2) / snr


def mi_cdf(r: float, ch: ChannelParams) -> float:
    """P[log2(1 + snr*g) <= r] = 1 - exp(-(2^r - 1)/snr)."""
    _check_rate(r)
    if math.isinf(r):
        return 1.0
    return -math.expm1(-_snr_threshold(r, ch.snr))


def mi_survival(r: float, ch: ChannelParams) -> float:
    _check_rate(r)
    if math.isinf(r):
        return 0.0
    return math.exp(-_snr_threshold(r, ch.snr))


def mi_pdf(r: float, ch: ChannelParams) -> float:
    """Density of the per-channel mutual information, per bit."""
    _check_rate(r)
    t = _snr_threshold(r, ch.snr)
    if math.isinf(t):
        return 0.0
    return LN2 * (t + 1.0 / ch.snr) * math.exp(-t)


def outage_prob(rate_threshold: float, ch: ChannelParams) -> float:
    """Probability that one channel cannot support ``rate_threshold`` bits."""
    return mi_cdf(rate_threshold, ch)


def mi_upper_limit(ch: ChannelParams, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Rate above which the mutual-information tail mass is below abs_tol/10."""
    return math.log2(1.0 + ch.snr * q.gain_cutoff)


def mi_sum_cdf(r: float, ch: ChannelParams, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """P[I0 + I1 <= r], integrating the density of I0 against the CDF of I1.

    The absolute tolerance is scaled by the bound ``mi_cdf(r)**2`` so that
    tiny high-SNR outage probabilities keep their relative accuracy.
    """
    _check_rate(r)
    if r == 0:
        return 0.0
    if math.isinf(r):
        return 1.0
    bound = mi_cdf(r, ch) ** 2

    def integrand(s):
        return mi_pdf(s, ch) * mi_cdf(max(r - s, 0.0), ch)

    value = integrate_1d(integrand, 0.0, r, q, abs_tol=q.abs_tol * min(1.0, bound))
    return min(max(value, 0.0), bound)


def exp_mi_sum_cdf(x: float, ch: ChannelParams, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """P[(1 + snr*g0)(1 + snr*g1) <= x], integrating over the gain g0.

    With mutual information in bits this equals ``mi_sum_cdf(log2(x))``; the
    integral here runs in the gain domain so the two routes are independent.
    """
    if not x >= 1:
        raise DomainError(f"x must be >= 1, got {x!r}")
    if x == 1:
        return 0.0
    rho = ch.snr
    g_max = (x - 1.0) / rho
    bound = (-math.expm1(-g_max)) ** 2

    def integrand(g0):
        # largest g1 with (1 + rho*g1) <= x / (1 + rho*g0)
        g1 = (x - 1.0 - rho * g0) / (1.0 + rho * g0) / rho
        return math.exp(-g0) * -math.expm1(-max(g1, 0.0))

    value = integrate_1d(integrand, 0.0, g_max, q, abs_tol=q.abs_tol * min(1.0, bound))
    return min(max(value, 0.0), bound)


def _gain_breakpoints(ch: ChannelParams, hi: float) -> list[float]:
    # weights like (1 + snr*g)^-s change scale near g = 1/snr
    return [p for p in (1.0 / ch.snr, 10.0 / ch.snr, 100.0 / ch.snr) if p < hi]


def gain_expectation(
    weight: Optional[Callable[[float, float], float]],
    ch: ChannelParams,
    q: QuadratureSpec = DEFAULT_QUADRATURE,
    factor: Optional[Callable[[float], float]] = None,
) -> float:
    """E[weight(g0, g1)] for independent unit-mean exponential gains.

    Pass ``factor`` instead of (or along with) ``weight`` to declare a
    separable weight ``factor(g0) * factor(g1)``; the double integral then
    collapses to the square of one one-dimensional integral. ``weight`` is
    ignored when ``factor`` is given.

    The gains are raw (unit mean); weights that depend on the SNR should
    close over ``ch.snr``. The SNR is used to place breakpoints near ``1/snr``.
    Infinite limits are truncated at ``q.gain_cutoff``.
    """
    hi = q.gain_cutoff
    points = _gain_breakpoints(ch, hi)
    if factor is not None:
        j = integrate_1d(lambda g: factor(g) * math.exp(-g), 0.0, hi, q, points, truncation=hi)
        return j * j
    if weight is None:
        raise DomainError("either weight or factor must be given")

    def inner(g0):
        e0 = math.exp(-g0)
        return e0 * integrate_1d(
            lambda g1: weight(g0, g1) * math.exp(-g1), 0.0, hi, q, points, truncation=hi
        )

    return integrate_1d(inner, 0.0, hi, q, points, truncation=hi)
