"""Expected end-to-end distortion of the seven diversity schemes.

Bandwidth accounting: every scheme gets two channels of ``n_c`` uses per
``n_s`` source samples, ``b = n_c / n_s``. A channel code at ``R`` bits per
channel use over one channel therefore carries ``b*R`` bits per source sample.
How many of those channel-rate units reach the source decoder on success is
fixed per scheme in :data:`DELIVERED_RATE_FACTOR`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import channel as chan
from .channel import ChannelParams, QuadratureSpec, DEFAULT_QUADRATURE
from .errors import DomainError
from .source import distortion_rate, md_central


class SchemeKind(enum.Enum):
    NO_DIV = "no-div"
    SEL_CCDIV = "sel-ccdiv"
    MPX_CCDIV = "mpx-ccdiv"
    OPT_CCDIV = "opt-ccdiv"
    SCDIV = "scdiv"
    SCDIV_JD = "scdiv-jd"
    RC = "rc"

    @classmethod
    def parse(cls, name: str) -> "SchemeKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise DomainError(f"unknown scheme {name!r}; expected one of: {valid}") from None

    def __str__(self):
        return self.value


SCDIV_FAMILY = frozenset({SchemeKind.SCDIV, SchemeKind.SCDIV_JD})

# Source bits per sample on full success, in units of b*R.
DELIVERED_RATE_FACTOR = {
    SchemeKind.NO_DIV: 2.0,
    SchemeKind.MPX_CCDIV: 2.0,
    SchemeKind.OPT_CCDIV: 2.0,
    SchemeKind.SEL_CCDIV: 1.0,
    # per description; two descriptions give 2*b*R in total
    SchemeKind.SCDIV: 1.0,
    SchemeKind.SCDIV_JD: 1.0,
}


@dataclass(frozen=True)
class SchemeConfig:
    kind: SchemeKind
    channel: ChannelParams
    bw_ratio: float = 1.0
    rate: float = 0.0
    d_side: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.bw_ratio) and self.bw_ratio > 0):
            raise DomainError(f"bw_ratio must be > 0, got {self.bw_ratio!r}")
        if not (math.isfinite(self.rate) and self.rate >= 0):
            raise DomainError(f"rate must be >= 0, got {self.rate!r}")
        if (self.d_side is not None) != (self.kind in SCDIV_FAMILY):
            raise DomainError(f"d_side must be given exactly for scdiv and scdiv-jd (kind={self.kind})")

    @property
    def rate_sum(self) -> float:
        """Total MD rate in bits per sample for the SCDIV family."""
        return 2.0 * self.bw_ratio * self.rate

    def delivered_rate(self) -> float:
        return DELIVERED_RATE_FACTOR[self.kind] * self.bw_ratio * self.rate


class Outcome(enum.IntEnum):
    NOTHING = 0
    ONE_DESCRIPTION = 1
    BOTH_DESCRIPTIONS = 2


ThresholdFn = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class DecodingRegion:
    """Monotone map from the realized pair (i0, i1) to a decoding outcome.

    A monotone region is fully described, for each ``i0``, by the smallest
    ``i1`` that reaches each outcome level: the outcome is at least
    ONE_DESCRIPTION iff ``i1 >= one_threshold(i0, R)`` and BOTH_DESCRIPTIONS
    iff ``i1 >= both_threshold(i0, R)``. Thresholds may be ``inf`` and must be
    nonincreasing in ``i0``. ``breakpoints(R)`` lists the kinks in ``i0``.
    """

    name: str
    one_threshold: ThresholdFn
    both_threshold: ThresholdFn
    breakpoints: Callable[[float], Sequence[float]] = field(default=lambda rate: ())

    def outcome(self, i0, i1, rate: float) -> np.ndarray:
        i0 = np.asarray(i0, dtype=float)
        i1 = np.asarray(i1, dtype=float)
        level = (i1 >= self.one_threshold(i0, rate)).astype(np.int8)
        level += i1 >= self.both_threshold(i0, rate)
        return level

    def validate(self, rate: float, upper: float) -> None:
        """Reject regions that are not monotone on ``[0, upper]``."""
        grid = np.union1d(np.linspace(0.0, upper, 513), np.asarray(self.breakpoints(rate), float))
        grid = grid[(grid >= 0) & (grid <= upper)]
        t1 = np.asarray(self.one_threshold(grid, rate), float)
        t2 = np.asarray(self.both_threshold(grid, rate), float)
        ok = (
            np.all(t1 >= 0)
            and np.all(t2 >= t1)
            and _nonincreasing(t1)
            and _nonincreasing(t2)
        )
        if not ok:
            raise DomainError(f"decoding region {self.name!r} is not monotone at rate {rate!r}")


def _nonincreasing(t: np.ndarray) -> bool:
    finite = np.where(np.isinf(t), np.finfo(float).max, t)
    return bool(np.all(np.diff(finite) <= 1e-12))


def _per_description_one(i0, rate):
    return np.where(np.asarray(i0) >= rate, 0.0, rate)


def _per_description_both(i0, rate):
    return np.where(np.asarray(i0) >= rate, rate, np.inf)


def _joint_both(i0, rate):
    return np.maximum(2.0 * rate - np.asarray(i0, dtype=float), 0.0)


PER_DESCRIPTION_REGION = DecodingRegion(
    name="per-description",
    one_threshold=_per_description_one,
    both_threshold=_per_description_both,
    breakpoints=lambda rate: (rate,),
)

# Modeling choice: both descriptions recovered whenever the pair can carry 2R jointly.
DEFAULT_JD_REGION = DecodingRegion(
    name="joint-sum",
    one_threshold=_per_description_one,
    both_threshold=_joint_both,
    breakpoints=lambda rate: (rate, 2.0 * rate),
)


@dataclass(frozen=True)
class DistortionBreakdown:
    outcome_probs: Mapping[str, float]
    outcome_distortions: Mapping[str, float]
    expected: float
    variance: float

    def to_dict(self) -> dict:
        return {
            "outcome_probs": dict(self.outcome_probs),
            "outcome_distortions": dict(self.outcome_distortions),
            "expected": self.expected,
            "variance": self.variance,
        }


def breakdown(probs: Mapping[str, float], dists: Mapping[str, float]) -> DistortionBreakdown:
    """Build a breakdown whose moments come straight from the outcome table."""
    expected = math.fsum(probs[k] * dists[k] for k in probs)
    second = math.fsum(probs[k] * dists[k] ** 2 for k in probs)
    return DistortionBreakdown(dict(probs), dict(dists), expected, max(second - expected**2, 0.0))


def _require(cfg: SchemeConfig, *kinds: SchemeKind) -> None:
    if cfg.kind not in kinds:
        raise DomainError(f"evaluator for {'/'.join(map(str, kinds))} called with {cfg.kind}")


def eval_no_div(cfg: SchemeConfig) -> DistortionBreakdown:
    _require(cfg, SchemeKind.NO_DIV)
    f = chan.outage_prob(cfg.rate, cfg.channel)
    return breakdown(
        {"fail": f, "success": 1.0 - f},
        {"fail": 1.0, "success": distortion_rate(cfg.delivered_rate())},
    )


def eval_sel_ccdiv(cfg: SchemeConfig) -> DistortionBreakdown:
    _require(cfg, SchemeKind.SEL_CCDIV)
    f = chan.outage_prob(cfg.rate, cfg.channel)
    return breakdown(
        {"fail": f * f, "success": 1.0 - f * f},
        {"fail": 1.0, "success": distortion_rate(cfg.delivered_rate())},
    )


def eval_mpx_ccdiv(cfg: SchemeConfig) -> DistortionBreakdown:
    """Each half of the source rides one channel; the halves fail independently."""
    _require(cfg, SchemeKind.MPX_CCDIV)
    f = chan.outage_prob(cfg.rate, cfg.channel)
    d = distortion_rate(cfg.delivered_rate())
    return breakdown(
        {"nothing": f * f, "one": 2.0 * f * (1.0 - f), "both": (1.0 - f) ** 2},
        {"nothing": 1.0, "one": 0.5 * (1.0 + d), "both": d},
    )


def eval_opt_ccdiv(cfg: SchemeConfig, q: QuadratureSpec = DEFAULT_QUADRATURE) -> DistortionBreakdown:
    _require(cfg, SchemeKind.OPT_CCDIV)
    f = chan.mi_sum_cdf(2.0 * cfg.rate, cfg.channel, q)
    return breakdown(
        {"fail": f, "success": 1.0 - f},
        {"fail": 1.0, "success": distortion_rate(cfg.delivered_rate())},
    )


def scdiv_breakdown(
    probs: tuple[float, float, float], d_side: float, d_central: float
) -> DistortionBreakdown:
    """Combine (nothing, one, both) probabilities with the MD distortions."""
    p0, p1, p2 = probs
    return breakdown(
        {"nothing": p0, "one": p1, "both": p2},
        {"nothing": 1.0, "one": d_side, "both": d_central},
    )


def scdiv_probs(channel: ChannelParams, rate: float) -> tuple[float, float, float]:
    """Outcome probabilities when each description decodes on its own channel."""
    f = chan.outage_prob(rate, channel)
    return f * f, 2.0 * f * (1.0 - f), (1.0 - f) ** 2


def region_probs(
    region: DecodingRegion,
    channel: ChannelParams,
    rate: float,
    q: QuadratureSpec = DEFAULT_QUADRATURE,
) -> tuple[float, float, float]:
    """Outcome probabilities of ``region`` by conditioning on I0.

    ``P[outcome < k] = E[F_I(t_k(I0))]``, integrated over I0 up to the rate
    where its tail mass drops below abs_tol/10; the tail itself is added using
    the threshold at the truncation point.
    """
    upper = max(chan.mi_upper_limit(channel, q), 4.0 * rate + 1.0)
    region.validate(rate, upper)
    points = [p for p in region.breakpoints(rate) if 0 < p < upper]

    def below(threshold: ThresholdFn) -> float:
        def integrand(i0):
            t = float(threshold(np.float64(i0), rate))
            return chan.mi_pdf(i0, channel) * chan.mi_cdf(t, channel)

        head = chan.integrate_1d(integrand, 0.0, upper, q, points, truncation=upper)
        tail = chan.mi_survival(upper, channel) * chan.mi_cdf(
            float(threshold(np.float64(upper), rate)), channel
        )
        return min(max(head + tail, 0.0), 1.0)

    p_nothing = below(region.one_threshold)
    below_both = max(below(region.both_threshold), p_nothing)
    return p_nothing, below_both - p_nothing, 1.0 - below_both


def eval_scdiv(cfg: SchemeConfig) -> DistortionBreakdown:
    _require(cfg, SchemeKind.SCDIV)
    d_central = md_central(cfg.d_side, cfg.rate_sum)
    return scdiv_breakdown(scdiv_probs(cfg.channel, cfg.rate), cfg.d_side, d_central)


def eval_scdiv_jd(
    cfg: SchemeConfig,
    region: DecodingRegion = DEFAULT_JD_REGION,
    q: QuadratureSpec = DEFAULT_QUADRATURE,
) -> DistortionBreakdown:
    _require(cfg, SchemeKind.SCDIV_JD)
    d_central = md_central(cfg.d_side, cfg.rate_sum)
    probs = region_probs(region, cfg.channel, cfg.rate, q)
    return scdiv_breakdown(probs, cfg.d_side, d_central)


def rc_factor(channel: ChannelParams, bw_ratio: float, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """J(snr, b) = E[(1 + snr*g)^(-2b)] for one channel."""
    rho = channel.snr
    squared = chan.gain_expectation(None, channel, q, factor=lambda g: (1.0 + rho * g) ** (-2.0 * bw_ratio))
    return math.sqrt(squared)


def eval_rc(cfg: SchemeConfig, q: QuadratureSpec = DEFAULT_QUADRATURE) -> DistortionBreakdown:
    """Rate matched to every realization: D = 2^(-2b(I0 + I1))."""
    _require(cfg, SchemeKind.RC)
    rho, b = cfg.channel.snr, cfg.bw_ratio
    mean = chan.gain_expectation(None, cfg.channel, q, factor=lambda g: (1.0 + rho * g) ** (-2.0 * b))
    second = chan.gain_expectation(None, cfg.channel, q, factor=lambda g: (1.0 + rho * g) ** (-4.0 * b))
    return DistortionBreakdown({"success": 1.0}, {"success": mean}, mean, max(second - mean * mean, 0.0))


def evaluate(
    cfg: SchemeConfig,
    region: Optional[DecodingRegion] = None,
    q: QuadratureSpec = DEFAULT_QUADRATURE,
) -> DistortionBreakdown:
    """Dispatch to the evaluator for ``cfg.kind``."""
    kind = cfg.kind
    if kind is SchemeKind.NO_DIV:
        return eval_no_div(cfg)
    if kind is SchemeKind.SEL_CCDIV:
        return eval_sel_ccdiv(cfg)
    if kind is SchemeKind.MPX_CCDIV:
        return eval_mpx_ccdiv(cfg)
    if kind is SchemeKind.OPT_CCDIV:
        return eval_opt_ccdiv(cfg, q)
    if kind is SchemeKind.SCDIV:
        return eval_scdiv(cfg)
    if kind is SchemeKind.SCDIV_JD:
        return eval_scdiv_jd(cfg, region or DEFAULT_JD_REGION, q)
    return eval_rc(cfg, q)
