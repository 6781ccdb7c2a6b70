"""Expected distortion of a Gaussian source over two parallel Rayleigh-fading
channels under channel-coding, source-coding and rate-control diversity schemes."""

__version__ = "0.1.0"

from .channel import (
    ChannelParams,
    QuadratureSpec,
    exp_mi_sum_cdf,
    gain_expectation,
    mi_cdf,
    mi_pdf,
    mi_sum_cdf,
    outage_prob,
)
from .errors import DomainError, EstimationError, InfeasiblePointError, NumericalError
from .source import MDPoint, distortion_rate, md_central, md_tradeoff_curve
from .schemes import (
    DEFAULT_JD_REGION,
    PER_DESCRIPTION_REGION,
    DecodingRegion,
    DistortionBreakdown,
    SchemeConfig,
    SchemeKind,
    evaluate,
)
from .analysis import (
    AsymptoticModel,
    ExponentEstimate,
    OptResult,
    asymptotic_outage,
    estimate_exponent,
    fit_exponent,
    optimize,
    optimize_rate,
    optimize_scdiv,
)
from .mc import McConfig, McEstimate, derive_stream, draw_gains, simulate_scheme
