"""Rate optimization per SNR and high-SNR distortion-exponent estimation."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional, Sequence

import numpy as np

from .channel import ChannelParams
from .errors import DomainError, EstimationError
from .schemes import (
    DEFAULT_JD_REGION,
    SCDIV_FAMILY,
    DecodingRegion,
    SchemeConfig,
    SchemeKind,
    evaluate,
    region_probs,
    scdiv_probs,
)
from .source import md_central, md_tradeoff_curve

DEFAULT_BOUNDS = (1e-4, 12.0)
COARSE_POINTS = 64
RATE_TOL = 1e-6
SIDE_TOL = 1e-9
DEFAULT_SIDE_GRID = 32

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class OptResult:
    kind: SchemeKind
    snr: float
    best_rate: Optional[float]
    best_expected: float
    evaluations: int
    best_d_side: Optional[float] = None
    pinned: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


@dataclass
class ExponentEstimate:
    kind: Optional[SchemeKind]
    delta: float
    stderr: float
    snr_range_db: tuple[float, float]
    n_points: int
    used_points: int = 0
    curvature_t: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value if self.kind is not None else None
        d["snr_range_db"] = list(self.snr_range_db)
        return d


@dataclass(frozen=True)
class AsymptoticModel:
    """High-SNR outage law ``p_out(R) ~ c * event_size(R) / snr**beta``.

    ``event_size`` is the area (beta = 2) or length (beta = 1) of the outage
    event measured in ``snr * gain`` units: ``2^R - 1`` for one channel,
    ``(2^R - 1)^2`` for both channels, and ``X ln X - X + 1`` with
    ``X = 2^(2R)`` for the sum event ``I0 + I1 < 2R``.
    """

    c: float
    beta: int
    event_size: Callable[[float], float] = field(repr=False)

    def outage(self, rate: float, snr: float) -> float:
        return self.c * self.event_size(rate) / snr**self.beta


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float):
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns (x, f(x), n_evals)."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    n = 2
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        n += 1
    if fc <= fd:
        return c, fc, n
    return d, fd, n


def _check_bounds(bounds: Sequence[float]) -> tuple[float, float]:
    lo, hi = float(bounds[0]), float(bounds[1])
    if not (lo >= 0 and hi > lo and math.isfinite(hi)):
        raise DomainError(f"invalid rate bounds {bounds!r}")
    return lo, hi


def _minimize_rate(objective, lo, hi):
    """Coarse grid in R (log-spaced in 2^R) then golden-section on the best cell."""
    grid = np.linspace(lo, hi, COARSE_POINTS)
    values = [objective(float(r)) for r in grid]
    i = int(np.argmin(values))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, COARSE_POINTS - 1)]
    r, v, n = golden_section(objective, float(a), float(b), RATE_TOL)
    if values[i] <= v:
        r, v = float(grid[i]), values[i]
    pinned = min(r - lo, hi - r) <= RATE_TOL
    return r, v, COARSE_POINTS + n, pinned


def optimize_rate(
    kind: SchemeKind,
    channel: ChannelParams,
    b: float = 1.0,
    bounds: Sequence[float] = DEFAULT_BOUNDS,
) -> OptResult:
    """Minimize E[D] over the channel rate for the channel-coding schemes."""
    if kind is SchemeKind.RC:
        raise DomainError("rc has no rate parameter")
    if kind in SCDIV_FAMILY:
        raise DomainError(f"{kind} also needs a side distortion; use optimize_scdiv")
    lo, hi = _check_bounds(bounds)

    def objective(r):
        return evaluate(SchemeConfig(kind, channel, b, r)).expected

    r, v, n, pinned = _minimize_rate(objective, lo, hi)
    return OptResult(kind, channel.snr, r, v, n, pinned=pinned)


def best_side(probs, rate_sum: float, side_grid: int):
    """Minimize p0 + p1*d + p2*md_central(d) over the MD boundary.

    Returns (expected, d_side, n_evals). With ``side_grid == 2`` only the two
    region corners are compared.
    """
    p0, p1, p2 = probs

    def objective(d):
        return p0 + p1 * d + p2 * md_central(d, rate_sum)

    curve = md_tradeoff_curve(rate_sum, side_grid)
    sides = [pt.d_side for pt in curve]
    values = [p0 + p1 * pt.d_side + p2 * pt.d_central for pt in curve]
    j = int(np.argmin(values))
    best_d, best_v, n = sides[j], values[j], side_grid
    if side_grid > 2:
        a, b = sides[max(j - 1, 0)], sides[min(j + 1, side_grid - 1)]
        d, v, k = golden_section(objective, a, b, SIDE_TOL)
        n += k
        if v < best_v:
            best_d, best_v = d, v
    return best_v, best_d, n


def optimize_scdiv(
    kind: SchemeKind,
    channel: ChannelParams,
    b: float = 1.0,
    bounds: Sequence[float] = DEFAULT_BOUNDS,
    side_grid: int = DEFAULT_SIDE_GRID,
    region: Optional[DecodingRegion] = None,
) -> OptResult:
    """Joint minimization over the rate and the side distortion."""
    if kind not in SCDIV_FAMILY:
        raise DomainError(f"optimize_scdiv handles scdiv and scdiv-jd, not {kind}")
    if side_grid < 2:
        raise DomainError("side_grid must be >= 2")
    lo, hi = _check_bounds(bounds)
    if kind is SchemeKind.SCDIV_JD:
        region = region or DEFAULT_JD_REGION
    sides: dict[float, float] = {}
    count = [0]

    def objective(r):
        probs = scdiv_probs(channel, r) if region is None else region_probs(region, channel, r)
        v, d, n = best_side(probs, 2.0 * b * r, side_grid)
        sides[r] = d
        count[0] += n
        return v

    r, v, _, pinned = _minimize_rate(objective, lo, hi)
    return OptResult(kind, channel.snr, r, v, count[0], best_d_side=sides[r], pinned=pinned)


def optimize(
    kind: SchemeKind,
    channel: ChannelParams,
    b: float = 1.0,
    bounds: Sequence[float] = DEFAULT_BOUNDS,
    side_grid: int = DEFAULT_SIDE_GRID,
) -> OptResult:
    """Optimized E[D] for any scheme; RC is evaluated directly."""
    if kind is SchemeKind.RC:
        value = evaluate(SchemeConfig(kind, channel, b)).expected
        return OptResult(kind, channel.snr, None, value, 1)
    if kind in SCDIV_FAMILY:
        return optimize_scdiv(kind, channel, b, bounds, side_grid)
    return optimize_rate(kind, channel, b, bounds)


def _ols(x: np.ndarray, y: np.ndarray, degree: int):
    """Polynomial least squares; returns (coefficients, standard errors, rss)."""
    design = np.vander(x, degree + 1, increasing=True)
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    rss = float(resid @ resid)
    dof = len(x) - degree - 1
    sigma2 = rss / dof if dof > 0 else 0.0
    cov = sigma2 * np.linalg.inv(design.T @ design)
    return coef, np.sqrt(np.maximum(np.diag(cov), 0.0)), rss


# residual RMS (in decades) below which a fit is treated as exact
_NOISE_FLOOR = 1e-9


def fit_exponent(
    snr_db: Sequence[float],
    expected: Sequence[float],
    kind: Optional[SchemeKind] = None,
) -> ExponentEstimate:
    """Slope of -log10 E[D] against log10 snr.

    When a quadratic term is significant (|t| > 2) only the upper half of the
    grid is used.
    """
    x_all = np.asarray(snr_db, float) / 10.0
    e = np.asarray(expected, float)
    ok = np.isfinite(e) & (e > 0)
    x, y = x_all[ok], -np.log10(e[ok])
    if len(x) < 4:
        raise EstimationError(f"need at least 4 usable points, got {len(x)}")
    t_quad = 0.0
    _, _, rss_lin = _ols(x - x.mean(), y, 1)
    if len(x) >= 5 and math.sqrt(rss_lin / len(x)) > _NOISE_FLOOR:
        coef, se, _ = _ols(x - x.mean(), y, 2)
        t_quad = float(coef[2] / se[2]) if se[2] > 0 else math.copysign(math.inf, coef[2])
    if abs(t_quad) > 2.0:
        keep = x >= np.median(x)
        if keep.sum() >= 4:
            x, y = x[keep], y[keep]
    coef, se, rss = _ols(x - x.mean(), y, 1)
    if math.sqrt(rss / len(x)) <= _NOISE_FLOOR:
        se = np.zeros_like(se)
    lo, hi = float(np.min(snr_db)), float(np.max(snr_db))
    return ExponentEstimate(kind, float(coef[1]), float(se[1]), (lo, hi), len(x_all), len(x), t_quad)


def _optimized_expected(args) -> float:
    kind, snr, b = args
    return optimize(kind, ChannelParams(snr), b).best_expected


def estimate_exponent(
    kind: SchemeKind,
    b: float = 1.0,
    snr_range_db: Sequence[float] = (30.0, 60.0),
    n_points: int = 16,
    jobs: int = 1,
) -> ExponentEstimate:
    lo, hi = float(snr_range_db[0]), float(snr_range_db[1])
    if hi - lo < 20.0:
        raise DomainError(f"SNR range must span at least 20 dB, got {lo}:{hi}")
    if n_points < 8:
        raise DomainError(f"need at least 8 SNR points, got {n_points}")
    grid = np.linspace(lo, hi, n_points)
    tasks = [(kind, 10.0 ** (g / 10.0), b) for g in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(_optimized_expected, tasks))
    else:
        values = [_optimized_expected(t) for t in tasks]
    return fit_exponent(grid, values, kind)


def _single_event(rate):
    return math.expm1(rate * math.log(2.0))


def _sum_event(rate):
    x = 2.0 ** (2.0 * rate)
    return x * math.log(x) - x + 1.0


def asymptotic_outage(kind: SchemeKind, b: float = 1.0) -> AsymptoticModel:
    """Leading high-SNR term of the outage event that governs ``kind``.

    For the SCDIV family this is the loss of both descriptions.
    """
    if kind is SchemeKind.RC:
        raise DomainError("rc has no outage event")
    if kind in (SchemeKind.NO_DIV, SchemeKind.MPX_CCDIV):
        return AsymptoticModel(1.0, 1, _single_event)
    if kind is SchemeKind.OPT_CCDIV:
        return AsymptoticModel(1.0, 2, _sum_event)
    return AsymptoticModel(1.0, 2, lambda rate: _single_event(rate) ** 2)


def exponent_oracle(kind: SchemeKind, b: float) -> float:
    """Closed-form high-SNR exponent from balancing outage against distortion.

    With outage ~ x^a / snr^beta (x = 2^R, logs ignored) and success
    distortion x^-k, the optimum x ~ snr^(beta/(a+k)) gives
    exponent k*beta/(a+k). RC decays as E[(1+snr g)^-2b]^2 ~ snr^-2min(1,2b).
    """
    if kind is SchemeKind.RC:
        return 2.0 * min(1.0, 2.0 * b)
    if kind in (SchemeKind.NO_DIV, SchemeKind.MPX_CCDIV):
        a, beta, k = 1.0, 1.0, 4.0 * b
    elif kind is SchemeKind.SEL_CCDIV:
        a, beta, k = 2.0, 2.0, 2.0 * b
    elif kind is SchemeKind.OPT_CCDIV:
        a, beta, k = 2.0, 2.0, 4.0 * b
    else:
        raise DomainError(f"no closed-form exponent for {kind}")
    return k * beta / (a + k)
