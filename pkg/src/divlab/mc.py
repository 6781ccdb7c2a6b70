"""Seeded Monte-Carlo oracle for the scheme evaluators.

Random numbers come from a counter-based SplitMix64 construction so that the
sequence is defined by integer arithmetic alone (all operations mod 2^64)::

    mix(z):
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        return z ^ (z >> 31)

    key(seed, task) = mix(mix(seed) ^ mix(task + 0x9E3779B97F4A7C15))
    word(key, n)    = mix(key + (n + 1) * 0x9E3779B97F4A7C15)    n = 0, 1, ...
    uniform         = (word >> 11) * 2^-53                       in [0, 1)
    gain            = -log1p(-uniform)

Simulation batch ``k`` uses stream ``key(seed, k)``; sample ``j`` of the batch
takes gains from words ``2j`` (channel 0) and ``2j + 1`` (channel 1).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .errors import DomainError
from .schemes import (
    DEFAULT_JD_REGION,
    DELIVERED_RATE_FACTOR,
    DecodingRegion,
    SchemeConfig,
    SchemeKind,
)
from .source import distortion_rate, md_central

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
MIN_SAMPLES = 1000


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    # uint64 array arithmetic wraps mod 2^64
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


class Stream:
    """Counter-based uniform stream; ``position`` counts words consumed."""

    def __init__(self, key: int, position: int = 0):
        self.key = key & MASK64
        self.position = position

    def words(self, count: int) -> np.ndarray:
        n = np.arange(self.position + 1, self.position + 1 + count, dtype=np.uint64)
        self.position += count
        return _mix64_array(np.uint64(self.key) + n * np.uint64(GOLDEN_GAMMA))

    def uniforms(self, count: int) -> np.ndarray:
        return (self.words(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def derive_stream(seed: int, task_index: int) -> Stream:
    key = mix64(mix64(seed) ^ mix64(task_index + GOLDEN_GAMMA))
    return Stream(key)


def draw_gains(stream: Stream, count: int) -> np.ndarray:
    """``count`` pairs of unit-mean exponential gains, shape (count, 2)."""
    if count < 1:
        raise DomainError("count must be >= 1")
    u = stream.uniforms(2 * count).reshape(count, 2)
    return -np.log1p(-u)


@dataclass(frozen=True)
class McConfig:
    n_samples: int = 10**6
    seed: int = 0
    batch: int = 2**16

    def __post_init__(self):
        if self.n_samples < MIN_SAMPLES:
            raise DomainError(f"n_samples must be >= {MIN_SAMPLES}, got {self.n_samples}")
        if not 0 <= self.seed <= MASK64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.batch < 1:
            raise DomainError("batch must be >= 1")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    variance: float
    n_samples: int
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def realized_distortion(
    cfg: SchemeConfig, gains: np.ndarray, region: Optional[DecodingRegion] = None
) -> np.ndarray:
    """Per-sample distortion of ``cfg.kind`` for gain pairs of shape (n, 2)."""
    rho, b, rate = cfg.channel.snr, cfg.bw_ratio, cfg.rate
    i0 = np.log2(1.0 + rho * gains[:, 0])
    i1 = np.log2(1.0 + rho * gains[:, 1])
    kind = cfg.kind
    if kind is SchemeKind.RC:
        return ((1.0 + rho * gains[:, 0]) * (1.0 + rho * gains[:, 1])) ** (-2.0 * b)
    if kind in (SchemeKind.SCDIV, SchemeKind.SCDIV_JD):
        d_central = md_central(cfg.d_side, cfg.rate_sum)
        if kind is SchemeKind.SCDIV:
            level = (i0 >= rate).astype(np.int8) + (i1 >= rate)
        else:
            level = (region or DEFAULT_JD_REGION).outcome(i0, i1, rate)
        return np.array([1.0, cfg.d_side, d_central])[level]
    d = distortion_rate(DELIVERED_RATE_FACTOR[kind] * b * rate)
    if kind is SchemeKind.NO_DIV:
        ok = i0 >= rate
    elif kind is SchemeKind.SEL_CCDIV:
        ok = np.maximum(i0, i1) >= rate
    elif kind is SchemeKind.OPT_CCDIV:
        ok = i0 + i1 >= 2.0 * rate
    else:
        half0 = np.where(i0 >= rate, d, 1.0)
        half1 = np.where(i1 >= rate, d, 1.0)
        return 0.5 * (half0 + half1)
    return np.where(ok, d, 1.0)


def _batch_moments(cfg, region, mc: McConfig, k: int):
    start = k * mc.batch
    count = min(mc.batch, mc.n_samples - start)
    values = realized_distortion(cfg, draw_gains(derive_stream(mc.seed, k), count), region)
    mean = float(values.mean())
    return count, mean, float(((values - mean) ** 2).sum())


def simulate_scheme(
    cfg: SchemeConfig,
    region: Optional[DecodingRegion] = None,
    mc: McConfig = McConfig(),
    jobs: int = 1,
) -> McEstimate:
    """Estimate E[D] with batched Welford/Chan accumulation in batch order.

    The result depends only on (cfg, region, mc), never on ``jobs``.
    """
    n_batches = -(-mc.n_samples // mc.batch)
    indices = range(n_batches)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda k: _batch_moments(cfg, region, mc, k), indices))
    else:
        parts = [_batch_moments(cfg, region, mc, k) for k in indices]
    n, mean, m2 = 0, 0.0, 0.0
    for count, b_mean, b_m2 in parts:
        total = n + count
        delta = b_mean - mean
        mean += delta * count / total
        m2 += b_m2 + delta * delta * n * count / total
        n = total
    variance = m2 / (n - 1)
    return McEstimate(mean, math.sqrt(variance / n), variance, n, mc.seed)
