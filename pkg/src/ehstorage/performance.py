"""Link-level metrics: transmission probability, AER, outage, optimal delta."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import DomainError
from .limiting import (
    DELTA_ONE_TOL,
    FiniteApproxDist,
    FiniteExactDist,
    InfiniteBufferDist,
    LimitingDistribution,
    finite_approx,
)
from .storage import BufferSpec, EffectiveParams

__all__ = [
    "LinkParams",
    "transmission_probability",
    "aer",
    "channel_outage",
    "total_outage",
    "diversity_slope",
    "optimal_delta",
    "total_outage_at",
    "OptimumResult",
]


@dataclass(frozen=True)
class LinkParams:
    """Uplink parameters.

    ``snr_bar`` is ``Omega_UL * Xbar_eff / sigma_n^2``, so the SNR while
    transmitting is ``snr_bar * delta * h`` with ``h ~ Exp(1)``.
    """

    snr_bar: float
    rate: float = 2.1
    mod_a: float = 1.0
    mod_b: float = 2.0
    noise_power: float = 10 ** ((-103 - 30) / 10)
    ul_gain_mean: float | None = None

    def __post_init__(self):
        if not self.snr_bar > 0:
            raise DomainError("snr_bar must be positive")
        if not (self.mod_a > 0 and self.mod_b > 0):
            raise DomainError("modulation constants must be positive")
        if self.rate < 0:
            raise DomainError("rate must be non-negative")

    @property
    def snr_threshold(self) -> float:
        return 2.0 ** self.rate - 1.0

    @classmethod
    def from_db(cls, snr_bar_db: float, **kwargs) -> "LinkParams":
        return cls(snr_bar=10 ** (snr_bar_db / 10), **kwargs)

    def with_snr(self, snr_bar: float) -> "LinkParams":
        return LinkParams(snr_bar, self.rate, self.mod_a, self.mod_b, self.noise_power,
                          self.ul_gain_mean)


def transmission_probability(dist: LimitingDistribution | None = None,
                             delta: float | None = None) -> float:
    """Limiting probability that the buffer holds more than one drain.

    Pass an approximate finite distribution for the closed form
    ``1 - c e^{dM} (1 - delta) / d`` (``1 - c M / 2`` at ``delta = 1``); an
    exact finite distribution is integrated numerically.  With ``dist=None``
    (or an infinite-buffer distribution) the infinite-buffer value is
    returned: 1 for ``delta <= 1`` and ``1 / delta`` otherwise.
    """
    if isinstance(dist, FiniteApproxDist):
        return 1.0 - dist.head_integral()
    if isinstance(dist, FiniteExactDist):
        return 1.0 - dist.section_masses[0]
    if isinstance(dist, InfiniteBufferDist):
        delta = dist.delta
    if delta is None:
        raise DomainError("delta is required for the infinite-buffer regime")
    return 1.0 if delta <= 1.0 else 1.0 / delta


def aer(link: LinkParams, delta: float) -> float:
    """Average error rate of ``a Q(sqrt(b gamma))`` over Rayleigh fading.

    Takes no buffer argument: the transmit power is constant whenever the
    node transmits.
    """
    if delta <= 0:
        raise DomainError("delta must be positive")
    x = link.mod_b * link.snr_bar * delta
    return 0.5 * link.mod_a * (1.0 - math.sqrt(x / (2.0 + x)))


def channel_outage(link: LinkParams, delta: float) -> float:
    """``P(gamma < gamma_thr) = 1 - exp(-gamma_thr / (delta snr_bar))``."""
    if delta <= 0:
        raise DomainError("delta must be positive")
    return -math.expm1(-link.snr_threshold / (delta * link.snr_bar))


def total_outage(p_trans: float, p_channel: float) -> float:
    """Missed transmissions plus channel outages among transmissions."""
    for v in (p_trans, p_channel):
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"probabilities must lie in [0, 1], got {v!r}")
    return (1.0 - p_trans) + p_trans * p_channel


def _buffer_for(buf: BufferSpec, delta: float, m_eff: float = 1.0) -> tuple:
    eff = EffectiveParams.from_delta(delta, m_eff)
    if buf.is_finite:
        return eff, BufferSpec.finite(buf.l, m_eff)
    return eff, buf


def total_outage_at(buf: BufferSpec, link: LinkParams, delta: float, n_c: int = 2) -> float:
    """Total outage for a buffer of ``l`` drains (or infinite) at a given ``delta``."""
    eff, b = _buffer_for(buf, delta)
    if b.is_finite:
        p_tr = transmission_probability(finite_approx(eff, b, n_c))
    else:
        p_tr = transmission_probability(None, delta)
    return total_outage(p_tr, channel_outage(link, delta))


def diversity_slope(link: LinkParams, delta: float, snr_grid: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of log channel outage against log ``snr_bar``.

    Returns ``(slope, rms_residual)``; a slope of -1 is diversity order one.
    """
    snr = np.asarray(snr_grid, dtype=float)
    if snr.size < 2 or np.any(snr <= 0):
        raise DomainError("snr_grid needs at least two positive values")
    if np.log10(snr.max() / snr.min()) < 2.0:
        raise DomainError("snr_grid must span at least two decades")
    out = np.array([channel_outage(link.with_snr(s), delta) for s in snr])
    xs, ys = np.log(snr), np.log(out)
    coef, res, *_ = np.polyfit(xs, ys, 1, full=True)
    rms = math.sqrt(float(res[0]) / snr.size) if res.size else 0.0
    return float(coef[0]), rms


@dataclass(frozen=True)
class OptimumResult:
    delta: float
    outage: float
    grid_index: int
    high_outage: bool


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden(fn, a: float, b: float, tol: float = 1e-6, max_iter: int = 80) -> tuple[float, float]:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(c)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    return (c, fc) if fc <= fd else (d, fd)


def optimal_delta(buf: BufferSpec, link: LinkParams, delta_grid: Sequence[float],
                  n_c: int = 2) -> OptimumResult:
    """Outage-minimizing ``delta`` for a buffer of fixed size in drains.

    Grid argmin (ties to the smaller ``delta``) followed by one golden-section
    pass inside the bracket formed by the argmin's neighbours.  The result
    flags the high-outage regime (minimum above 0.5).
    """
    grid = np.asarray(delta_grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise DomainError("delta_grid must be non-empty, positive and increasing")

    def objective(delta: float) -> float:
        return total_outage_at(buf, link, delta, n_c)

    values = [objective(d) for d in grid]
    best = int(np.argmin(values))  # first minimum = smallest delta on ties
    d_best, f_best = float(grid[best]), float(values[best])
    if 0 < best < grid.size - 1:
        d_ref, f_ref = _golden(objective, float(grid[best - 1]), float(grid[best + 1]))
        if f_ref < f_best:
            d_best, f_best = d_ref, f_ref
    return OptimumResult(d_best, f_best, best, f_best > 0.5)
