"""System parameters, the imperfection map, and the one-slot storage update.

Energies are carried in joules per unit-length slot, so power and energy are
numerically interchangeable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .exceptions import DomainError

__all__ = [
    "EhProfile",
    "Policy",
    "Imperfections",
    "BufferSpec",
    "EffectiveParams",
    "effective_params",
    "step",
]


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise DomainError(msg)


@dataclass(frozen=True)
class EhProfile:
    """Downlink energy-harvesting profile.

    ``harvest_mean`` is ``eta * P_DL * Omega_DL``; harvests are exponential
    with that mean (Rayleigh-faded downlink).
    """

    dl_power: float
    dl_gain_mean: float
    rf_dc_efficiency: float

    def __post_init__(self):
        _require(self.dl_power > 0, "dl_power must be positive")
        _require(self.dl_gain_mean > 0, "dl_gain_mean must be positive")
        _require(0 < self.rf_dc_efficiency < 1, "rf_dc_efficiency must lie in (0, 1)")

    @classmethod
    def from_harvest_mean(cls, harvest_mean: float, dl_power: float = 1.0,
                          rf_dc_efficiency: float = 0.7) -> "EhProfile":
        """Profile whose downlink gain reproduces a given mean harvest."""
        _require(harvest_mean > 0, "harvest_mean must be positive")
        return cls(dl_power, harvest_mean / (rf_dc_efficiency * dl_power), rf_dc_efficiency)

    @property
    def harvest_mean(self) -> float:
        return self.rf_dc_efficiency * self.dl_power * self.dl_gain_mean

    @property
    def harvest_rate(self) -> float:
        return 1.0 / self.harvest_mean


@dataclass(frozen=True)
class Policy:
    """On-off policy: transmit ``target_power`` iff the buffer holds more."""

    target_power: float

    def __post_init__(self):
        _require(self.target_power > 0, "target_power must be positive")


@dataclass(frozen=True)
class Imperfections:
    """Amplifier inefficiency ``alpha``, storage efficiency ``beta``, circuit power."""

    pa_inefficiency: float = 1.0
    storage_efficiency: float = 1.0
    circuit_power: float = 0.0

    def __post_init__(self):
        _require(self.pa_inefficiency >= 1, "pa_inefficiency must be >= 1")
        _require(0 < self.storage_efficiency <= 1, "storage_efficiency must lie in (0, 1]")
        _require(self.circuit_power >= 0, "circuit_power must be >= 0")

    @property
    def is_ideal(self) -> bool:
        return (self.pa_inefficiency, self.storage_efficiency, self.circuit_power) == (1.0, 1.0, 0.0)


@dataclass(frozen=True)
class EffectiveParams:
    """Equivalent ideal-system parameters after absorbing the imperfections.

    Attributes
    ----------
    m_eff : float
        Energy drained per transmission, ``P_C + alpha * M`` (joules).
    harvest_mean_eff : float
        Mean stored energy per slot, ``beta * Xbar`` (joules).
    """

    m_eff: float
    harvest_mean_eff: float

    def __post_init__(self):
        _require(self.m_eff > 0 and math.isfinite(self.m_eff), "m_eff must be positive")
        _require(self.harvest_mean_eff > 0 and math.isfinite(self.harvest_mean_eff),
                 "harvest_mean_eff must be positive")

    @classmethod
    def from_delta(cls, delta: float, m_eff: float = 1.0) -> "EffectiveParams":
        """Parameters with a given ``delta`` and drain ``m_eff``."""
        _require(delta > 0, "delta must be positive")
        return cls(m_eff=m_eff, harvest_mean_eff=m_eff / delta)

    @property
    def harvest_rate_eff(self) -> float:
        return 1.0 / self.harvest_mean_eff

    @property
    def delta(self) -> float:
        return self.m_eff / self.harvest_mean_eff


def effective_params(profile: EhProfile, policy: Policy, imp: Imperfections) -> EffectiveParams:
    """Map a non-ideal system onto its ideal equivalent.

    The drain becomes ``P_C + alpha * M`` and the harvest law is scaled by
    ``beta`` (an exponential of mean ``beta * Xbar``).
    """
    m_eff = imp.circuit_power + imp.pa_inefficiency * policy.target_power
    return EffectiveParams(m_eff=m_eff,
                           harvest_mean_eff=imp.storage_efficiency * profile.harvest_mean)


def target_power_from_m_eff(m_eff: float, imp: Imperfections) -> float:
    """Invert the drain map: ``M = (m_eff - P_C) / alpha``."""
    return (m_eff - imp.circuit_power) / imp.pa_inefficiency


@dataclass(frozen=True)
class BufferSpec:
    """Energy buffer capacity: infinite, or ``K = l * m_eff`` for integer ``l``."""

    l: int | None = None
    capacity: float = field(default=math.inf)

    def __post_init__(self):
        if self.l is None:
            _require(math.isinf(self.capacity), "infinite buffer must have capacity=inf")
        else:
            _require(int(self.l) == self.l and self.l >= 1, "l must be a positive integer")
            _require(self.capacity > 0 and math.isfinite(self.capacity),
                     "finite buffer needs a positive capacity")

    @classmethod
    def infinite(cls) -> "BufferSpec":
        return cls()

    @classmethod
    def finite(cls, l: int, m_eff: float) -> "BufferSpec":
        """Buffer of ``l`` drains, ``K = l * m_eff``."""
        return cls(l=int(l), capacity=int(l) * m_eff)

    @property
    def is_finite(self) -> bool:
        return self.l is not None

    def check_multiple(self, m_eff: float) -> None:
        """Raise unless the capacity equals ``l * m_eff`` within 1e-12 relative."""
        if self.is_finite and abs(self.capacity - self.l * m_eff) > 1e-12 * self.capacity:
            raise DomainError(f"capacity {self.capacity!r} is not {self.l} * m_eff={m_eff!r}")


def step(b: float, harvest: float, eff: EffectiveParams, buf: BufferSpec) -> float:
    """Buffer content at the start of the next slot.

    Transmission happens iff ``b > m_eff`` (strict), draining ``m_eff``;
    ``harvest`` is the already-scaled stored amount. Finite buffers clip at K.
    """
    drained = b - eff.m_eff if b > eff.m_eff else b
    nxt = drained + harvest
    if buf.is_finite and nxt > buf.capacity:
        return buf.capacity
    return nxt
