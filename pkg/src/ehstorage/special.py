"""Real special functions used by the storage analysis.

All routines are scalar, pure and dependency free (``math`` only), so they can
be called from any thread.
"""
from __future__ import annotations

import enum
import math

from .exceptions import DomainError

__all__ = [
    "Branch",
    "lambert_w",
    "upper_incomplete_gamma_int",
    "gaussian_q",
    "r_series",
]

# 1/e split into a double and its rounding error, so that z + 1/e is accurate
# to a few ulps of 1/e near the branch point.
_INV_E_HI = 0.36787944117144233
_INV_E_LO = -1.2428753672788363e-17
_BRANCH_SLACK = 1e-12
_SERIES_SWITCH = 1e-6
_MAX_ITER = 50

# Coefficients of W(p) = -1 + p - p^2/3 + 11/72 p^3 - ... with p = +-sqrt(2(1 + e z)).
_BRANCH_SERIES = (
    -1.0,
    1.0,
    -1.0 / 3.0,
    11.0 / 72.0,
    -43.0 / 540.0,
    769.0 / 17280.0,
    -221.0 / 8505.0,
)


class Branch(enum.IntEnum):
    """Real branches of the Lambert W function."""

    PRINCIPAL = 0
    LOWER = -1


def _branch_point_series(p: float, terms: int = len(_BRANCH_SERIES)) -> float:
    acc = 0.0
    for coef in reversed(_BRANCH_SERIES[:terms]):
        acc = acc * p + coef
    return acc


def lambert_w(branch: Branch | int, z: float) -> float:
    """Real Lambert W function on branch 0 or -1.

    Solves ``w * exp(w) = z``. The principal branch is defined for
    ``z >= -1/e`` and returns ``w >= -1``; the lower branch is defined for
    ``-1/e <= z < 0`` and returns ``w <= -1``.

    Halley iteration is used away from the branch point. Within
    ``|1 + e z| < 1e-6`` the series in ``sqrt(2 (1 + e z))`` is returned directly.

    Raises
    ------
    DomainError
        If ``z < -1/e`` (beyond a ``1e-12`` slack) or, for the lower branch,
        if ``z >= 0``.
    """
    try:
        branch = Branch(branch)
    except ValueError as exc:
        raise DomainError(f"unsupported Lambert W branch {branch!r}") from exc
    z = float(z)
    if math.isnan(z):
        raise DomainError("lambert_w of NaN")
    shifted = (z + _INV_E_HI) + _INV_E_LO  # z + 1/e
    if shifted < -_BRANCH_SLACK:
        raise DomainError(f"lambert_w undefined for z={z!r} < -1/e")
    if branch is Branch.LOWER and z >= 0.0:
        raise DomainError(f"lower branch requires -1/e <= z < 0, got z={z!r}")
    if branch is Branch.PRINCIPAL and z == 0.0:
        return 0.0
    if math.isinf(z):
        return math.inf

    shifted = max(shifted, 0.0)
    dist = math.e * shifted  # 1 + e z
    sign = 1.0 if branch is Branch.PRINCIPAL else -1.0
    p = sign * math.sqrt(2.0 * dist)
    if dist < _SERIES_SWITCH:
        return _branch_point_series(p)

    if dist < 0.25:
        w = _branch_point_series(p, terms=4)
    elif branch is Branch.PRINCIPAL:
        if z < 3.0:
            w = math.log1p(z) * (1.0 - 0.2 * math.log1p(z) / (1.0 + math.log1p(z)))
        else:
            l1 = math.log(z)
            l2 = math.log(l1)
            w = l1 - l2 + l2 / l1
    else:
        l1 = math.log(-z)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1

    for _ in range(_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if abs(dw) <= 4.0 * math.ulp(1.0) * (1.0 + abs(w)):
            break
    return w


def upper_incomplete_gamma_int(order: int, x: float) -> float:
    """Upper incomplete gamma function ``Gamma(order, x)`` for integer order.

    Uses the finite-sum identity
    ``Gamma(n + 1, x) = n! e^{-x} sum_{k=0}^{n} x^k / k!``, which holds for
    every real ``x`` including negative arguments.

    Raises
    ------
    DomainError
        If ``order`` is not a positive integer.
    OverflowError
        If the result does not fit in a double.
    """
    if int(order) != order or order < 1:
        raise DomainError(f"order must be a positive integer, got {order!r}")
    n = int(order) - 1
    x = float(x)
    term = 1.0
    terms = [1.0]
    for k in range(1, n + 1):
        term *= x / k
        terms.append(term)
    partial = math.fsum(terms)
    try:
        scale = math.factorial(n) * math.exp(-x)
    except OverflowError:
        scale = math.inf
    result = scale * partial
    if math.isinf(result) or math.isnan(result):
        raise OverflowError(f"Gamma({order}, {x}) overflows a double")
    return result


def gaussian_q(x: float) -> float:
    """Gaussian tail probability ``P(N(0, 1) > x)``."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def r_series(y: float, l: int, delta: float) -> float:
    """Finite series ``sum_{q=0}^{l} (y + q)^q (delta e^{-delta})^q / q!``.

    ``0**0`` is taken as 1. When any term magnitude exceeds ``1e300`` the sum
    is accumulated in the log domain relative to the largest term.
    """
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    l = int(l)
    log_z = math.log(delta) - delta
    signs = []
    logs = []
    for q in range(l + 1):
        base = y + q
        if q == 0:
            signs.append(1.0)
            logs.append(0.0)
            continue
        if base == 0.0:
            continue
        signs.append(math.copysign(1.0, base) ** q)
        logs.append(q * math.log(abs(base)) + q * log_z - math.lgamma(q + 1))
    peak = max(logs)
    if peak <= math.log(1e300):
        return math.fsum(s * math.exp(lg) for s, lg in zip(signs, logs))
    scaled = math.fsum(s * math.exp(lg - peak) for s, lg in zip(signs, logs))
    if scaled == 0.0:
        return 0.0
    return math.copysign(math.exp(peak + math.log(abs(scaled))), scaled)
