"""Self-check suite run by ``validate``: analytic identities plus seeded Monte Carlo."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import integrate, special as sps

from . import limiting as lim
from .performance import (
    LinkParams,
    aer,
    channel_outage,
    diversity_slope,
    optimal_delta,
    total_outage,
    transmission_probability,
)
from .simulation import SimConfig, distribution_distance, simulate
from .special import Branch, lambert_w, r_series, upper_incomplete_gamma_int
from .storage import BufferSpec, EffectiveParams

__all__ = ["CheckResult", "run_checks", "VALIDATION_SEED"]

VALIDATION_SEED = 20141208


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float
    seconds: float

    def to_dict(self) -> dict:
        return {"check": self.name, "pass": self.passed,
                "value": format(self.value, ".6g"), "limit": format(self.limit, ".6g")}


def _lambert_identity() -> tuple[float, float]:
    worst = 0.0
    for z in np.linspace(-1 / math.e + 1e-10, 5.0, 400):
        w = lambert_w(Branch.PRINCIPAL, z)
        worst = max(worst, abs(w * math.exp(w) - z) / max(abs(z), 1e-300))
    for z in np.linspace(-1 / math.e + 1e-10, -1e-6, 400):
        w = lambert_w(Branch.LOWER, z)
        worst = max(worst, abs(w * math.exp(w) - z) / abs(z))
    return worst, 1e-10


def _gamma_identity() -> tuple[float, float]:
    worst = 0.0
    for n in range(0, 12):
        for x in (0.1, 1.0, 3.5, 10.0):
            ref = sps.gammaincc(n + 1, x) * math.gamma(n + 1)
            worst = max(worst, abs(upper_incomplete_gamma_int(n + 1, x) - ref) / ref)
    return worst, 1e-12


def _r_series_exact() -> tuple[float, float]:
    worst = 0.0
    for y, l, delta in ((-3, 2, 0.5), (-5, 4, 1.2), (-2.5, 3, 0.8)):
        z = Fraction(delta * math.exp(-delta))
        ref = float(sum((Fraction(y) + q) ** q * z ** q / math.factorial(q) for q in range(l + 1)))
        worst = max(worst, abs(r_series(y, l, delta) - ref) / abs(ref))
    return worst, 1e-12


def _normalization() -> tuple[float, float]:
    worst = 0.0
    for delta in (0.5, 0.8, 0.965, 1.0, 1.2):
        eff = EffectiveParams.from_delta(delta)
        for l in (2, 3, 4, 7, 20):
            buf = BufferSpec.finite(l, 1.0)
            worst = max(worst, abs(lim.finite_exact(eff, buf).total_mass() - 1.0))
            if l >= 3:
                worst = max(worst, abs(lim.finite_approx(eff, buf).total_mass() - 1.0))
    return worst, 1e-9


def _residual_exact() -> tuple[float, float]:
    eff = EffectiveParams.from_delta(1.2)
    dist = lim.finite_exact(eff, BufferSpec.finite(3, 1.0))
    return lim.integral_residual(dist, np.linspace(0.0, 3.0, 200, endpoint=False)), 1e-7


def _residual_infinite() -> tuple[float, float]:
    dist = lim.infinite_pdf(EffectiveParams.from_delta(1.5))
    return lim.integral_residual(dist, np.linspace(0.0, 10.0, 200)), 1e-7


def _head_error_bound(l: int, bound: float) -> Callable[[], tuple[float, float]]:
    def check():
        worst = 0.0
        xs = np.linspace(1e-3, 1.0, 200, endpoint=False)
        for delta in np.arange(0.5, 1.51, 0.05):
            eff = EffectiveParams.from_delta(float(delta))
            buf = BufferSpec.finite(l, 1.0)
            exact = lim.finite_exact(eff, buf).pdf(xs)
            approx = lim.finite_approx(eff, buf).pdf(xs)
            worst = max(worst, float(np.max(np.abs(exact - approx) / exact)))
        return worst, bound
    return check


def _error_formula() -> tuple[float, float]:
    worst = 0.0
    rng = np.random.default_rng(VALIDATION_SEED)
    for l, delta in ((3, 0.5), (4, 0.965), (5, 1.2)):
        eff = EffectiveParams.from_delta(delta)
        buf = BufferSpec.finite(l, 1.0)
        ex, ap = lim.finite_exact(eff, buf), lim.finite_approx(eff, buf)
        for x in rng.uniform(0.0, 1.0, 20):
            worst = max(worst, abs(lim.approx_error(x, eff, buf) - (ex.pdf(x) - ap.pdf(x))))
    return worst, 1e-10


def _asymptotic() -> tuple[float, float]:
    errs = lim.asymptotic_infinite_limit_check(1.2, (4, 8, 16, 32))
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    return (errs[-1] if decreasing else math.inf), 1e-3


def _ptrans_limit() -> tuple[float, float]:
    eff = EffectiveParams.from_delta(1.2)
    p = transmission_probability(lim.finite_approx(eff, BufferSpec.finite(40, 1.0)))
    return abs(p - 1 / 1.2), 1e-3


def _aer_quadrature() -> tuple[float, float]:
    worst = 0.0
    for snr_db in (0.0, 10.0, 20.0, 30.0):
        link = LinkParams.from_db(snr_db)
        for delta in (0.1, 0.5, 1.0, 1.5, 3.0):
            s = link.snr_bar * delta
            ref, _ = integrate.quad(
                lambda h: 0.5 * sps.erfc(math.sqrt(link.mod_b * s * h) / math.sqrt(2)) * math.exp(-h),
                0, np.inf, epsabs=0, epsrel=1e-13, limit=200)
            worst = max(worst, abs(aer(link, delta) - ref) / ref)
    return worst, 1e-10


def _diversity() -> tuple[float, float]:
    link = LinkParams.from_db(24.6)
    slope, _ = diversity_slope(link, 0.9, 10 ** (np.linspace(30, 60, 31) / 10))
    return abs(slope + 1.0), 0.02


def _optimizer_order() -> tuple[float, float]:
    link = LinkParams.from_db(24.6)
    grid = np.round(np.arange(0.1, 1.5001, 0.05), 12)
    stars = [optimal_delta(BufferSpec.finite(l, 1.0), link, grid).delta for l in (4, 7, 20)]
    ok = stars[0] <= stars[1] <= stars[2] <= 1.0
    return (0.0 if ok else 1.0), 0.0


def _mc_infinite() -> tuple[float, float]:
    r = simulate(EffectiveParams.from_delta(1.25), BufferSpec.infinite(), LinkParams.from_db(24.6),
                 SimConfig(n_slots=1_000_000, seed=VALIDATION_SEED, n_replications=10))
    return abs(r.p_trans_hat.value - 0.8), 3e-3


def _mc_finite() -> tuple[float, float]:
    eff = EffectiveParams(9.65e-6, 1e-5)
    buf = BufferSpec.finite(4, eff.m_eff)
    link = LinkParams.from_db(24.6)
    r = simulate(eff, buf, link, SimConfig(n_slots=1_000_000, seed=VALIDATION_SEED, n_replications=10))
    exact = lim.finite_exact(eff, buf)
    approx = lim.finite_approx(eff, buf)
    p_tr = transmission_probability(approx)
    p_ch = channel_outage(link, eff.delta)
    checks = [
        (r.atom_freq_hat, exact.atom),
        (r.p_trans_hat, p_tr),
        (r.aer_hat, aer(link, eff.delta)),
        (r.channel_outage_hat, p_ch),
        (r.total_outage_hat, total_outage(p_tr, p_ch)),
    ]
    # worst deviation in CI radii; also require the cdf distance bound
    radii = max(abs(e.value - t) / e.ci for e, t in checks)
    if distribution_distance(r, exact)["sup_cdf"] > 2e-3:
        return math.inf, 3.0
    return radii, 3.0


_ANALYTIC = [
    ("lambert_w_identity", _lambert_identity),
    ("incomplete_gamma_vs_scipy", _gamma_identity),
    ("r_series_vs_rational", _r_series_exact),
    ("normalization", _normalization),
    ("residual_finite_exact", _residual_exact),
    ("residual_infinite", _residual_infinite),
    ("approx_bound_l3", _head_error_bound(3, 8.3e-2)),
    ("approx_bound_l4", _head_error_bound(4, 1.64e-2)),
    ("error_formula_vs_difference", _error_formula),
    ("asymptotic_infinite_limit", _asymptotic),
    ("p_trans_large_buffer", _ptrans_limit),
    ("aer_vs_quadrature", _aer_quadrature),
    ("diversity_slope", _diversity),
    ("optimizer_ordering", _optimizer_order),
]

_MONTE_CARLO = [
    ("mc_infinite_p_trans", _mc_infinite),
    ("mc_finite_oracle_agreement", _mc_finite),
]


def run_checks(fast: bool = False) -> list[CheckResult]:
    """Run the suite; ``fast`` skips the Monte Carlo checks."""
    out = []
    for name, fn in _ANALYTIC + ([] if fast else _MONTE_CARLO):
        t0 = time.perf_counter()
        try:
            value, limit = fn()
            passed = bool(value <= limit)
        except Exception:  # a crash is a failed check, not an abort
            value, limit, passed = math.nan, math.nan, False
        out.append(CheckResult(name, passed, float(value), float(limit), time.perf_counter() - t0))
    return out
