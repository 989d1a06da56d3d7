"""Limiting distributions of the stored energy under the on-off policy.

Harvests are exponential with rate ``lam`` and every transmission drains
``M``; ``delta = lam * M``.  Three families are provided:

* :func:`infinite_pdf` -- infinite buffer, ``delta > 1``.
* :func:`finite_exact` -- buffer ``K = l * M``: piecewise density on ``[0, K)``
  plus an atom at ``K``.
* :func:`finite_approx` -- the exponential-body approximation of the finite
  density, whose head section gives the transmission probability in closed
  form.

Each distribution stores its density as a tuple of :class:`Section` objects
whose coefficients are evaluated in double precision.  The finite-buffer
closed forms are alternating sums with factorially large terms, so the
coefficients are built in extended precision (``mpmath``) with a working
precision chosen from the observed cancellation, then rounded once.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, ClassVar, Sequence

import mpmath
import numpy as np
from scipy import integrate

from .exceptions import DomainError, NumericalInstabilityError
from .special import Branch, lambert_w, r_series, upper_incomplete_gamma_int
from .storage import BufferSpec, EffectiveParams

__all__ = [
    "Section",
    "LimitingDistribution",
    "InfiniteBufferDist",
    "FiniteExactDist",
    "FiniteApproxDist",
    "infinite_pdf",
    "finite_exact",
    "finite_approx",
    "approx_error",
    "pdf_eval",
    "cdf_eval",
    "integral_residual",
    "asymptotic_infinite_limit_check",
    "DELTA_ONE_TOL",
]

DELTA_ONE_TOL = 1e-9
_MAX_LOST_DIGITS_DOUBLE = 6.0
_TARGET_DIGITS = 22
_MAX_DPS = 4000
_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-12, limit=200)


# --------------------------------------------------------------------------
# Arithmetic contexts
# --------------------------------------------------------------------------

class _Arith:
    """Scalar arithmetic with cancellation bookkeeping.

    ``dps=None`` gives plain doubles with correctly rounded summation;
    otherwise a private mpmath context of ``dps`` digits is used.
    """

    def __init__(self, dps: int | None = None):
        self.dps = dps
        self.max_cond = 1.0
        if dps is None:
            self.num = float
            self.exp = math.exp
        else:
            self._mp = mpmath.MPContext()
            self._mp.dps = dps
            self.num = self._mp.mpf
            self.exp = self._mp.exp

    def factorial(self, n: int):
        return self.num(math.factorial(n))

    def comb(self, n: int, k: int):
        return self.num(math.comb(n, k))

    def sum(self, terms):
        terms = list(terms)
        if not terms:
            return self.num(0)
        if self.dps is None:
            total = math.fsum(terms)
        else:
            total = self._mp.fsum(terms)
        scale = sum(abs(t) for t in terms)
        if scale:
            cond = float(scale / abs(total)) if total else math.inf
            self.max_cond = max(self.max_cond, cond)
        return total

    def gamma_upper(self, order: int, x):
        if self.dps is None:
            return upper_incomplete_gamma_int(order, x)
        return self._mp.gammainc(order, x)

    @property
    def lost_digits(self) -> float:
        return math.log10(self.max_cond) if math.isfinite(self.max_cond) else math.inf


def _solve_adaptive(builder: Callable[[_Arith], object], precision: str):
    """Run ``builder`` until its cancellation leaves enough correct digits."""
    if precision == "double":
        ar = _Arith(None)
        out = builder(ar)
        if ar.lost_digits > _MAX_LOST_DIGITS_DOUBLE:
            raise NumericalInstabilityError(
                f"double-precision evaluation lost {ar.lost_digits:.1f} decimal digits")
        return out
    if precision != "auto":
        raise ValueError(f"precision must be 'auto' or 'double', got {precision!r}")
    dps = 30
    while dps <= _MAX_DPS:
        ar = _Arith(dps)
        out = builder(ar)
        needed = _TARGET_DIGITS + ar.lost_digits
        if needed <= dps:
            return out
        dps = 2 * dps if not math.isfinite(needed) else int(math.ceil(needed)) + 10
    raise NumericalInstabilityError(f"closed form needs more than {_MAX_DPS} digits")


# --------------------------------------------------------------------------
# Closed-form pieces in normalized units (lam = 1, M = delta, K = l * delta)
# --------------------------------------------------------------------------

def _tail_poly(ar: _Arith, delta, n: int) -> list:
    """Coefficients ``P_k`` with ``g_n / (pi lam) = e^{n delta} e^{s} sum P_k s^k``.

    ``s = lam * (x_hi - x)`` runs over ``[0, delta]`` from the right end of
    section ``n`` (``x_hi = K - n M``).  Expands the product form
    ``1 + sum_q e^{-delta q}/(q-1)! (delta q + lam(x-K))^{q-1} (lam(x-K)/q + delta - 1)``.
    """
    buckets: list[list] = [[] for _ in range(n + 1)]
    buckets[0].append(ar.num(1))
    for q in range(1, n + 1):
        w = ar.exp(-delta * q) / ar.factorial(q - 1)
        u = delta * (q - n)
        v = delta - 1 - n * delta / q
        for j in range(q):
            base = w * ar.comb(q - 1, j) * u ** (q - 1 - j) * (-1) ** j
            buckets[j].append(base * v)
            buckets[j + 1].append(-base / q)
    return [ar.sum(b) for b in buckets]


def _head_series(ar: _Arith, delta, l: int) -> list:
    """Coefficients ``E_k`` with ``g_{l-1} / (pi lam e^{delta(l-1)}) = e^{-y} sum E_k y^k``.

    ``y = lam * x`` on ``[0, delta]``.  The head closed form equals
    ``C0 - e^{-y} Q(y)``, so ``E_k = C0/k! - Q_k``; the series is truncated
    once ``C0 delta^k / k!`` is negligible.
    """
    a = [delta * (q + 1 - l) for q in range(l - 1)]
    v = [ar.exp(-delta * q) / ar.factorial(q) for q in range(l - 1)]
    c0_terms = [v[q] * a[q] ** q for q in range(l - 1)]
    c0 = ar.sum(c0_terms)
    reach = max(float(delta), 1.0)
    coeffs = [ar.num(0)]  # g_{l-1}(0) = 0 identically
    peak = 0.0
    k = 1
    while True:
        terms = [t / ar.factorial(k) for t in c0_terms]
        terms += [-v[q] * ar.comb(q, k) * a[q] ** (q - k) for q in range(k, l - 1)]
        e_k = ar.sum(terms)
        coeffs.append(e_k)
        mag = abs(float(e_k)) * reach ** k
        peak = max(peak, mag)
        if k >= l - 2 and abs(float(c0)) / math.factorial(k) * reach ** k < 1e-22 * peak:
            break
        k += 1
        if k > 600:
            break
    return coeffs


def _section_masses(ar: _Arith, delta, n_max: int) -> list:
    """``int g_n / pi`` over section ``n`` for ``n = 0..n_max``."""
    z = delta * ar.exp(-delta)
    out = []
    for n in range(n_max + 1):
        terms = [z ** q / ar.factorial(q)
                 * (ar.exp(delta) * (q - (n + 1)) ** q - (q - n) ** q)
                 for q in range(n + 1)]
        out.append(ar.exp(n * delta) * ar.sum(terms))
    return out


def _head_mass(ar: _Arith, delta, l: int):
    """``int_0^M g_{l-1} / pi`` via the incomplete-gamma form."""
    terms = []
    for q in range(l - 1):
        lo = delta * (q + 1 - l)
        hi = delta * (q + 2 - l)
        gam = ar.gamma_upper(q + 1, hi) - ar.gamma_upper(q + 1, lo)
        terms.append(ar.exp(-delta * q) / ar.factorial(q)
                     * (ar.exp(lo) * gam + delta * lo ** q))
    return ar.exp(-delta * (1 - l)) * ar.sum(terms)


def _exact_solution(ar: _Arith, delta_f: float, l: int, n_tails: int | None = None,
                    with_head: bool = True):
    """Atom, head coefficients and the first ``n_tails`` tail polynomials."""
    delta = ar.num(delta_f)
    tails = _section_masses(ar, delta, l - 2)
    head = _head_mass(ar, delta, l)
    atom = 1 / (1 + ar.sum(tails) + head)
    n_tails = l - 1 if n_tails is None else n_tails
    tail_polys = [_tail_poly(ar, delta, n) for n in range(n_tails)]
    tail_coef = [[float(atom * ar.exp(n * delta) * c) for c in poly]
                 for n, poly in enumerate(tail_polys)]
    head_coef = None
    if with_head:
        head_scale = atom * ar.exp(delta * (l - 1))
        head_coef = [float(head_scale * e) for e in _head_series(ar, delta, l)]
    return float(atom), head_coef, tail_coef


def _sigma1(ar: _Arith, delta, l: int):
    big_l = l * delta
    terms = [ar.num(1)]
    for q in range(1, l):
        terms.append(ar.exp(-delta * q) / ar.factorial(q - 1)
                     * (delta * q - big_l) ** (q - 1) * (-big_l / q + delta - 1))
    return ar.exp(big_l) * ar.sum(terms)


# --------------------------------------------------------------------------
# Sections and distributions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Section:
    """One analytic piece of a density on ``[x_lo, x_hi)``.

    ``formula_id`` selects the evaluation rule; ``coefficients`` are its
    parameters (densities in 1/J):

    ``head_exact``   ``e^{-y} sum c_k y^k`` with ``y = lam x``
    ``tail_exact``   ``e^{s} sum c_k s^k`` with ``s = lam (x_hi - x)``
    ``head_approx``  ``[c, d]``: ``c lam e^{d x_hi} (e^{d x} - 1) / d`` (``c lam x`` if ``d == 0``)
    ``exp_body``     ``[c, d]``: ``c e^{d x}``
    ``inf_head``     ``[p]``: ``(1 - e^{p x}) / x_hi``
    ``inf_tail``     ``[k, p]``: ``k e^{p x}``
    """

    x_lo: float
    x_hi: float
    formula_id: str
    coefficients: tuple

    def evaluate(self, x: np.ndarray, rate: float) -> np.ndarray:
        c = self.coefficients
        fid = self.formula_id
        if fid == "head_exact":
            y = rate * x
            return np.exp(-y) * np.polynomial.polynomial.polyval(y, c)
        if fid == "tail_exact":
            s = rate * (self.x_hi - x)
            return np.exp(s) * np.polynomial.polynomial.polyval(s, c)
        if fid == "head_approx":
            cc, d = c
            if d == 0.0:
                return cc * rate * x
            return cc * rate * math.exp(d * self.x_hi) * np.expm1(d * x) / d
        if fid == "exp_body":
            cc, d = c
            return cc * np.exp(d * x)
        if fid == "inf_head":
            (p,) = c
            return -np.expm1(p * x) / self.x_hi
        if fid == "inf_tail":
            k, p = c
            return k * np.exp(p * x)
        raise ValueError(f"unknown formula_id {fid!r}")

    def to_dict(self) -> dict:
        return {
            "x_lo": _enc(self.x_lo),
            "x_hi": _enc(self.x_hi),
            "formula_id": self.formula_id,
            "coefficients": [_enc(v) for v in self.coefficients],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Section":
        return cls(float(d["x_lo"]), float(d["x_hi"]), d["formula_id"],
                   tuple(float(v) for v in d["coefficients"]))


_JSON_NAMES = {"atom_prob": "atom"}


def _enc(v: float) -> str:
    return format(float(v), ".17g")


@dataclass(frozen=True)
class LimitingDistribution:
    """Piecewise-analytic density on the buffer range plus an optional atom at K."""

    kind: ClassVar[str] = "abstract"
    _param_names: ClassVar[tuple] = ()

    m_eff: float
    rate: float
    delta: float
    sections: tuple = field(repr=False)

    @property
    def capacity(self) -> float:
        return math.inf

    @property
    def atom(self) -> float:
        """Probability of a full buffer (0 for an infinite buffer)."""
        return 0.0

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, self.capacity)

    @cached_property
    def _edges(self) -> np.ndarray:
        return np.array([s.x_lo for s in self.sections])

    def pdf(self, x):
        """Density at ``x``; the atom at K is not part of the density.

        Raises :class:`DomainError` outside ``[0, K)`` (``[0, inf)`` for an
        infinite buffer).
        """
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 0) or np.any(arr >= self.capacity) or np.any(np.isnan(arr)):
            raise DomainError(f"x outside the density support [0, {self.capacity})")
        flat = np.atleast_1d(arr).ravel()
        idx = np.searchsorted(self._edges, flat, side="right") - 1
        out = np.empty_like(flat)
        for i in np.unique(idx):
            mask = idx == i
            out[mask] = self.sections[i].evaluate(flat[mask], self.rate)
        out = out.reshape(np.shape(arr))
        return float(out) if out.ndim == 0 else out

    def _quad(self, lo: float, hi: float) -> float:
        if hi <= lo:
            return 0.0
        val, _ = integrate.quad(lambda t: self.pdf(t), lo, hi, **_QUAD_OPTS)
        return val

    @cached_property
    def section_masses(self) -> tuple:
        """Quadrature mass of each section."""
        out = []
        for s in self.sections:
            hi = s.x_hi
            if math.isinf(hi):
                val, _ = integrate.quad(lambda t: self.pdf(t), s.x_lo, np.inf, **_QUAD_OPTS)
                out.append(val)
            else:
                out.append(self._quad(s.x_lo, np.nextafter(hi, -np.inf)))
        return tuple(out)

    def total_mass(self) -> float:
        """Integral of the density (adaptive quadrature) plus the atom."""
        return math.fsum(self.section_masses) + self.atom

    def cdf(self, x):
        """``P(B <= x)``, including the atom once ``x >= K``."""
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(arr)
        for j, xv in enumerate(arr.ravel()):
            if xv <= 0:
                out.flat[j] = 0.0
                continue
            if xv >= self.capacity:
                out.flat[j] = self.total_mass()
                continue
            acc = []
            for s, mass in zip(self.sections, self.section_masses):
                if xv >= s.x_hi:
                    acc.append(mass)
                else:
                    acc.append(self._quad(s.x_lo, xv))
                    break
            out.flat[j] = math.fsum(acc)
        out = out.reshape(np.shape(x)) if np.ndim(x) else out[0]
        return float(out) if np.ndim(out) == 0 else out

    def params(self) -> dict:
        base = {"lambda": self.rate, "m_eff": self.m_eff, "delta": self.delta}
        if math.isfinite(self.capacity):
            base["K"] = self.capacity
        for name in self._param_names:
            base[_JSON_NAMES.get(name, name)] = getattr(self, name)
        return base

    def to_dict(self) -> dict:
        params = {}
        for k, v in self.params().items():
            params[k] = v if isinstance(v, int) and not isinstance(v, bool) else _enc(v)
        return {"kind": self.kind, "params": params,
                "sections": [s.to_dict() for s in self.sections]}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @staticmethod
    def from_dict(d: dict) -> "LimitingDistribution":
        cls = _KINDS[d["kind"]]
        params = dict(d["params"])
        params.pop("K", None)
        kwargs = {"m_eff": float(params.pop("m_eff")),
                  "rate": float(params.pop("lambda")),
                  "delta": float(params.pop("delta"))}
        for name in cls._param_names:
            raw = params.pop(_JSON_NAMES.get(name, name))
            kwargs[name] = raw if isinstance(raw, int) else float(raw)
        if params:
            raise ValueError(f"unexpected parameters {sorted(params)}")
        kwargs["sections"] = tuple(Section.from_dict(s) for s in d["sections"])
        return cls(**kwargs)

    @staticmethod
    def from_json(text: str) -> "LimitingDistribution":
        return LimitingDistribution.from_dict(json.loads(text))


@dataclass(frozen=True)
class InfiniteBufferDist(LimitingDistribution):
    """Infinite-buffer limiting density; ``p < 0`` solves ``lam e^{pM} = lam + p``."""

    kind: ClassVar[str] = "infinite"
    _param_names: ClassVar[tuple] = ("p",)

    p: float = 0.0

    @property
    def k(self) -> float:
        return -self.p / (self.delta * math.exp(self.p * self.m_eff))


@dataclass(frozen=True)
class FiniteExactDist(LimitingDistribution):
    """Exact finite-buffer density with ``l - 1`` tail sections and a head on ``[0, M)``."""

    kind: ClassVar[str] = "finite_exact"
    _param_names: ClassVar[tuple] = ("l", "atom_prob")

    l: int = 2
    atom_prob: float = 0.0

    @property
    def capacity(self) -> float:
        return self.l * self.m_eff

    @property
    def atom(self) -> float:
        return self.atom_prob

    def tail_section(self, n: int) -> Section:
        """Section ``n`` on ``[K - (n+1) M, K - n M)``; ``n = l - 1`` is the head."""
        return self.sections[self.l - 1 - n]


@dataclass(frozen=True)
class FiniteApproxDist(LimitingDistribution):
    """Approximate finite-buffer density with an exponential body ``c e^{d x}``."""

    kind: ClassVar[str] = "finite_approx"
    _param_names: ClassVar[tuple] = ("l", "n_c", "c", "d", "atom_prob", "atom_exact",
                                     "sigma1", "sigma2")

    l: int = 3
    n_c: int = 2
    c: float = 0.0
    d: float = 0.0
    atom_prob: float = 0.0
    atom_exact: float = 0.0
    sigma1: float = 0.0
    sigma2: float = 0.0

    @property
    def capacity(self) -> float:
        return self.l * self.m_eff

    @property
    def atom(self) -> float:
        return self.atom_prob

    def head_integral(self) -> float:
        """Closed-form mass of the head ``[0, M)`` section."""
        if self.d == 0.0:
            return self.c * self.m_eff / 2.0
        return self.c * math.exp(self.d * self.m_eff) / self.d * (1.0 - self.delta)


_KINDS = {c.kind: c for c in (InfiniteBufferDist, FiniteExactDist, FiniteApproxDist)}


# --------------------------------------------------------------------------
# Constructors
# --------------------------------------------------------------------------

def _conjugate_rate(delta: float, m_eff: float, branch: Branch) -> float:
    """``(-delta - W_branch(-delta e^{-delta})) / M``."""
    return (-delta - lambert_w(branch, -delta * math.exp(-delta))) / m_eff


def infinite_pdf(eff: EffectiveParams) -> InfiniteBufferDist:
    """Limiting density for an infinite buffer.

    Raises
    ------
    DomainError
        If ``delta <= 1``: the buffer drifts upward and has no stationary
        distribution (``delta == 1`` is refused as degenerate).
    """
    delta, m = eff.delta, eff.m_eff
    if delta <= 1.0:
        raise DomainError(f"no stationary distribution for delta={delta!r} <= 1 (infinite buffer)")
    p = _conjugate_rate(delta, m, Branch.PRINCIPAL)
    k = -p / (delta * math.exp(p * m))
    sections = (
        Section(0.0, m, "inf_head", (p,)),
        Section(m, math.inf, "inf_tail", (k, p)),
    )
    return InfiniteBufferDist(m_eff=m, rate=eff.harvest_rate_eff, delta=delta,
                              sections=sections, p=p)


def _buffer_l(buf: BufferSpec, eff: EffectiveParams) -> int:
    if not buf.is_finite:
        raise DomainError("a finite buffer is required")
    buf.check_multiple(eff.m_eff)
    return buf.l


def _exact_sections(m: float, rate: float, l: int, head, tails, tail_scale: float = 1.0,
                    keep_tails: int | None = None) -> list:
    k = l * m
    keep = l - 1 if keep_tails is None else keep_tails
    secs = []
    if head is not None:
        secs.append(Section(0.0, m, "head_exact", tuple(rate * c for c in head)))
    for n in reversed(range(keep)):
        secs.append(Section(k - (n + 1) * m, k - n * m, "tail_exact",
                            tuple(rate * tail_scale * c for c in tails[n])))
    return secs


def finite_exact(eff: EffectiveParams, buf: BufferSpec, precision: str = "auto") -> FiniteExactDist:
    """Exact limiting density and full-buffer probability for ``K = l M``.

    Parameters
    ----------
    precision : {"auto", "double"}
        ``"auto"`` builds coefficients in extended precision sized to the
        cancellation of the alternating sums; ``"double"`` evaluates the
        closed forms in doubles and raises if more than 6 digits are lost.
    """
    l = _buffer_l(buf, eff)
    if l < 2:
        raise DomainError(f"exact finite solution needs l >= 2, got l={l}")
    delta, m, rate = eff.delta, eff.m_eff, eff.harvest_rate_eff
    atom, head, tails = _solve_adaptive(lambda ar: _exact_solution(ar, delta, l), precision)
    sections = tuple(_exact_sections(m, rate, l, head, tails))
    return FiniteExactDist(m_eff=m, rate=rate, delta=delta, sections=sections,
                           l=l, atom_prob=atom)


def finite_approx(eff: EffectiveParams, buf: BufferSpec, n_c: int = 2,
                  precision: str = "auto") -> FiniteApproxDist:
    """Approximate finite-buffer density with an exponential body.

    The last ``n_c`` sections below K are the exact ones rescaled to the
    approximate atom; ``[M, K - n_c M)`` is ``c e^{d x}``; ``[0, M)`` solves
    the head integral equation against that body.
    """
    l = _buffer_l(buf, eff)
    if l < 3:
        raise DomainError(f"approximation needs l >= 3, got l={l}")
    if not 2 <= n_c <= l - 1:
        raise DomainError(f"n_c must satisfy 2 <= n_c <= l - 1, got n_c={n_c}")
    delta, m, rate = eff.delta, eff.m_eff, eff.harvest_rate_eff
    unit = abs(delta - 1.0) < DELTA_ONE_TOL
    if unit:
        d_norm = 0.0
    else:
        branch = Branch.LOWER if delta <= 1.0 else Branch.PRINCIPAL
        d_norm = _conjugate_rate(delta, delta, branch)  # d / lam

    def build(ar: _Arith):
        dl = ar.num(delta)
        atom, _, tails = _exact_solution(ar, delta, l, n_tails=n_c, with_head=False)
        s1 = _sigma1(ar, dl, l)
        if unit:
            s2 = s1 * (dl / 2 + l * dl - (n_c + 1) * dl)
        else:
            dd = ar.num(d_norm)
            s2 = s1 / dd * (ar.exp(dd * (l - n_c) * dl) - dl * ar.exp(dd * dl))
        tail_mass = ar.sum(_section_masses(ar, dl, n_c - 1))
        atom_t = 1 / (1 + s2 + tail_mass)
        return float(atom_t), atom, float(s1), float(s2), tails

    atom_t, atom, s1, s2, tails = _solve_adaptive(build, precision)
    c = atom_t * rate * s1
    d = d_norm * rate
    k = l * m
    secs = [Section(0.0, m, "head_approx", (c, d))]
    if l - n_c > 1:
        secs.append(Section(m, k - n_c * m, "exp_body", (c, d)))
    secs += _exact_sections(m, rate, l, None, tails, tail_scale=atom_t / atom, keep_tails=n_c)
    return FiniteApproxDist(m_eff=m, rate=rate, delta=delta, sections=tuple(secs),
                            l=l, n_c=n_c, c=c, d=d, atom_prob=atom_t, atom_exact=atom,
                            sigma1=s1, sigma2=s2)


def approx_error(x, eff: EffectiveParams, buf: BufferSpec, n_c: int = 2) -> float:
    """Head-section error ``g_{l-1}(x) - g~_{l-1}(x)`` from the R-series formula.

    Evaluated in doubles; intended for the moderate ``l`` where the error is
    of interest.
    """
    approx = finite_approx(eff, buf, n_c)
    m, rate, delta, l = eff.m_eff, eff.harvest_rate_eff, eff.delta, approx.l
    x = float(x)
    if not 0.0 <= x <= m:
        raise DomainError(f"x must lie in [0, M], got {x!r}")
    atom, atom_t, d = approx.atom_exact, approx.atom_prob, approx.d
    r_head = r_series(1 - l, l - 2, delta)
    exact_part = atom * rate * math.exp(delta * (l - 1)) * (
        r_head - math.exp(-rate * x) * r_series(1 - l + x / m, l - 2, delta))
    bracket = r_series(-l, l - 1, delta) - math.exp(-delta) * r_head
    if d == 0.0:
        shape = rate * x
    else:
        shape = rate * math.exp(d * m) / d * math.expm1(d * x)
    return exact_part - atom_t * rate * math.exp(delta * l) * bracket * shape


def pdf_eval(dist: LimitingDistribution, x):
    """Density of ``dist`` at ``x`` (the atom is queried via ``dist.atom``)."""
    return dist.pdf(x)


def cdf_eval(dist: LimitingDistribution, x):
    """Cumulative probability of ``dist`` at ``x``."""
    return dist.cdf(x)


# --------------------------------------------------------------------------
# Validators
# --------------------------------------------------------------------------

def _breaks(dist: LimitingDistribution, lo: float, hi: float) -> list:
    pts = [s.x_lo for s in dist.sections[1:]] + [s.x_hi for s in dist.sections]
    return sorted({p for p in pts if lo < p < hi and math.isfinite(p)})


def _integrate(fn, lo, hi, dist) -> float:
    if hi <= lo:
        return 0.0
    val, _ = integrate.quad(fn, lo, hi, points=_breaks(dist, lo, hi) or None, **_QUAD_OPTS)
    return val


def integral_residual(dist: LimitingDistribution, sample_points: Sequence[float]) -> float:
    """Largest violation of the stationary integral equations.

    At every sample point the right-hand side of the balance equation is
    computed by adaptive quadrature against the exponential harvest density
    and compared with ``dist.pdf``.  Finite buffers also check the full-buffer
    balance and the unit-area condition.  Density residuals are reported in
    units of ``1 / m_eff`` so the result is scale free.
    """
    lam, m, k = dist.rate, dist.m_eff, dist.capacity
    g = dist.pdf

    def f(t):
        return lam * math.exp(-lam * t) if t >= 0 else 0.0

    worst = 0.0
    for x in sample_points:
        x = float(x)
        if x < m:
            rhs = _integrate(lambda u: f(x - u) * g(u), 0.0, x, dist)
        else:
            rhs = _integrate(lambda u: f(x - u) * g(u), 0.0, m, dist)
        upper = min(m + x, k)
        if math.isinf(k) or x < k - m:
            rhs += _integrate(lambda u: f(x - u + m) * g(u), m, m + x, dist)
        else:
            rhs += _integrate(lambda u: f(x - u + m) * g(u), m, np.nextafter(upper, 0.0), dist)
            rhs += dist.atom * f(x - k + m)
        worst = max(worst, abs(g(x) - rhs) * m)
    if math.isfinite(k):
        kk = np.nextafter(k, 0.0)
        full = (_integrate(lambda u: math.exp(-lam * (k - u)) * g(u), 0.0, m, dist)
                + _integrate(lambda u: math.exp(-lam * (k - u + m)) * g(u), m, kk, dist))
        full /= -math.expm1(-lam * m)
        worst = max(worst, abs(full - dist.atom))
    mass = _integrate(g, 0.0, np.nextafter(k, 0.0), dist) if math.isfinite(k) else (
        _integrate(g, 0.0, m, dist)
        + integrate.quad(g, m, np.inf, **_QUAD_OPTS)[0])
    worst = max(worst, abs(mass + dist.atom - 1.0))
    return worst


def asymptotic_infinite_limit_check(delta: float, l_sequence: Sequence[int],
                                    n_grid: int = 2001) -> list[float]:
    """Sup distance on ``[0, M)`` between the finite head and the infinite head.

    Uses ``M = 1``; returns one value per ``l``.
    """
    if delta <= 1.0:
        raise DomainError("the infinite-buffer limit requires delta > 1")
    eff = EffectiveParams.from_delta(delta)
    inf = infinite_pdf(eff)
    xs = np.linspace(0.0, eff.m_eff, n_grid, endpoint=False)
    ref = inf.pdf(xs)
    out = []
    for l in l_sequence:
        fin = finite_exact(eff, BufferSpec.finite(l, eff.m_eff))
        out.append(float(np.max(np.abs(fin.pdf(xs) - ref))))
    return out
