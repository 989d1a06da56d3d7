import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize

from ehstorage import (
    BufferSpec,
    DomainError,
    EffectiveParams,
    FiniteApproxDist,
    FiniteExactDist,
    InfiniteBufferDist,
    LimitingDistribution,
    NumericalInstabilityError,
    approx_error,
    asymptotic_infinite_limit_check,
    cdf_eval,
    finite_approx,
    finite_exact,
    infinite_pdf,
    integral_residual,
    pdf_eval,
)

# (delta, l) -> (atom, g(M/2), g(3M/2)) with lam = 1, M = delta; 50-digit
# evaluation of the closed form written out term by term.
FROZEN = {
    (0.965, 4): (0.14708976005154051, 0.11971828858109544, 0.25361292392232577),
    (1.2, 4): (0.062345249826167107, 0.18759326833347514, 0.2847791787096368),
    (0.5, 3): (0.51362107778127932, 0.050297643846281671, 0.26295768217344562),
    (0.8, 3): (0.28263919187627101, 0.12696509696262804, 0.34808778622964216),
    (1.2, 20): (0.00011519854588347039, 0.14305463297804707, 0.21668984955301252),
    (0.5, 20): (0.5000000000070889, 2.4790259459390608e-11, 1.3354824096127854e-10),
}


def mp_closed_form(delta, l, dps=60):
    """Literal high-precision transcription: returns (atom, g)."""
    ctx = mpmath.mp.clone()
    ctx.dps = dps
    d = ctx.mpf(delta)
    L = l * d

    def pw(b, q):
        return ctx.mpf(1) if q == 0 else b ** q

    s = ctx.mpf(1)
    for n in range(l - 1):
        s += ctx.exp(n * d) * ctx.fsum(
            (d * ctx.exp(-d)) ** q / ctx.factorial(q) * (ctx.exp(d) * pw(q - n - 1, q) - pw(q - n, q))
            for q in range(n + 1))
    s += ctx.exp(d * (l - 1)) * ctx.fsum(
        ctx.exp(-d * q) / ctx.factorial(q)
        * (ctx.exp(d * (q + 1 - l)) * (ctx.gammainc(q + 1, d * (q + 2 - l)) - ctx.gammainc(q + 1, d * (q + 1 - l)))
           + d * pw(d * (q + 1 - l), q))
        for q in range(l - 1))
    atom = 1 / s

    def g(x):
        y = ctx.mpf(x)
        if y < d:
            return atom * ctx.exp(d * (l - 1)) * ctx.fsum(
                ctx.exp(-d * q) / ctx.factorial(q) * (pw(d * (q + 1) - L, q) - ctx.exp(-y) * pw(d * (q + 1) + y - L, q))
                for q in range(l - 1))
        n = int(ctx.floor((L - y) / d))
        return atom * ctx.exp(L - y) * (1 + ctx.fsum(
            ctx.exp(-d * q) / ctx.factorial(q - 1) * pw(d * q + y - L, q - 1) * ((y - L) / q + d - 1)
            for q in range(1, n + 1)))
    return atom, g


def bisect_p(lam, m):
    fn = lambda p: lam * math.exp(p * m) - (lam + p)
    return optimize.brentq(fn, -lam * (1 - 1e-15), -1e-12, xtol=1e-16, rtol=1e-15, maxiter=500)


def unit(delta):
    """lam = 1, M = delta."""
    return EffectiveParams(delta, 1.0)


class TestInfinite:
    def test_root_matches_bisection(self):
        eff = EffectiveParams.from_delta(1.25)
        dist = infinite_pdf(eff)
        assert isinstance(dist, InfiniteBufferDist)
        assert dist.p == pytest.approx(bisect_p(1.25, 1.0), rel=1e-12)
        assert dist.p == pytest.approx(-0.4640, abs=5e-4)
        assert dist.p < 0

    @pytest.mark.parametrize("delta", [1.01, 1.25, 1.5, 2.0, 5.0, 20.0])
    def test_root_identity(self, delta):
        dist = infinite_pdf(EffectiveParams.from_delta(delta, 3.0))
        lam, m, p = dist.rate, dist.m_eff, dist.p
        assert abs(lam * math.exp(p * m) - (lam + p)) <= 1e-12 * lam

    @pytest.mark.parametrize("delta", [1.05, 1.25, 2.0, 4.0])
    def test_unit_mass_and_pieces_agree(self, delta):
        dist = infinite_pdf(EffectiveParams.from_delta(delta))
        m = dist.m_eff
        mass = integrate.quad(dist.pdf, 0, m)[0] + integrate.quad(dist.pdf, m, np.inf)[0]
        assert mass == pytest.approx(1.0, abs=1e-9)
        assert dist.total_mass() == pytest.approx(1.0, abs=1e-9)
        left = dist.pdf(np.nextafter(m, 0.0))
        assert left == pytest.approx(dist.pdf(m), rel=1e-10)
        assert dist.pdf(m * (1 + 1e-12)) == pytest.approx(dist.pdf(m), rel=1e-10)

    def test_density_vanishes_at_zero(self):
        dist = infinite_pdf(EffectiveParams.from_delta(2.0, 0.3))
        assert pdf_eval(dist, 0.0) == 0.0

    @pytest.mark.parametrize("delta", [1.0, 0.7, 1.0 - 1e-13])
    def test_rejects_delta_at_most_one(self, delta):
        with pytest.raises(DomainError, match="no stationary distribution"):
            infinite_pdf(EffectiveParams.from_delta(delta))

    def test_cdf_at_drain(self):
        dist = infinite_pdf(EffectiveParams.from_delta(1.25))
        assert cdf_eval(dist, dist.m_eff) == pytest.approx(0.2, abs=1e-12)
        assert cdf_eval(dist, 0.0) == 0.0
        assert cdf_eval(dist, 200.0) == pytest.approx(1.0, abs=1e-9)

    def test_negative_x_outside_support(self):
        with pytest.raises(DomainError):
            pdf_eval(infinite_pdf(EffectiveParams.from_delta(2.0)), -0.1)


class TestFiniteExact:
    @pytest.mark.parametrize("key", sorted(FROZEN))
    def test_frozen_oracle_values(self, key):
        delta, l = key
        atom, g_half, g_three_half = FROZEN[key]
        eff = unit(delta)
        dist = finite_exact(eff, BufferSpec.finite(l, delta))
        assert dist.atom == pytest.approx(atom, rel=1e-12)
        assert dist.pdf(0.5 * delta) == pytest.approx(g_half, rel=1e-11)
        assert dist.pdf(1.5 * delta) == pytest.approx(g_three_half, rel=1e-11)

    @pytest.mark.parametrize("delta,l", [(0.3, 5), (1.7, 6), (0.965, 12), (1.2, 32), (2.5, 40)])
    def test_against_high_precision_transcription(self, delta, l):
        atom, g = mp_closed_form(delta, l, dps=80)
        dist = finite_exact(unit(delta), BufferSpec.finite(l, delta))
        assert dist.atom == pytest.approx(float(atom), rel=1e-12)
        xs = np.linspace(0.01, l * delta, 37, endpoint=False)
        ref = np.array([float(g(x)) for x in xs])
        np.testing.assert_allclose(dist.pdf(xs), ref, rtol=1e-11, atol=1e-300)

    def test_reference_point_mass_one(self, ref_eff):
        dist = finite_exact(ref_eff, BufferSpec.finite(4, ref_eff.m_eff))
        assert 0 < dist.atom < 1
        assert dist.total_mass() == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("delta", [0.2, 0.8, 1.0, 1.2, 3.0])
    @pytest.mark.parametrize("l", [2, 3, 5, 9])
    def test_nonnegative(self, delta, l, rng):
        dist = finite_exact(EffectiveParams.from_delta(delta), BufferSpec.finite(l, 1.0))
        xs = rng.uniform(0, l, 10_000)
        assert dist.pdf(xs).min() >= -1e-12

    @pytest.mark.parametrize("delta", [0.8, 1.2])
    def test_continuity_at_interior_boundaries(self, delta):
        l = 4
        dist = finite_exact(EffectiveParams.from_delta(delta), BufferSpec.finite(l, 1.0))
        for b in range(1, l - 1):  # boundaries M .. K - 2M
            left = dist.pdf(np.nextafter(float(b), 0.0))
            right = dist.pdf(float(b))
            assert left == pytest.approx(right, rel=1e-8)

    @pytest.mark.parametrize("delta,l", [(1.2, 4), (0.8, 3), (0.5, 7)])
    def test_jump_below_top_section(self, delta, l):
        # Mass leaving the atom lands on [K - M, K): the density jumps up by
        # pi * lam at K - M rather than being continuous there.
        eff = EffectiveParams.from_delta(delta)
        dist = finite_exact(eff, BufferSpec.finite(l, 1.0))
        x = float(l - 1)
        jump = dist.pdf(x) - dist.pdf(np.nextafter(x, 0.0))
        assert jump == pytest.approx(dist.atom * eff.harvest_rate_eff, rel=1e-9)

    def test_rejects_small_buffers(self):
        with pytest.raises(DomainError):
            finite_exact(EffectiveParams.from_delta(1.0), BufferSpec.finite(1, 1.0))
        with pytest.raises(DomainError):
            finite_exact(EffectiveParams.from_delta(1.0), BufferSpec.infinite())

    def test_atom_is_not_a_density(self):
        dist = finite_exact(EffectiveParams.from_delta(1.0), BufferSpec.finite(3, 1.0))
        with pytest.raises(DomainError):
            pdf_eval(dist, 3.0)
        assert cdf_eval(dist, 3.0) == pytest.approx(1.0, abs=1e-9)
        assert cdf_eval(dist, 0.0) == 0.0

    def test_cdf_monotone(self):
        dist = finite_exact(EffectiveParams.from_delta(0.9), BufferSpec.finite(5, 1.0))
        vals = dist.cdf(np.linspace(0, 5, 101))
        assert np.all(np.diff(vals) >= 0)

    def test_double_precision_mode_flags_cancellation(self):
        eff = EffectiveParams.from_delta(1.2)
        small = finite_exact(eff, BufferSpec.finite(3, 1.0), precision="double")
        ref = finite_exact(eff, BufferSpec.finite(3, 1.0))
        assert small.atom == pytest.approx(ref.atom, rel=1e-9)
        with pytest.raises(NumericalInstabilityError):
            finite_exact(eff, BufferSpec.finite(40, 1.0), precision="double")

    def test_matches_backward_recursion(self):
        # Above M the balance equation differentiates to
        # g'(x) = -lam g(x) + lam g(x + M); integrate each section backwards
        # from its right end and compare with the stored closed form.
        eff = EffectiveParams.from_delta(0.9)
        l, lam = 5, eff.harvest_rate_eff
        dist = finite_exact(eff, BufferSpec.finite(l, 1.0))
        for n in range(1, l - 1):
            hi = l - n
            right = dist.pdf(np.nextafter(float(hi), 0.0))
            for x in np.linspace(hi - 1 + 0.05, hi - 0.05, 5):
                integral, _ = integrate.quad(lambda t: lam * math.exp(-lam * (x - t)) * dist.pdf(t + 1.0),
                                             hi, x, epsabs=1e-14, epsrel=1e-13)
                rec = right * math.exp(-lam * (x - hi)) + integral
                assert dist.pdf(x) == pytest.approx(rec, rel=1e-9)
        top = dist.pdf(np.array([l - 0.9, l - 0.1]))
        assert top[1] / top[0] == pytest.approx(math.exp(-lam * 0.8), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 3.0), st.integers(3, 12))
def test_random_parameters_mass_and_types(delta, l):
    eff = EffectiveParams.from_delta(delta)
    buf = BufferSpec.finite(l, 1.0)
    ex, ap = finite_exact(eff, buf), finite_approx(eff, buf)
    assert isinstance(ex, FiniteExactDist) and isinstance(ap, FiniteApproxDist)
    assert ex.total_mass() == pytest.approx(1.0, abs=1e-9)
    assert ap.total_mass() == pytest.approx(1.0, abs=1e-9)
    assert 0 < ex.atom < 1 and 0 < ap.atom < 1


class TestFiniteApprox:
    def test_unit_delta_flat_body(self):
        eff = EffectiveParams.from_delta(1.0)
        dist = finite_approx(eff, BufferSpec.finite(6, 1.0))
        assert dist.d == 0.0
        body = dist.pdf(np.linspace(1.0, 4.0, 9, endpoint=False))
        np.testing.assert_allclose(body, body[0], rtol=1e-14)
        assert dist.total_mass() == pytest.approx(1.0, abs=1e-9)

    def test_near_unit_delta_uses_flat_branch(self):
        dist = finite_approx(EffectiveParams.from_delta(1.0 + 1e-13), BufferSpec.finite(5, 1.0))
        assert abs(dist.d) <= 1e-9 / dist.m_eff

    @pytest.mark.parametrize("delta,sign", [(0.5, 1), (0.9, 1), (1.1, -1), (2.0, -1)])
    def test_sign_of_d(self, delta, sign):
        dist = finite_approx(EffectiveParams.from_delta(delta), BufferSpec.finite(5, 1.0))
        assert np.sign(dist.d) == sign
        lam, m, d = dist.rate, dist.m_eff, dist.d
        assert lam * math.exp(d * m) == pytest.approx(lam + d, rel=1e-12)

    @pytest.mark.parametrize("delta", [0.5, 0.8, 0.965, 1.0, 1.2])
    @pytest.mark.parametrize("l,n_c", [(3, 2), (4, 2), (7, 2), (7, 4), (20, 2), (20, 10)])
    def test_unit_mass(self, delta, l, n_c):
        dist = finite_approx(EffectiveParams.from_delta(delta), BufferSpec.finite(l, 1.0), n_c)
        assert dist.total_mass() == pytest.approx(1.0, abs=1e-9)

    def test_tail_sections_are_rescaled_exact(self):
        eff = EffectiveParams.from_delta(0.965)
        buf = BufferSpec.finite(6, 1.0)
        ex, ap = finite_exact(eff, buf), finite_approx(eff, buf, n_c=3)
        xs = np.linspace(3.0, 6.0, 31, endpoint=False)
        np.testing.assert_allclose(ap.pdf(xs), ex.pdf(xs) * ap.atom / ex.atom, rtol=1e-13)

    def test_head_relative_error_reference_point(self):
        eff = EffectiveParams.from_delta(0.965)
        buf = BufferSpec.finite(4, 1.0)
        xs = np.linspace(1e-6, 1.0, 2001, endpoint=False)
        ex, ap = finite_exact(eff, buf).pdf(xs), finite_approx(eff, buf).pdf(xs)
        assert np.max(np.abs(ex - ap) / ex) <= 1.64e-2

    def test_preconditions(self):
        eff = EffectiveParams.from_delta(1.0)
        with pytest.raises(DomainError):
            finite_approx(eff, BufferSpec.finite(2, 1.0))
        with pytest.raises(DomainError):
            finite_approx(eff, BufferSpec.finite(4, 1.0), n_c=4)
        with pytest.raises(DomainError):
            finite_approx(eff, BufferSpec.finite(4, 1.0), n_c=1)


class TestApproxError:
    def test_zero_at_origin(self):
        for delta in (0.5, 1.0, 1.7):
            eff = EffectiveParams.from_delta(delta)
            assert approx_error(0.0, eff, BufferSpec.finite(4, 1.0)) == pytest.approx(0.0, abs=1e-15)

    def test_matches_difference(self, rng):
        for delta, l in ((0.5, 3), (0.965, 4), (1.0, 5), (1.4, 6)):
            eff = EffectiveParams.from_delta(delta)
            buf = BufferSpec.finite(l, 1.0)
            ex, ap = finite_exact(eff, buf), finite_approx(eff, buf)
            for x in rng.uniform(0, 1, 50):
                assert approx_error(x, eff, buf) == pytest.approx(ex.pdf(x) - ap.pdf(x), abs=1e-10)

    def test_midpoint_bound_l3(self):
        eff = EffectiveParams.from_delta(0.5)
        buf = BufferSpec.finite(3, 1.0)
        g = finite_exact(eff, buf).pdf(0.5)
        assert abs(approx_error(0.5, eff, buf)) / g <= 8.3e-2

    def test_outside_head(self):
        with pytest.raises(DomainError):
            approx_error(1.5, EffectiveParams.from_delta(0.5), BufferSpec.finite(3, 1.0))


class TestResiduals:
    def test_exact_l3_delta08(self):
        dist = finite_exact(EffectiveParams.from_delta(0.8), BufferSpec.finite(3, 1.0))
        assert integral_residual(dist, np.linspace(0, 3, 200, endpoint=False)) <= 1e-7

    def test_atom_perturbation_detected(self):
        dist = finite_exact(EffectiveParams.from_delta(0.8), BufferSpec.finite(3, 1.0))
        bad = FiniteExactDist(m_eff=dist.m_eff, rate=dist.rate, delta=dist.delta,
                              sections=dist.sections, l=dist.l, atom_prob=dist.atom * 1.01)
        assert integral_residual(bad, np.linspace(0, 3, 20, endpoint=False)) > 1e-3

    def test_scale_free(self):
        a = finite_exact(EffectiveParams(2e-6, 2.5e-6), BufferSpec.finite(3, 2e-6))
        pts = np.linspace(0, 6e-6, 15, endpoint=False)
        assert integral_residual(a, pts) <= 1e-7

    def test_approx_has_visible_residual(self):
        # the approximation is not an exact solution
        dist = finite_approx(EffectiveParams.from_delta(0.5), BufferSpec.finite(3, 1.0))
        assert integral_residual(dist, np.linspace(0, 3, 30, endpoint=False)) > 1e-4


class TestAsymptotics:
    def test_sup_error_decreases(self):
        errs = asymptotic_infinite_limit_check(1.2, [4, 8, 16, 32])
        assert all(b < a for a, b in zip(errs, errs[1:]))
        g_max = 1.0  # (1/M)(1 - e^{pM}) < 1/M on [0, M]
        assert errs[-1] <= 1e-3 * g_max
        # regression baseline measured at build time
        assert errs[-1] == pytest.approx(1.971e-6, rel=2e-2)

    def test_atom_vanishes(self):
        eff = EffectiveParams.from_delta(1.2)
        atoms = [finite_exact(eff, BufferSpec.finite(l, 1.0)).atom for l in (4, 8, 16, 32)]
        assert all(b < a for a, b in zip(atoms, atoms[1:]))
        assert atoms[-1] < 1e-3

    def test_requires_delta_above_one(self):
        with pytest.raises(DomainError):
            asymptotic_infinite_limit_check(0.9, [4])


class TestSerialization:
    @pytest.mark.parametrize("make", [
        lambda: infinite_pdf(EffectiveParams.from_delta(1.3, 2e-6)),
        lambda: finite_exact(EffectiveParams.from_delta(0.965, 9.65e-6), BufferSpec.finite(7, 9.65e-6)),
        lambda: finite_approx(EffectiveParams.from_delta(1.0), BufferSpec.finite(5, 1.0), 3),
    ])
    def test_json_round_trip_is_lossless(self, make):
        dist = make()
        text = dist.to_json()
        back = LimitingDistribution.from_json(text)
        assert type(back) is type(dist)
        assert back.to_json() == text
        xs = np.linspace(0, min(dist.capacity, 5 * dist.m_eff), 50, endpoint=False)
        assert np.array_equal(back.pdf(xs), dist.pdf(xs))
        assert back.atom == dist.atom

    def test_layout(self):
        d = json.loads(finite_exact(EffectiveParams.from_delta(1.2), BufferSpec.finite(3, 1.0)).to_json())
        assert set(d) == {"kind", "params", "sections"}
        assert {"l", "atom", "delta"} <= set(d["params"])
        sec = d["sections"][0]
        assert set(sec) == {"x_lo", "x_hi", "formula_id", "coefficients"}
        assert all(isinstance(c, str) for c in sec["coefficients"])
