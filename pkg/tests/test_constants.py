"""Tail bounds and constant brackets against series and quadrature oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from parklab import (
    Bracket,
    DomainError,
    TailBound,
    constants_report,
    crude_mean_tail,
    crude_second_moment_tail,
    crude_width_formula,
    crude_xmean_tail,
    density_bracket,
    envelope_mean_tail,
    envelope_second_moment_tail,
    intercept_bracket,
    truncated_laplace,
    variance_slope_bracket,
)
from parklab.core import SegmentedGrid


# ---------------------------------------------------------------------------
# Series oracles: sum the step-bound integrals term by term until they
# vanish.  On (k, k+1) the bounds are floor = k and ceil((x-1)/2) = ceil(k/2).

def _unit_mass(lam, k, xpow):
    if xpow == 0:
        return math.exp(-lam * k) - math.exp(-lam * (k + 1))
    return ((lam * k + 1) * math.exp(-lam * k)
            - (lam * (k + 1) + 1) * math.exp(-lam * (k + 1)))


def _series_tail(lam, n, step, xpow=0, terms=800):
    return sum(step(k) * _unit_mass(lam, k, xpow) for k in range(n, n + terms))


LAM_GRID = [0.25, 1.0, 2.7]
N_GRID = [0, 1, 2, 5, 7]


class TestCrudeTails:
    @pytest.mark.parametrize("lam", LAM_GRID)
    @pytest.mark.parametrize("n", N_GRID)
    def test_mean_tail_matches_series(self, lam, n):
        t = crude_mean_tail(lam, n)
        assert t.upper_tail == pytest.approx(_series_tail(lam, n, lambda k: k), rel=1e-13)
        assert t.lower_tail == pytest.approx(
            _series_tail(lam, n, lambda k: math.ceil(k / 2)), rel=1e-13)

    @pytest.mark.parametrize("lam", LAM_GRID)
    @pytest.mark.parametrize("n", N_GRID)
    def test_xmean_tail_matches_series(self, lam, n):
        t = crude_xmean_tail(lam, n)
        assert t.upper_tail == pytest.approx(_series_tail(lam, n, lambda k: k, 1), rel=1e-12)
        assert t.lower_tail == pytest.approx(
            _series_tail(lam, n, lambda k: math.ceil(k / 2), 1), rel=1e-12)

    @pytest.mark.parametrize("lam", LAM_GRID)
    @pytest.mark.parametrize("n", N_GRID)
    def test_second_moment_tail_matches_series(self, lam, n):
        t = crude_second_moment_tail(lam, n)
        assert t.upper_tail == pytest.approx(_series_tail(lam, n, lambda k: k * k), rel=1e-12)
        assert t.lower_tail == pytest.approx(
            _series_tail(lam, n, lambda k: math.ceil(k / 2) ** 2), rel=1e-12)

    def test_closed_forms_at_zero_truncation(self):
        lam = 1.3
        q = math.exp(-lam)
        t = crude_mean_tail(lam, 0)
        assert t.upper_tail == pytest.approx(q / (1 - q), rel=1e-14)
        assert t.lower_tail == pytest.approx(q / (1 - q * q), rel=1e-14)

    def test_gap_decays_geometrically_in_rate(self):
        # at truncation 7 the gap scales like e^(-7 lam) per unit of rate
        gaps = [crude_mean_tail(lam, 7).upper_tail - crude_mean_tail(lam, 7).lower_tail
                for lam in (2.0, 3.0, 4.0)]
        for g0, g1 in zip(gaps, gaps[1:]):
            assert g1 / g0 < math.exp(-6.0)
            assert g1 / g0 > math.exp(-8.0)

    def test_gap_limit_at_vanishing_rate(self):
        lam = 1e-4
        t = crude_mean_tail(lam, 7)
        width = lam / (lam + 1) * (t.upper_tail - t.lower_tail)
        assert width == pytest.approx(0.5, abs=1e-3)

    def test_validation(self):
        with pytest.raises(DomainError):
            crude_mean_tail(-1.0, 3)
        with pytest.raises(DomainError):
            crude_mean_tail(1.0, -1)
        with pytest.raises(DomainError):
            TailBound("crude", 2.0, 1.0, 3)


class TestEnvelopeTails:
    CASES = [(1.0, 7, 5.3, 0.70, 0.81), (0.3, 5, 3.1, 0.6, 0.9), (2.5, 7, 6.6, 0.5, 1.0)]

    @pytest.mark.parametrize("lam,n,a,ci,cs", CASES)
    def test_mean_tail_against_quadrature(self, lam, n, a, ci, cs):
        t0 = envelope_mean_tail(lam, n, a, ci, cs, power=0)
        t1 = envelope_mean_tail(lam, n, a, ci, cs, power=1)
        for c, got0, got1 in [(ci, t0.lower_tail, t1.lower_tail), (cs, t0.upper_tail, t1.upper_tail)]:
            ref0, _ = quad(lambda x: lam * (a + c * (x - n)) * math.exp(-lam * x), n, np.inf)
            ref1, _ = quad(lambda x: lam**2 * x * (a + c * (x - n)) * math.exp(-lam * x), n, np.inf)
            assert got0 == pytest.approx(ref0, rel=1e-9)
            assert got1 == pytest.approx(ref1, rel=1e-9)

    @pytest.mark.parametrize("lam,n,a,ci,cs", CASES)
    def test_second_moment_tail_against_quadrature(self, lam, n, a, ci, cs):
        t = envelope_second_moment_tail(lam, n, a, ci, cs)
        ref_lo, _ = quad(lambda x: lam * (a + ci * (x - n)) ** 2 * math.exp(-lam * x), n, np.inf)
        assert t.lower_tail == pytest.approx(ref_lo, rel=1e-9)
        ref_hi = _series_tail(lam, n, lambda k: k * a) \
            + cs * (_series_tail(lam, n, lambda k: k, 1) / lam
                    - n * _series_tail(lam, n, lambda k: k))
        assert t.upper_tail == pytest.approx(ref_hi, rel=1e-9)

    def test_flat_envelope(self):
        t = envelope_mean_tail(1.0, 7, 5.0, 0.0, 0.0, power=0)
        assert t.lower_tail == t.upper_tail == pytest.approx(5.0 * math.exp(-7.0), rel=1e-14)

    def test_power_one_unit_case(self):
        # a + 0*(x-0) with unit value and rate: tail is the full first moment
        t = envelope_mean_tail(1.0, 0, 1.0, 0.0, 0.0, power=1)
        assert t.lower_tail == pytest.approx(1.0, rel=1e-14)

    def test_slope_order_enforced(self):
        with pytest.raises(DomainError):
            envelope_mean_tail(1.0, 7, 5.0, 0.9, 0.2)


class TestTruncatedLaplace:
    def _closed_grid(self, lam=1.0, n=2, m=256):
        vals = np.zeros((n, m + 1))
        vals[1] = 1.0
        return SegmentedGrid("M", vals, lam=lam)

    def test_power_zero_piecewise_constant(self):
        g = self._closed_grid()
        got = truncated_laplace(g, 1.0, 0)
        assert got == pytest.approx(math.exp(-1) - math.exp(-2), abs=1e-11)

    def test_power_one_piecewise_constant(self):
        g = self._closed_grid()
        got = truncated_laplace(g, 1.0, 1)
        assert got == pytest.approx(2 * math.exp(-1) - 3 * math.exp(-2), abs=1e-11)

    def test_zero_rate_is_plain_integral(self):
        g = SegmentedGrid("M", np.ones((3, 65)), lam=1.0)
        assert truncated_laplace(g, 0.0, 0) == pytest.approx(3.0, abs=1e-13)

    def test_power_validation(self):
        with pytest.raises(DomainError):
            truncated_laplace(self._closed_grid(), 1.0, 2)


# ---------------------------------------------------------------------------
# Bracket assembly.

def _direct_intercept(lam, c, x_weighted):
    # unfactored form of the intercept identity, for cross-checking the
    # cancellation-safe grouping used in the implementation
    elam = math.exp(lam)
    k = (2 + 2 * elam + 2 * lam * elam - lam**2) / (2 * lam * (lam + 1))
    return c * k - (elam + 1) / (lam + 1) - x_weighted / (lam + 1)


def _direct_slope(lam, c, b, p2):
    elam = math.exp(lam)
    b1 = (4 * b * c - (2 * elam / lam) * c**2
          + (2 * (1 + lam + elam) / (lam + 1)) * c + (lam * p2 - lam) / (lam + 1))
    return b1 - 2 * b * c


class TestDensityBracket:
    def test_pure_tail_endpoints_at_rate_one(self):
        c = density_bracket(1.0, None, crude_mean_tail(1.0, 0))
        q = math.exp(-1.0)
        assert c.lo == pytest.approx(0.5 * (1 + q / (1 - q * q)), abs=1e-15)
        assert c.hi == pytest.approx(0.5 * (1 + q / (1 - q)), abs=1e-15)

    def test_large_rate_asymptote(self):
        lam = 10.0
        c = density_bracket(lam, None, crude_mean_tail(lam, 0))
        target = lam * (1 + math.exp(-lam)) / (lam + 1)
        assert c.contains(target, slack=10 * math.exp(-2 * lam))

    def test_width_formula_matches_bracket(self):
        for lam in (0.7, 1.0, 1.6):
            rep = constants_report(lam, 7, 64, "crude")
            assert rep.c.width == pytest.approx(crude_width_formula(lam, 7), abs=1e-12)

    def test_grid_required_for_positive_truncation(self):
        with pytest.raises(DomainError):
            density_bracket(1.0, None, crude_mean_tail(1.0, 7))


class TestInterceptBracket:
    @pytest.mark.parametrize("lam", [0.3, 1.0, 2.0, 6.0])
    def test_pure_tail_matches_direct_formula(self, lam):
        # oracle: unfactored identity fed with series-summed tails
        c = density_bracket(lam, None, crude_mean_tail(lam, 0))
        b = intercept_bracket(lam, None, c, crude_xmean_tail(lam, 0))
        x_lo = _series_tail(lam, 0, lambda k: math.ceil(k / 2), 1)
        x_hi = _series_tail(lam, 0, lambda k: k, 1)
        assert b.lo == pytest.approx(_direct_intercept(lam, c.lo, x_hi), rel=1e-9, abs=1e-11)
        assert b.hi == pytest.approx(_direct_intercept(lam, c.hi, x_lo), rel=1e-9, abs=1e-11)

    def test_large_rate_asymptote(self):
        lam = 8.0
        c = density_bracket(lam, None, crude_mean_tail(lam, 0))
        b = intercept_bracket(lam, None, c, crude_xmean_tail(lam, 0))
        target = -0.5 + 1 / (lam + 1) + 1 / (2 * (lam + 1) ** 2)
        assert b.contains(target, slack=10 * math.exp(-lam))

    def test_stable_at_large_rate(self):
        # the e^lam-sized pieces must cancel symbolically, not in floats
        lam = 40.0
        tail = crude_mean_tail(lam, 0)
        c = density_bracket(lam, None, tail)
        b = intercept_bracket(lam, None, c, crude_xmean_tail(lam, 0), mean_tail=tail)
        target = -0.5 + 1 / (lam + 1) + 1 / (2 * (lam + 1) ** 2)
        assert abs(b.midpoint - target) < 1e-12
        assert b.width < 1e-12

    def test_report_pipeline_stable_at_large_rate(self):
        rep = constants_report(40.0, 0, 64, "crude")
        assert abs(rep.d.midpoint - 40.0 / 41.0**3) < 1e-12


class TestVarianceSlopeBracket:
    @pytest.mark.parametrize("lam", [0.5, 1.0, 3.0])
    def test_degenerate_inputs_match_direct_formula(self, lam):
        c_pt, b_pt = 0.77, -0.26
        c = Bracket(c_pt, c_pt)
        b = Bracket(b_pt, b_pt)
        tail = crude_second_moment_tail(lam, 0)
        d = variance_slope_bracket(lam, None, None, c, b, tail)
        lo_ref = _direct_slope(lam, c_pt, b_pt, tail.lower_tail)
        hi_ref = _direct_slope(lam, c_pt, b_pt, tail.upper_tail)
        assert d.lo == pytest.approx(lo_ref, rel=1e-10, abs=1e-12)
        assert d.hi == pytest.approx(hi_ref, rel=1e-10, abs=1e-12)

    def test_large_rate_asymptote(self):
        lam = 8.0
        rep = constants_report(lam, 7, 128, "crude")
        assert rep.d.contains(lam / (lam + 1) ** 3, slack=10 * math.exp(-lam))

    @settings(max_examples=30, deadline=None)
    @given(
        lam=st.floats(0.2, 5.0),
        c_mid=st.floats(0.6, 0.95),
        c_w=st.floats(0.0, 0.05),
        b_mid=st.floats(-0.45, -0.05),
        b_w=st.floats(0.0, 0.05),
    )
    def test_widening_inputs_never_narrows_output(self, lam, c_mid, c_w, b_mid, b_w):
        tail = crude_second_moment_tail(lam, 0)
        narrow = variance_slope_bracket(
            lam, None, None, Bracket(c_mid, c_mid), Bracket(b_mid, b_mid), tail)
        wide = variance_slope_bracket(
            lam, None, None,
            Bracket(c_mid - c_w, c_mid + c_w), Bracket(b_mid - b_w, b_mid + b_w), tail)
        assert wide.lo <= narrow.lo + 1e-12
        assert wide.hi >= narrow.hi - 1e-12


class TestReports:
    @pytest.mark.parametrize("lam", [0.2, 0.5, 1.0])
    def test_envelope_bracket_inside_crude(self, lam):
        crude = constants_report(lam, 7, 128, "crude")
        env = constants_report(lam, 7, 128, "envelope")
        for a, b in ((env.c, crude.c), (env.b, crude.b), (env.d, crude.d)):
            assert a.lo >= b.lo - 1e-12
            assert a.hi <= b.hi + 1e-12

    @pytest.mark.parametrize("method", ["crude", "envelope"])
    def test_longer_horizon_nests_brackets(self, method):
        # more solved mass can only sharpen both endpoints
        reps = [constants_report(1.0, n, 128, method) for n in (5, 6, 7, 10)]
        for prev, nxt in zip(reps, reps[1:]):
            for a, b in ((nxt.c, prev.c), (nxt.b, prev.b), (nxt.d, prev.d)):
                assert a.lo >= b.lo - 1e-12
                assert a.hi <= b.hi + 1e-12

    def test_constants_trend_with_rate(self):
        # density climbs toward 1 while the intercept drifts down toward -1/2
        reps = [constants_report(lam, 7, 64, "envelope") for lam in (0.2, 0.7, 1.5, 2.5)]
        c_mids = [r.c.midpoint for r in reps]
        assert all(a < b for a, b in zip(c_mids, c_mids[1:]))
        assert reps[-1].b.midpoint < reps[0].b.midpoint

    def test_small_rate_observational_variance_slope(self):
        # not asserted to converge; just recorded against the uniform-case
        # variance slope reported in the literature (~0.035672)
        rep = constants_report(0.01, 7, 128, "envelope")
        contains = rep.d.contains(0.035672)
        print(f"variance-slope bracket at rate 0.01: "
              f"[{rep.d.lo:.6f}, {rep.d.hi:.6f}], contains 0.035672: {contains}")
        assert rep.d.lo <= rep.d.hi

    def test_uniform_fallback_below_cutoff(self):
        rep = constants_report(1e-7, 7, 128, "envelope")
        assert rep.uniform_fallback
        assert rep.c.contains(0.7476, slack=2e-4)
        assert rep.b.contains(-0.2524, slack=2e-4)
        assert rep.to_dict()["uniform_fallback"] is True

    def test_report_dict_schema(self):
        rep = constants_report(1.0, 7, 64, "envelope")
        keys = set(rep.to_dict())
        assert keys == {
            "lambda", "n", "m", "tail_method", "c_lo", "c_hi", "b_lo", "b_hi",
            "d_lo", "d_hi", "envelope_inf", "envelope_sup",
            "quadrature_halving_delta", "uniform_fallback",
        }

    def test_horizon_validation(self):
        with pytest.raises(DomainError):
            constants_report(1.0, 1, 64)
        with pytest.raises(DomainError):
            constants_report(1.0, 0, 64, "envelope")
        rep = constants_report(1.0, 0, 64, "crude")
        assert rep.horizon_n == 0
