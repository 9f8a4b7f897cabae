import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from oracles import nearest_on_line

from cmlm.errors import (
    EmptyInput,
    NonPositiveRiskAversion,
    NonPositiveTheta,
    ProjectionOutOfDomain,
    ZeroRisk,
)
from cmlm.frontier import CapitalMarketLine
from cmlm.inference import (
    PortfolioPoint,
    efficiency,
    implied_risk_aversion,
    iqr_filter,
    optimal_weight,
    profile_portfolio,
    project_onto_cml,
    quartiles,
)

CML = CapitalMarketLine(0.01, 0.06, 0.2)
A = PortfolioPoint(0.05, 0.15, 0.01)
C = PortfolioPoint(0.03, 0.20, 0.01)

lines = st.builds(
    CapitalMarketLine,
    rf=st.floats(-0.01, 0.05),
    mu_mkt=st.floats(0.06, 0.3),
    sigma_mkt=st.floats(0.05, 0.5),
)


class TestProjection:
    def test_example_a(self):
        q = project_onto_cml(A, CML)
        # [DERIVED] hand computation, frozen
        assert q.mu_perp == pytest.approx(0.0476471, abs=1e-6)
        assert q.sigma_perp == pytest.approx(0.1505882, abs=1e-6)
        mu_o, s_o = nearest_on_line(A.sigma_obs, A.mu_obs, CML.rf, CML.lambda_mkt)
        assert (q.mu_perp, q.sigma_perp) == (pytest.approx(mu_o, abs=1e-9), pytest.approx(s_o, abs=1e-9))

    def test_example_c(self):
        q = project_onto_cml(C, CML)
        assert q.mu_perp == pytest.approx(0.0582353, abs=1e-6)
        assert q.sigma_perp == pytest.approx(0.1929412, abs=1e-6)
        mu_o, s_o = nearest_on_line(C.sigma_obs, C.mu_obs, CML.rf, CML.lambda_mkt)
        assert q.mu_perp == pytest.approx(mu_o, abs=1e-9)

    def test_fixed_point(self):
        p = PortfolioPoint(CML.mu_at(0.13), 0.13, CML.rf)
        q = project_onto_cml(p, CML)
        assert q.mu_perp == pytest.approx(p.mu_obs, abs=1e-15)
        assert q.sigma_perp == pytest.approx(p.sigma_obs, abs=1e-15)

    def test_out_of_domain(self):
        # far below the line and to the left: the foot lands at negative risk
        with pytest.raises(ProjectionOutOfDomain):
            project_onto_cml(PortfolioPoint(-1.0, 0.01, 0.01), CML)

    def test_zero_risk(self):
        with pytest.raises(ZeroRisk):
            project_onto_cml(PortfolioPoint(0.01, 0.0, 0.01), CML)
        with pytest.raises(ZeroRisk):
            PortfolioPoint(0.01, -0.1, 0.01)

    @settings(max_examples=200, deadline=None)
    @given(lines, st.floats(-0.1, 0.4), st.floats(0.01, 0.6))
    def test_invariants(self, cml, mu, sd):
        p = PortfolioPoint(mu, sd, cml.rf)
        try:
            q = project_onto_cml(p, cml)
        except ProjectionOutOfDomain:
            return
        lam = cml.lambda_mkt
        assert abs(q.mu_perp - (cml.rf + lam * q.sigma_perp)) <= 1e-12
        assert abs((sd - q.sigma_perp) + (mu - q.mu_perp) * lam) <= 1e-12
        # idempotent
        q2 = project_onto_cml(PortfolioPoint(q.mu_perp, q.sigma_perp, cml.rf), cml)
        assert q2.mu_perp == pytest.approx(q.mu_perp, abs=1e-12)
        assert q2.sigma_perp == pytest.approx(q.sigma_perp, abs=1e-12)


class TestRiskAversion:
    def test_market_portfolio(self):
        p = PortfolioPoint(0.06, 0.2, 0.01)
        assert implied_risk_aversion(p, CML) == pytest.approx(1.25, rel=1e-12)

    def test_examples(self):
        # [DERIVED] hand computation, frozen
        assert implied_risk_aversion(A, CML) == pytest.approx(1.660156, abs=1e-5)
        assert implied_risk_aversion(C, CML) == pytest.approx(1.295732, abs=1e-5)
        assert implied_risk_aversion(C, CML) == pytest.approx((1.0625 / 0.2) / (0.1 + 4), rel=1e-12)
        # via the projection: theta = lambda / sigma_perp
        assert implied_risk_aversion(A, CML) == pytest.approx(0.25 / 0.1505882, rel=1e-6)

    def test_nonpositive_denominator(self):
        # mu_obs - rf + sigma_obs / lambda = -0.2 + 0.04 / 0.25 < 0
        with pytest.raises(NonPositiveRiskAversion):
            implied_risk_aversion(PortfolioPoint(-0.19, 0.04, 0.01), CML)


class TestOptimalWeight:
    def test_full_market(self):
        assert optimal_weight(CML.lambda_mkt / CML.sigma_mkt, CML) == pytest.approx(1.0)

    def test_example(self):
        # [DERIVED] hand computation, frozen
        assert optimal_weight(1.660156, CML) == pytest.approx(0.752941, abs=1e-5)

    @given(st.floats(0.01, 1000))
    def test_homogeneous(self, theta):
        assert optimal_weight(2 * theta, CML) == pytest.approx(optimal_weight(theta, CML) / 2, rel=1e-14)

    def test_nonpositive(self):
        with pytest.raises(NonPositiveTheta):
            optimal_weight(0.0, CML)


class TestEfficiency:
    def test_examples(self):
        # [DERIVED] hand computation, frozen
        assert efficiency(A, CML) == pytest.approx(0.0024254, abs=1e-6)
        assert efficiency(C, CML) == pytest.approx(-0.0291041, abs=1e-6)
        assert A.lambda_obs == pytest.approx(0.26667, abs=1e-5)
        assert C.lambda_obs == pytest.approx(0.1, abs=1e-12)

    def test_on_line_is_zero(self):
        e = efficiency(PortfolioPoint(CML.mu_mkt, CML.sigma_mkt, CML.rf), CML)
        assert e == 0.0 and math.copysign(1.0, e) == 1.0

    @settings(max_examples=200, deadline=None)
    @given(lines, st.floats(-0.1, 0.4), st.floats(0.01, 0.6))
    def test_sign_law_and_distance(self, cml, mu, sd):
        p = PortfolioPoint(mu, sd, cml.rf)
        try:
            e = efficiency(p, cml)
        except ProjectionOutOfDomain:
            return
        assume(abs(p.lambda_obs - cml.lambda_mkt) > 1e-12)
        assert np.sign(e) == np.sign(p.lambda_obs - cml.lambda_mkt)
        # no sampled point on the line is closer than |E|
        s = np.linspace(0, 1, 201)
        d = np.hypot(s - sd, cml.rf + cml.lambda_mkt * s - mu)
        assert abs(e) <= d.min() + 1e-15


class TestProfile:
    def test_market(self):
        prof = profile_portfolio(PortfolioPoint(0.06, 0.2, 0.01), CML)
        assert prof.theta == pytest.approx(1.25)
        assert prof.w_star == pytest.approx(1.0)
        assert prof.efficiency == pytest.approx(0.0, abs=1e-15)

    def test_example_a(self):
        prof = profile_portfolio(A, CML)
        # [DERIVED] hand computation, frozen
        assert prof.theta == pytest.approx(1.660156, abs=1e-5)
        assert prof.w_star == pytest.approx(0.752941, abs=1e-5)
        assert prof.projected.mu_perp == pytest.approx(0.0476471, abs=1e-6)
        assert prof.projected.sigma_perp == pytest.approx(0.1505882, abs=1e-6)
        assert prof.efficiency == pytest.approx(0.0024254, abs=1e-6)

    def test_round_trip_w04(self):
        w = 0.4
        p = PortfolioPoint(CML.rf + w * (CML.mu_mkt - CML.rf), w * CML.sigma_mkt, CML.rf)
        prof = profile_portfolio(p, CML)
        assert prof.theta == pytest.approx(CML.lambda_mkt / (w * CML.sigma_mkt), rel=1e-12)
        assert prof.efficiency == pytest.approx(0.0, abs=1e-15)

    @settings(max_examples=200, deadline=None)
    @given(lines, st.floats(-0.1, 0.4), st.floats(0.01, 0.6))
    def test_invariants(self, cml, mu, sd):
        try:
            prof = profile_portfolio(PortfolioPoint(mu, sd, cml.rf), cml)
        except (ProjectionOutOfDomain, NonPositiveRiskAversion):
            return
        assert prof.w_star * cml.sigma_mkt == pytest.approx(prof.projected.sigma_perp, rel=1e-12, abs=1e-15)
        assert prof.theta == pytest.approx(cml.lambda_mkt / (prof.w_star * cml.sigma_mkt), rel=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(lines, st.floats(0.01, 1000))
    def test_theta_round_trip(self, cml, theta):
        w = optimal_weight(theta, cml)
        p = PortfolioPoint(cml.rf + w * (cml.mu_mkt - cml.rf), w * cml.sigma_mkt, cml.rf)
        assert implied_risk_aversion(p, cml) == pytest.approx(theta, rel=1e-10)

    @settings(max_examples=200, deadline=None)
    @given(lines, st.floats(0.0, 0.4), st.floats(0.01, 0.6))
    def test_monotone(self, cml, mu, sd):
        p = PortfolioPoint(mu, sd, cml.rf)
        try:
            t0 = implied_risk_aversion(p, cml)
        except NonPositiveRiskAversion:
            return
        assert implied_risk_aversion(PortfolioPoint(mu, sd + 1e-6, cml.rf), cml) < t0
        assert implied_risk_aversion(PortfolioPoint(mu + 1e-6, sd, cml.rf), cml) < t0


class TestQuartiles:
    def test_examples(self):
        # [DERIVED] hand computation, frozen
        assert quartiles([1, 2, 3, 4]) == (1.75, 2.5, 3.25)
        assert quartiles([5]) == (5.0, 5.0, 5.0)

    def test_manual_rule(self):
        # position (n - 1) q, linear between neighbours
        v = [7.0, 1.0, 3.0, 10.0, 4.0]
        s = sorted(v)
        expect = []
        for q in (0.25, 0.5, 0.75):
            h = (len(s) - 1) * q
            lo = math.floor(h)
            expect.append(s[lo] + (h - lo) * (s[min(lo + 1, len(s) - 1)] - s[lo]))
        assert quartiles(v) == pytest.approx(tuple(expect), abs=0)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
    def test_reversal_and_order(self, v):
        q = quartiles(v)
        assert q == quartiles(v[::-1])
        assert q[0] <= q[1] <= q[2]

    def test_empty(self):
        with pytest.raises(EmptyInput):
            quartiles([])


class TestIqrFilter:
    def test_examples(self):
        assert iqr_filter([1, 2, 3, 4, 5]).all()
        assert iqr_filter([1, 2, 3, 4, 100], k=1.5).tolist() == [True] * 4 + [False]
        assert iqr_filter([3.0] * 6).all()

    def test_empty(self):
        with pytest.raises(EmptyInput):
            iqr_filter([])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60), st.floats(0, 3))
    def test_kept_within_fences(self, v, k):
        mask = iqr_filter(v, k)
        q1, _, q3 = quartiles(v)
        iqr = q3 - q1
        kept = np.asarray(v)[mask]
        assert np.all(kept >= q1 - k * iqr) and np.all(kept <= q3 + k * iqr)
