import dataclasses

import numpy as np
import pytest

from cmlm.errors import InvalidConfig
from cmlm.factor_model import fit_loadings, portfolio_moments, with_risk_free
from cmlm.inference import efficiency, implied_risk_aversion
from cmlm.ingest import CASH_ASSET, factor_window
from cmlm.synth import (
    DEMOGRAPHIC_COUNTS,
    SynthConfig,
    generate_households,
    generate_market,
    generate_vix,
    market_lines,
    true_moments,
    write_synthetic,
)

# households hold the market and cash; with five assets and no noise the
# covariance is exactly the factor covariance, which is full rank
EXACT = SynthConfig(seed=11, n_assets=5, n_households=200, noise_sd=0.0, fraction_on_cml=1.0)


def profile_households(config):
    market = generate_market(config)
    lines = market_lines(config, market)
    return market, lines, generate_households(config, lines, market.asset_ids)


class TestConfig:
    def test_defaults_valid(self):
        SynthConfig()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"planted_theta_range": (5.0, 1.0)},
            {"planted_theta_range": (0.0, 1.0)},
            {"fraction_on_cml": 1.5},
            {"noise_sd": -1.0},
            {"factor_cov": (1.0,) + (0.0,) * 24},
            {"n_months": 10},
            {"start_month": "1991-13"},
            {"noise_sd": 0.0, "n_assets": 6},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidConfig):
            SynthConfig(**kwargs)

    def test_text_round_trip(self):
        c = SynthConfig(seed=5, n_households=3, planted_theta_range=(2.0, 4.0))
        assert SynthConfig.from_text(c.to_text()) == c

    def test_text_errors(self):
        with pytest.raises(InvalidConfig):
            SynthConfig.from_text("bogus=1\n")
        with pytest.raises(InvalidConfig):
            SynthConfig.from_text("seed=abc\n")
        with pytest.raises(InvalidConfig):
            SynthConfig.from_text("no equals sign\n")

    def test_comments(self):
        assert SynthConfig.from_text("# header\nseed = 9  # trailing\n").seed == 9


class TestMarket:
    def test_zero_noise_recovery(self):
        market = generate_market(EXACT)
        for lo in market.loadings:
            fit = fit_loadings(market.returns[lo.asset_id], market.factors, lo.asset_id)
            assert fit.alpha == pytest.approx(lo.alpha, abs=1e-10)
            np.testing.assert_allclose(fit.betas, lo.betas, atol=1e-10)

    def test_deterministic(self):
        a, b = generate_market(EXACT), generate_market(EXACT)
        assert a.factors == b.factors
        assert a.returns == b.returns
        assert a.loadings == b.loadings

    def test_seeds_differ(self):
        a = generate_market(SynthConfig(seed=1))
        b = generate_market(SynthConfig(seed=2))
        assert not np.array_equal(a.factors.factors[0], b.factors.factors[0])

    def test_planted_tangency_long_only(self):
        market = generate_market(EXACT)
        lines = market_lines(EXACT, market)
        month = EXACT.position_months[-1]
        cml, w = lines[month]
        np.testing.assert_allclose(list(w.values()), market.target_weights, atol=1e-10)
        assert cml.lambda_mkt / cml.sigma_mkt == pytest.approx(market.market_theta, rel=1e-10)

    def test_vix_positive_and_deterministic(self):
        v = generate_vix(EXACT)
        assert v == generate_vix(EXACT)
        assert all(x > 0 for _, x in v)


class TestHouseholds:
    def test_on_line_round_trip(self):
        market, lines, (profiles, portfolios, planted, _) = profile_households(EXACT)
        assert len(planted) == EXACT.n_households
        month = EXACT.position_months[0]
        cml, _ = lines[month]
        mom = with_risk_free(true_moments(market, month, EXACT.window), CASH_ASSET)
        for port in portfolios:
            w = np.array([port.weights.get(a, 0.0) for a in mom.asset_ids])
            pt = portfolio_moments(w, mom)
            hh = "H" + port.account_id[1:]
            assert implied_risk_aversion(pt, cml) == pytest.approx(planted[hh], rel=1e-9)
            assert abs(efficiency(pt, cml)) <= 1e-12

    def test_off_line(self):
        config = dataclasses.replace(EXACT, fraction_on_cml=0.0, n_households=100)
        market, lines, (_, portfolios, planted, _) = profile_households(config)
        assert planted == {}
        month = config.position_months[0]
        cml, _ = lines[month]
        mom = true_moments(market, month, config.window)
        for port in portfolios:
            assert 1 <= port.n_stocks <= 10
            w = np.array([port.weights.get(a, 0.0) for a in mom.asset_ids])
            assert efficiency(portfolio_moments(w, mom), cml) != 0.0

    def test_empty(self, tmp_path):
        config = dataclasses.replace(EXACT, n_households=0)
        _, _, (profiles, portfolios, planted, positions) = profile_households(config)
        assert profiles == [] and portfolios == [] and planted == {} and positions == []
        paths = write_synthetic(config, tmp_path)
        assert paths["positions"].read_text() == "household_id,account_id,month,asset_id,market_value\n"
        assert paths["theta_true"].read_text() == "household_id,theta_true\n"

    def test_marginals(self):
        n = 10_000
        config = SynthConfig(seed=3, n_households=n)
        profiles, _, _, _ = generate_households(config, {}, ())
        for field_name, (levels, counts) in DEMOGRAPHIC_COUNTS.items():
            p = np.asarray(counts, float) / sum(counts)
            seen = np.array([sum(getattr(h, field_name) == lv for h in profiles) for lv in levels])
            sd = np.sqrt(n * p * (1 - p))
            assert np.all(np.abs(seen - n * p) <= 3 * sd + 1e-9), field_name

    def test_multiple_months_window_slides(self):
        config = SynthConfig(seed=4, n_households=20, n_months=40, n_position_months=5)
        market = generate_market(config)
        lines = market_lines(config, market)
        assert list(lines) == config.position_months
        w1 = factor_window(market.factors, config.position_months[0], config.window)
        w2 = factor_window(market.factors, config.position_months[-1], config.window)
        assert w1.dates[0] < w2.dates[0]


class TestWrite:
    def test_byte_reproducible(self, tmp_path):
        config = SynthConfig(seed=21, n_households=30)
        a = write_synthetic(config, tmp_path / "a")
        b = write_synthetic(config, tmp_path / "b")
        for key in a:
            assert a[key].read_bytes() == b[key].read_bytes(), key
        assert set(a) == {"factors", "returns", "positions", "demographics", "vix", "theta_true"}


class TestDemographicCounts:
    # [PAPER] category counts; knowledge "unknown" and zero cars are the
    # remainders of the stated account and household totals
    def test_totals(self):
        assert sum(DEMOGRAPHIC_COUNTS["knowledge"][1]) == 54_141
        assert sum(DEMOGRAPHIC_COUNTS["n_cars"][1]) == 37_108

    def test_levels_match_counts(self):
        for levels, counts in DEMOGRAPHIC_COUNTS.values():
            assert len(levels) == len(counts)
            assert min(counts) > 0
