"""Seeded synthetic cohorts with planted risk aversion.

Factors, asset returns, household profiles, holdings and a VIX path are all
drawn from independent Philox streams keyed by (seed, stream id[, item]), so
any piece can be regenerated without replaying the others.

The market is planted, not just drawn: target tangency weights ``w_T`` are
drawn strictly positive and the asset alphas are solved so that, over the
estimation window ending at the last position month, ``Sigma^-1 (mu - rf) =
kappa * w_T``. Then ``kappa = lambda_mkt / sigma_mkt`` is the risk aversion
of an investor holding exactly the market, and any planted theta above it
maps to a long-only mix of the market and cash.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from cmlm.errors import CmlmError, InvalidConfig, NumericError
from cmlm.factor_model import (
    N_FACTORS,
    FactorLoadings,
    FactorSeries,
    MarketMoments,
    estimate_moments,
)
from cmlm.frontier import CapitalMarketLine, tangency_portfolio
from cmlm.inference import optimal_weight
from cmlm.ingest import (
    ACCOUNT_TYPES,
    CASH_ASSET,
    KNOWLEDGE_LEVELS,
    MARITAL_LEVELS,
    SEGMENTS,
    AccountMonthPortfolio,
    HouseholdProfile,
    PositionRecord,
    add_months,
    build_weights,
    factor_window,
    group_positions,
    month_end,
    parse_month,
    write_asset_returns,
    write_factors,
    write_household_profiles,
    write_positions,
    write_vix,
)

STREAM_FACTORS = 0
STREAM_ASSETS = 1
STREAM_HOUSEHOLDS = 2
STREAM_VIX = 3
STREAM_ASSIGN = 4

# market risk aversion as a fraction of the lowest planted theta
MARKET_THETA_FRACTION = 0.8

log = logging.getLogger(__name__)

# Category counts reported for the brokerage sample, used as sampling weights.
# Knowledge "unknown" and zero cars are the residual of the reported totals.
DEMOGRAPHIC_COUNTS: dict[str, tuple[Sequence, Sequence[int]]] = {
    "net_worth_band": ((1, 2, 3, 4, 5, 6), (23817, 2158, 1237, 1442, 4752, 3702)),
    "income_band": ((1, 2, 3, 4, 5), (23395, 3945, 2798, 3085, 3885)),
    "knowledge": (KNOWLEDGE_LEVELS, (3103, 11188, 7373, 2087, 30390)),
    "age_band": ((1, 2, 3, 4, 5, 6, 7), (52, 1843, 8822, 10289, 6746, 5521, 3835)),
    "n_children": ((0, 1, 2, 3, 4, 5, 6), (26154, 6236, 3525, 966, 208, 17, 2)),
    "marital": (MARITAL_LEVELS, (23834, 6165, 1146, 1792, 4171)),
    "residence_years": (
        tuple(range(16)),
        (1715, 3512, 3272, 2816, 2423, 2470, 2095, 2100, 1909, 1688, 1203, 984, 868, 633, 766, 8654),
    ),
    "n_cars": ((0, 1, 2, 3), (18199, 10778, 5748, 2383)),
    "n_credit_cards": ((0, 1, 2, 3, 4, 5, 6), (1193, 3006, 6240, 11693, 12983, 1958, 35)),
    "account_type": (ACCOUNT_TYPES, (12618, 18734, 478, 5462, 16849)),
    "segment": (SEGMENTS, (6450, 10325, 37366)),
}


def _default_factor_cov() -> tuple[float, ...]:
    sd = np.array([0.045, 0.03, 0.03, 0.02, 0.02])
    corr = np.eye(5)
    corr[0, 1] = corr[1, 0] = 0.2
    corr[0, 2] = corr[2, 0] = -0.2
    corr[2, 4] = corr[4, 2] = 0.4
    return tuple(float(v) for v in (np.outer(sd, sd) * corr).ravel())


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_assets: int = 5
    n_households: int = 100
    n_months: int = 36
    factor_mean: tuple[float, ...] = (0.006, 0.002, 0.003, 0.003, 0.002)
    factor_cov: tuple[float, ...] = dataclasses.field(default_factory=_default_factor_cov)
    rf_level: float = 0.003
    noise_sd: float = 0.02
    planted_theta_range: tuple[float, float] = (10.0, 100.0)
    fraction_on_cml: float = 0.5
    window: int = 36
    n_position_months: int = 1
    start_month: str = "1991-01"

    def __post_init__(self):
        try:
            parse_month(self.start_month)
        except CmlmError as exc:
            raise InvalidConfig(str(exc)) from None
        if self.seed < 0 or self.seed >= 2**64:
            raise InvalidConfig("seed must be a 64-bit unsigned integer")
        if self.n_assets < 1 or self.n_households < 0 or self.n_months < 1:
            raise InvalidConfig("n_assets >= 1, n_households >= 0, n_months >= 1 required")
        if len(self.factor_mean) != N_FACTORS or len(self.factor_cov) != N_FACTORS**2:
            raise InvalidConfig("factor_mean needs 5 values and factor_cov 25")
        cov = self.factor_cov_matrix
        if not np.allclose(cov, cov.T) or np.linalg.eigvalsh(cov).min() <= 0:
            raise InvalidConfig("factor_cov must be symmetric positive definite")
        if not (self.noise_sd >= 0 and math.isfinite(self.noise_sd)):
            raise InvalidConfig("noise_sd must be >= 0")
        lo, hi = self.planted_theta_range
        if not 0 < lo <= hi:
            raise InvalidConfig("planted_theta_range needs 0 < lo <= hi")
        if not 0 <= self.fraction_on_cml <= 1:
            raise InvalidConfig("fraction_on_cml must lie in [0, 1]")
        if self.window < 7:
            raise InvalidConfig("window must be at least 7 periods")
        if self.n_position_months < 1:
            raise InvalidConfig("n_position_months must be >= 1")
        if self.n_months - self.n_position_months + 1 < self.window:
            raise InvalidConfig(
                "n_months too short: every position month needs a full estimation window"
            )
        if self.noise_sd == 0 and self.n_assets > N_FACTORS:
            raise InvalidConfig(
                "noise_sd=0 with more than 5 assets gives a singular covariance"
            )

    @property
    def factor_cov_matrix(self) -> np.ndarray:
        return np.array(self.factor_cov, dtype=float).reshape(N_FACTORS, N_FACTORS)

    @property
    def history_months(self) -> list[str]:
        return [add_months(self.start_month, i) for i in range(self.n_months)]

    @property
    def position_months(self) -> list[str]:
        first = self.n_months - self.n_position_months + 1
        return [add_months(self.start_month, first + j) for j in range(self.n_position_months)]

    @classmethod
    def from_text(cls, text: str) -> "SynthConfig":
        """Parse flat ``key=value`` lines; vectors are comma separated."""
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs: dict[str, object] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidConfig(f"line {lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in fields:
                raise InvalidConfig(f"line {lineno}: unknown key {key!r}")
            try:
                if key in ("factor_mean", "factor_cov", "planted_theta_range"):
                    kwargs[key] = tuple(float(v) for v in value.split(","))
                elif key == "start_month":
                    kwargs[key] = value
                elif key in ("rf_level", "noise_sd", "fraction_on_cml"):
                    kwargs[key] = float(value)
                else:
                    kwargs[key] = int(value)
            except ValueError:
                raise InvalidConfig(f"line {lineno}: bad value for {key}: {value!r}") from None
        if "planted_theta_range" in kwargs and len(kwargs["planted_theta_range"]) != 2:
            raise InvalidConfig("planted_theta_range needs two values lo,hi")
        try:
            return cls(**kwargs)
        except CmlmError:
            raise
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(str(exc)) from None

    @classmethod
    def from_file(cls, path) -> "SynthConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise InvalidConfig(f"cannot read config {path}: {exc.strerror or exc}") from None
        return cls.from_text(text)

    def to_text(self) -> str:
        out = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(float(x)) for x in v)
            out.append(f"{f.name}={v}")
        return "\n".join(out) + "\n"


@dataclass(frozen=True)
class SyntheticMarket:
    factors: FactorSeries
    loadings: tuple[FactorLoadings, ...]
    returns: dict[str, dict]
    target_weights: np.ndarray
    market_theta: float

    @property
    def asset_ids(self) -> tuple[str, ...]:
        return tuple(l.asset_id for l in self.loadings)


def _rng(config: SynthConfig, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(config.seed, spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def generate_market(config: SynthConfig) -> SyntheticMarket:
    months = config.history_months
    dates = [month_end(m) for m in months]
    n, p = config.n_months, config.n_assets

    frng = _rng(config, STREAM_FACTORS)
    f = frng.multivariate_normal(np.array(config.factor_mean), config.factor_cov_matrix, size=n)
    rf = np.abs(config.rf_level * (1.0 + 0.1 * frng.standard_normal(n)))
    factors = FactorSeries(dates, f, rf)

    arng = _rng(config, STREAM_ASSETS)
    B = np.column_stack(
        [arng.uniform(0.6, 1.4, p)] + [arng.normal(0.0, 0.4, p) for _ in range(N_FACTORS - 1)]
    )
    w_target = arng.dirichlet(np.full(p, 20.0))
    kappa = MARKET_THETA_FRACTION * config.planted_theta_range[0]

    # plant alpha against the window that precedes the last position month
    win = factor_window(factors, config.position_months[-1], config.window)
    zero = [FactorLoadings(f"S{i + 1:03d}", 0.0, tuple(B[i]), config.noise_sd**2, n) for i in range(p)]
    base = estimate_moments(zero, win)
    alpha = kappa * (base.sigma @ w_target) - (base.mu - base.rf)

    loadings = tuple(
        FactorLoadings(zero[i].asset_id, float(alpha[i]), zero[i].betas, config.noise_sd**2, n)
        for i in range(p)
    )
    eps = arng.normal(0.0, 1.0, size=(n, p)) * config.noise_sd
    rets = rf[:, None] + alpha[None, :] + f @ B.T + eps
    returns = {
        l.asset_id: {d: float(rets[t, i]) for t, d in enumerate(dates)}
        for i, l in enumerate(loadings)
    }
    return SyntheticMarket(factors, loadings, returns, w_target, kappa)


def true_moments(market: SyntheticMarket, as_of: str, window: int) -> MarketMoments:
    """Population moments of the planted model over the window before ``as_of``."""
    return estimate_moments(list(market.loadings), factor_window(market.factors, as_of, window))


def market_lines(
    config: SynthConfig, market: SyntheticMarket
) -> dict[str, tuple[CapitalMarketLine, dict[str, float]]]:
    """True capital market line and tangency weights for every position month."""
    out = {}
    for month in config.position_months:
        mom = true_moments(market, month, config.window)
        try:
            cml, w = tangency_portfolio(mom, mom.rf)
        except NumericError:
            out[month] = (None, {})
            continue
        out[month] = (cml, dict(zip(mom.asset_ids, map(float, w))))
    return out


def _categorical(rng: np.random.Generator, levels, counts):
    probs = np.asarray(counts, dtype=float)
    return levels[int(rng.choice(len(levels), p=probs / probs.sum()))]


def _profile(rng: np.random.Generator, household_id: str) -> HouseholdProfile:
    values = {name: _categorical(rng, *spec) for name, spec in DEMOGRAPHIC_COUNTS.items()}
    return HouseholdProfile(household_id=household_id, **values)


def generate_households(
    config: SynthConfig,
    markets: Mapping[str, tuple[CapitalMarketLine, Mapping[str, float]]],
    asset_ids: Sequence[str] | None = None,
) -> tuple[list[HouseholdProfile], list[AccountMonthPortfolio], dict[str, float], list[PositionRecord]]:
    """Profiles, value-weighted holdings, planted theta and raw positions.

    ``markets`` maps each position month to its capital market line and the
    tangency weights. On-line households hold ``w*`` of the market and the
    rest in cash; the others hold Dirichlet weights on 1-10 random assets.
    """
    if asset_ids is None:
        first = next(iter(markets.values()), None)
        asset_ids = tuple(first[1]) if first else ()
    asset_ids = tuple(asset_ids)
    n_h = config.n_households
    n_on = int(round(config.fraction_on_cml * n_h))
    on_line = set(_rng(config, STREAM_ASSIGN).permutation(n_h)[:n_on].tolist()) if n_h else set()
    lo, hi = config.planted_theta_range

    profiles, positions, planted = [], [], {}
    fallbacks = 0
    for h in range(n_h):
        rng = _rng(config, STREAM_HOUSEHOLDS, h)
        hh, acct = f"H{h + 1:05d}", f"A{h + 1:05d}"
        profiles.append(_profile(rng, hh))
        theta = float(rng.uniform(lo, hi)) if h in on_line else None
        if theta is not None:
            planted[hh] = theta
        for month, (cml, weights) in markets.items():
            wealth = float(np.exp(rng.normal(10.0, 1.0)))
            held = None
            if theta is not None and cml is not None:
                w_star = optimal_weight(theta, cml)
                # the planted market is long-only in the last position month;
                # earlier windows may need shorting or leverage to sit on the line
                if 0 < w_star <= 1 and min(weights.values()) >= 0:
                    held = {a: wealth * w_star * w for a, w in weights.items() if w > 0}
                    cash = wealth * (1.0 - w_star)
                    if cash > 0:
                        held[CASH_ASSET] = cash
                else:
                    fallbacks += 1
            elif theta is not None:
                fallbacks += 1
            if held is None:
                k = int(rng.integers(1, min(10, len(asset_ids)) + 1))
                chosen = sorted(rng.choice(len(asset_ids), size=k, replace=False).tolist())
                w = rng.dirichlet(np.ones(k))
                held = {asset_ids[i]: wealth * float(x) for i, x in zip(chosen, w)}
            positions.extend(
                PositionRecord(hh, acct, month, a, float(v)) for a, v in held.items()
            )
    if fallbacks:
        log.warning("%d on-line account-months not long-only representable; held off-line", fallbacks)
    portfolios = [build_weights(ps) for ps in group_positions(positions).values()]
    return profiles, portfolios, planted, positions


def generate_vix(config: SynthConfig) -> list:
    months = sorted(set(config.history_months) | set(config.position_months))
    rng = _rng(config, STREAM_VIX)
    x, out = 0.0, []
    for m in months:
        x = 0.8 * x + 0.15 * rng.standard_normal()
        out.append((month_end(m), float(20.0 * math.exp(x))))
    return out


def write_synthetic(config: SynthConfig, out_dir) -> dict[str, Path]:
    """Write a complete synthetic dataset in the ingest CSV schemas."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    market = generate_market(config)
    markets = market_lines(config, market) if config.n_households else {}
    profiles, _, planted, positions = generate_households(config, markets, market.asset_ids)
    paths = {
        "factors": out / "factors.csv",
        "returns": out / "returns.csv",
        "positions": out / "positions.csv",
        "demographics": out / "demographics.csv",
        "vix": out / "vix.csv",
        "theta_true": out / "theta_true.csv",
    }
    write_factors(paths["factors"], market.factors)
    write_asset_returns(paths["returns"], market.returns)
    write_positions(paths["positions"], positions)
    write_household_profiles(paths["demographics"], profiles)
    write_vix(paths["vix"], generate_vix(config))
    with paths["theta_true"].open("w", encoding="utf-8", newline="") as fh:
        fh.write("household_id,theta_true\n")
        for hh, th in sorted(planted.items()):
            fh.write(f"{hh},{th!r}\n")
    return paths
