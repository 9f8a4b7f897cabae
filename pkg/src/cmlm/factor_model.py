"""Five-factor loadings and the implied mean/covariance of an asset universe.

Each asset's excess return is regressed on an intercept and the five factors
(market excess, SMB, HML, RMW, CMA). The fitted loadings give

    mu    = mean(rf) + alpha + B @ mean(f)
    Sigma = B @ Cov(f) @ B.T + diag(resid_variance)
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import linalg

from cmlm.errors import (
    DimensionMismatch,
    EmptyUniverse,
    InsufficientData,
    RankDeficient,
    SingularCovariance,
    WeightsNotNormalized,
)
from cmlm.inference import PortfolioPoint

FACTOR_NAMES = ("mkt_rf", "smb", "hml", "rmw", "cma")
N_FACTORS = len(FACTOR_NAMES)
MIN_OBS = N_FACTORS + 2  # intercept + 5 slopes + 1 residual df
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class FactorObservation:
    date: dt.date
    mkt_excess: float
    smb: float
    hml: float
    rmw: float
    cma: float
    rf: float

    def __post_init__(self):
        vals = (self.mkt_excess, self.smb, self.hml, self.rmw, self.cma, self.rf)
        if not all(math.isfinite(v) for v in vals):
            raise InsufficientData(f"non-finite factor value on {self.date}")

    @property
    def factors(self) -> tuple[float, ...]:
        return (self.mkt_excess, self.smb, self.hml, self.rmw, self.cma)


class FactorSeries:
    """Dated factor observations held column-wise.

    ``dates`` are strictly increasing; ``factors`` is (n, 5) in
    ``FACTOR_NAMES`` order and ``rf`` is (n,).
    """

    def __init__(self, dates: Sequence[dt.date], factors, rf):
        dates = tuple(dates)
        factors = np.asarray(factors, dtype=float).reshape(len(dates), N_FACTORS)
        rf = np.asarray(rf, dtype=float).reshape(len(dates))
        if not (np.all(np.isfinite(factors)) and np.all(np.isfinite(rf))):
            raise InsufficientData("factor series contains non-finite values")
        for a, b in zip(dates, dates[1:]):
            if not a < b:
                raise InsufficientData(f"factor dates not strictly increasing at {b}")
        self.dates = dates
        self.factors = factors
        self.rf = rf
        self.factors.setflags(write=False)
        self.rf.setflags(write=False)

    @classmethod
    def from_observations(cls, observations: Iterable[FactorObservation]) -> "FactorSeries":
        obs = list(observations)
        return cls(
            [o.date for o in obs],
            np.array([o.factors for o in obs], dtype=float).reshape(len(obs), N_FACTORS),
            [o.rf for o in obs],
        )

    @property
    def observations(self) -> list[FactorObservation]:
        return [
            FactorObservation(d, *map(float, f), float(r))
            for d, f, r in zip(self.dates, self.factors, self.rf)
        ]

    def __len__(self) -> int:
        return len(self.dates)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FactorSeries):
            return NotImplemented
        return (
            self.dates == other.dates
            and np.array_equal(self.factors, other.factors)
            and np.array_equal(self.rf, other.rf)
        )

    def __repr__(self) -> str:
        if not self.dates:
            return "FactorSeries(n=0)"
        return f"FactorSeries(n={len(self)}, {self.dates[0]}..{self.dates[-1]})"

    def subset(self, idx) -> "FactorSeries":
        idx = np.asarray(idx, dtype=int)
        return FactorSeries([self.dates[i] for i in idx], self.factors[idx], self.rf[idx])

    @cached_property
    def index(self) -> dict[dt.date, int]:
        return {d: i for i, d in enumerate(self.dates)}


@dataclass(frozen=True)
class FactorLoadings:
    asset_id: str
    alpha: float
    betas: tuple[float, ...]
    resid_variance: float
    n_obs: int
    # standard errors of (alpha, beta_1..beta_5)
    std_errors: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.betas) != N_FACTORS:
            raise DimensionMismatch(f"expected {N_FACTORS} betas, got {len(self.betas)}")
        if not self.resid_variance >= 0:
            raise InsufficientData(f"{self.asset_id}: negative residual variance")


@dataclass(frozen=True, eq=False)
class MarketMoments:
    asset_ids: tuple[str, ...]
    mu: np.ndarray
    sigma: np.ndarray
    rf: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).copy()
        sigma = np.asarray(self.sigma, dtype=float).copy()
        p = len(self.asset_ids)
        if mu.shape != (p,) or sigma.shape != (p, p):
            raise DimensionMismatch(
                f"mu {mu.shape} / sigma {sigma.shape} do not match {p} assets"
            )
        if len(set(self.asset_ids)) != p:
            raise DimensionMismatch("asset ids are not unique")
        tol = 1e-12 * np.maximum(1.0, np.abs(sigma))
        if np.any(np.abs(sigma - sigma.T) > tol):
            raise SingularCovariance("covariance matrix is not symmetric")
        mu.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "asset_ids", tuple(self.asset_ids))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "rf", float(self.rf))

    @property
    def n_assets(self) -> int:
        return len(self.asset_ids)

    @cached_property
    def cholesky(self):
        """Cholesky factor of sigma, computed once and shared by every solve."""
        try:
            c, lower = linalg.cho_factor(self.sigma, lower=True, check_finite=True)
        except (linalg.LinAlgError, ValueError) as exc:
            raise SingularCovariance(f"covariance is not positive definite: {exc}") from None
        d = np.diag(c) ** 2
        if d.min() <= 1e-14 * max(np.abs(np.diag(self.sigma)).max(), 1e-300):
            raise SingularCovariance("covariance is numerically singular")
        return c, lower

    def solve(self, rhs) -> np.ndarray:
        return linalg.cho_solve(self.cholesky, np.asarray(rhs, dtype=float))

    def reorder(self, asset_ids: Sequence[str]) -> "MarketMoments":
        pos = {a: i for i, a in enumerate(self.asset_ids)}
        idx = np.array([pos[a] for a in asset_ids], dtype=int)
        return MarketMoments(tuple(asset_ids), self.mu[idx], self.sigma[np.ix_(idx, idx)], self.rf)


def _align(asset_returns: Mapping[dt.date, float], factors: FactorSeries):
    rows, rets = [], []
    for i, d in enumerate(factors.dates):
        r = asset_returns.get(d)
        if r is not None:
            rows.append(i)
            rets.append(r)
    return np.array(rows, dtype=int), np.array(rets, dtype=float)


def ols(X: np.ndarray, y: np.ndarray):
    """Least squares through a QR factorization with an SVD rank check.

    Returns ``(coef, resid, xtx_inv)``; raises RankDeficient when the
    smallest singular value of X falls below RANK_RTOL times the largest.
    """
    q, r = np.linalg.qr(X, mode="reduced")
    s = np.linalg.svd(r, compute_uv=False)
    if s.size == 0 or s[-1] <= RANK_RTOL * s[0]:
        raise RankDeficient("regressor matrix is rank deficient")
    coef = linalg.solve_triangular(r, q.T @ y, lower=False)
    resid = y - X @ coef
    r_inv = linalg.solve_triangular(r, np.eye(r.shape[0]), lower=False)
    return coef, resid, r_inv @ r_inv.T


def fit_loadings(
    asset_returns: Mapping[dt.date, float],
    factors: FactorSeries,
    asset_id: str = "",
) -> FactorLoadings:
    """Regress ``r_i - r_f`` on an intercept and the five factors.

    Dates are matched by exact key intersection; nothing is imputed.
    """
    rows, rets = _align(asset_returns, factors)
    n = rows.size
    if n < MIN_OBS:
        raise InsufficientData(
            f"{asset_id or 'asset'}: {n} common dates with factors, need {MIN_OBS}"
        )
    if not np.all(np.isfinite(rets)):
        raise InsufficientData(f"{asset_id or 'asset'}: non-finite returns")
    y = rets - factors.rf[rows]
    X = np.column_stack([np.ones(n), factors.factors[rows]])
    try:
        coef, resid, xtx_inv = ols(X, y)
    except RankDeficient:
        raise RankDeficient(f"{asset_id or 'asset'}: collinear factor sample") from None
    dof = n - X.shape[1]
    s2 = float(resid @ resid) / dof
    se = np.sqrt(np.maximum(np.diag(xtx_inv) * s2, 0.0))
    return FactorLoadings(
        asset_id=asset_id,
        alpha=float(coef[0]),
        betas=tuple(float(b) for b in coef[1:]),
        resid_variance=s2,
        n_obs=n,
        std_errors=tuple(float(v) for v in se),
    )


def estimate_moments(loadings: Sequence[FactorLoadings], factors: FactorSeries) -> MarketMoments:
    if not loadings:
        raise EmptyUniverse("no assets to estimate moments for")
    if len(factors) < 2:
        raise InsufficientData("need at least 2 factor observations for a covariance")
    alpha = np.array([l.alpha for l in loadings])
    B = np.array([l.betas for l in loadings], dtype=float)
    resid = np.array([l.resid_variance for l in loadings])
    f_bar = factors.factors.mean(axis=0)
    f_cov = np.cov(factors.factors, rowvar=False, ddof=1)
    rf_mean = float(factors.rf.mean())
    mu = rf_mean + alpha + B @ f_bar
    sigma = B @ f_cov @ B.T
    sigma = 0.5 * (sigma + sigma.T) + np.diag(resid)
    return MarketMoments(tuple(l.asset_id for l in loadings), mu, sigma, rf_mean)


def with_risk_free(moments: MarketMoments, asset_id: str) -> MarketMoments:
    """Append a riskless asset earning ``moments.rf`` (zero variance row/column).

    The result is only positive semi-definite; use it for evaluating
    portfolios that hold cash, never for frontier solves.
    """
    p = moments.n_assets
    mu = np.append(moments.mu, moments.rf)
    sigma = np.zeros((p + 1, p + 1))
    sigma[:p, :p] = moments.sigma
    return MarketMoments(moments.asset_ids + (asset_id,), mu, sigma, moments.rf)


def portfolio_moments(weights, moments: MarketMoments, atol: float = 1e-9) -> PortfolioPoint:
    w = np.asarray(weights, dtype=float)
    if w.shape != (moments.n_assets,):
        raise DimensionMismatch(
            f"{w.size} weights for {moments.n_assets} assets"
        )
    if not np.all(np.isfinite(w)):
        raise WeightsNotNormalized("weights must be finite")
    if abs(w.sum() - 1.0) > atol:
        raise WeightsNotNormalized(f"weights sum to {w.sum()!r}, not 1")
    mu = float(w @ moments.mu)
    var = float(w @ moments.sigma @ w)
    return PortfolioPoint(mu, math.sqrt(max(var, 0.0)), moments.rf)
