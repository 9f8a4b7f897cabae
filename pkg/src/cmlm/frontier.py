"""Closed-form mean-variance frontier, tangency portfolio and capital market line.

With ``e`` the all-ones vector the frontier is parameterised by

    A = mu' Sigma^-1 mu,  B = mu' Sigma^-1 e,  C = e' Sigma^-1 e

and every quantity below is obtained from linear solves against the cached
Cholesky factor of Sigma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from cmlm.errors import DegenerateFrontier, NegativeSharpeMarket, TangencyUndefined
from cmlm.factor_model import MarketMoments


@dataclass(frozen=True)
class FrontierCoefficients:
    a_coef: float
    b_coef: float
    c_coef: float

    @property
    def discriminant(self) -> float:
        """AC - B^2; zero exactly when mu is proportional to e."""
        return self.a_coef * self.c_coef - self.b_coef**2

    @property
    def gmv_return(self) -> float:
        return self.b_coef / self.c_coef

    def check_nondegenerate(self) -> float:
        d = self.discriminant
        if d <= 1e-12 * max(1.0, self.a_coef * self.c_coef):
            raise DegenerateFrontier(f"AC - B^2 = {d!r}; mean vector is (nearly) constant")
        return d


@dataclass(frozen=True)
class CapitalMarketLine:
    rf: float
    mu_mkt: float
    sigma_mkt: float
    lambda_mkt: float = float("nan")

    def __post_init__(self):
        if not self.sigma_mkt > 0:
            raise NegativeSharpeMarket(f"market volatility must be positive, got {self.sigma_mkt!r}")
        lam = (self.mu_mkt - self.rf) / self.sigma_mkt
        if not lam > 0:
            raise NegativeSharpeMarket(f"market Sharpe ratio {lam!r} is not positive")
        object.__setattr__(self, "lambda_mkt", lam)

    def mu_at(self, sigma: float) -> float:
        return self.rf + self.lambda_mkt * sigma


@dataclass(frozen=True)
class FrontierWeights:
    weights: np.ndarray
    lambda_mult: float
    nu_mult: float
    target_return: float


def _solves(moments: MarketMoments):
    e = np.ones(moments.n_assets)
    return moments.solve(moments.mu), moments.solve(e)


def frontier_coefficients(moments: MarketMoments) -> FrontierCoefficients:
    inv_mu, inv_e = _solves(moments)
    return FrontierCoefficients(
        a_coef=float(moments.mu @ inv_mu),
        b_coef=float(inv_e @ moments.mu),
        c_coef=float(inv_e.sum()),
    )


def tangency_portfolio(moments: MarketMoments, rf: float) -> tuple[CapitalMarketLine, np.ndarray]:
    """Market (maximum Sharpe ratio) portfolio and the line through it.

    Requires ``rf`` strictly below the global-minimum-variance return B/C;
    otherwise the tangent from (0, rf) touches the lower branch and the
    call raises TangencyUndefined. Short positions are allowed.
    """
    co = frontier_coefficients(moments)
    a, b, c = co.a_coef, co.b_coef, co.c_coef
    denom = b - c * rf
    if denom <= 1e-12 * max(abs(b), abs(c * rf), 1e-300):
        raise TangencyUndefined(
            f"rf={rf!r} is not below the minimum-variance return {co.gmv_return!r}"
        )
    excess_quad = a - 2.0 * b * rf + c * rf * rf
    if not excess_quad > 0:
        raise NegativeSharpeMarket("mean returns equal the risk-free rate")
    mu_mkt = (a - b * rf) / denom
    sigma_mkt = math.sqrt(excess_quad) / denom
    z = moments.solve(moments.mu - rf)
    weights = z / z.sum()
    return CapitalMarketLine(rf=float(rf), mu_mkt=mu_mkt, sigma_mkt=sigma_mkt), weights


def frontier_weights(target_return: float, moments: MarketMoments) -> FrontierWeights:
    """Minimum-variance fully invested weights with mean ``target_return``.

    Solves min w'Sigma w s.t. w'mu = a, w'e = 1 through its Lagrangian;
    the multipliers satisfy 2 Sigma w + lambda mu + nu e = 0.
    """
    inv_mu, inv_e = _solves(moments)
    a_, b_, c_ = float(moments.mu @ inv_mu), float(inv_e @ moments.mu), float(inv_e.sum())
    d = FrontierCoefficients(a_, b_, c_).check_nondegenerate()
    a = float(target_return)
    w = ((c_ * a - b_) * inv_mu + (a_ - b_ * a) * inv_e) / d
    return FrontierWeights(
        weights=w,
        lambda_mult=2.0 * (b_ - a * c_) / d,
        nu_mult=2.0 * (a * b_ - a_) / d,
        target_return=a,
    )


def frontier_sigma(target_return: float, coeffs: FrontierCoefficients) -> float:
    d = coeffs.check_nondegenerate()
    a = float(target_return)
    var = (coeffs.c_coef * a * a - 2.0 * coeffs.b_coef * a + coeffs.a_coef) / d
    return math.sqrt(max(var, 0.0))
