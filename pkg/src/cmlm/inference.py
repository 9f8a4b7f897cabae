"""Project portfolios onto the capital market line and read off risk preferences.

For a line ``mu = rf + lam * sigma`` and an observed point (mu_obs, sigma_obs)
the foot of the perpendicular in (sigma, mu) space is

    mu_perp    = (lam^2 mu_obs + lam sigma_obs + rf) / (1 + lam^2)
    sigma_perp = (lam mu_obs + sigma_obs - lam rf) / (1 + lam^2)

The implied risk aversion is the theta whose optimal market weight
``w* = lam / (theta sigma_mkt)`` reproduces sigma_perp, and efficiency is the
signed distance to the projection (positive above the line).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from cmlm.errors import (
    EmptyInput,
    NonPositiveRiskAversion,
    NonPositiveTheta,
    ProjectionOutOfDomain,
    ZeroRisk,
)

if TYPE_CHECKING:
    from cmlm.frontier import CapitalMarketLine


@dataclass(frozen=True)
class PortfolioPoint:
    mu_obs: float
    sigma_obs: float
    rf: float
    lambda_obs: float = field(init=False)

    def __post_init__(self):
        if not self.sigma_obs >= 0:
            raise ZeroRisk(f"portfolio volatility {self.sigma_obs!r} is negative or undefined")
        lam = (self.mu_obs - self.rf) / self.sigma_obs if self.sigma_obs > 0 else math.nan
        object.__setattr__(self, "lambda_obs", lam)


@dataclass(frozen=True)
class ProjectedPoint:
    mu_perp: float
    sigma_perp: float


@dataclass(frozen=True)
class RiskProfile:
    theta: float
    w_star: float
    projected: ProjectedPoint
    efficiency: float


def _require_risky(p: PortfolioPoint) -> None:
    if not p.sigma_obs > 0:
        raise ZeroRisk("portfolio has zero volatility")


def project_onto_cml(p: PortfolioPoint, cml: CapitalMarketLine) -> ProjectedPoint:
    _require_risky(p)
    lam, rf = cml.lambda_mkt, cml.rf
    norm = 1.0 + lam * lam
    sigma_perp = (lam * p.mu_obs + p.sigma_obs - lam * rf) / norm
    if not sigma_perp > 0:
        raise ProjectionOutOfDomain(
            f"projection of ({p.sigma_obs!r}, {p.mu_obs!r}) lands at non-positive risk"
        )
    mu_perp = (lam * lam * p.mu_obs + lam * p.sigma_obs + rf) / norm
    return ProjectedPoint(mu_perp=mu_perp, sigma_perp=sigma_perp)


def implied_risk_aversion(p: PortfolioPoint, cml: CapitalMarketLine) -> float:
    _require_risky(p)
    lam = cml.lambda_mkt
    lam_obs = (p.mu_obs - cml.rf) / p.sigma_obs
    denom = lam_obs + 1.0 / lam
    if not denom > 0:
        raise NonPositiveRiskAversion(
            f"observed Sharpe {lam_obs!r} puts the projection at or below zero risk"
        )
    return ((1.0 + lam * lam) / p.sigma_obs) / denom


def optimal_weight(theta: float, cml: CapitalMarketLine) -> float:
    """Fraction of wealth in the market portfolio for risk aversion ``theta``."""
    if not theta > 0:
        raise NonPositiveTheta(f"risk aversion must be positive, got {theta!r}")
    return cml.lambda_mkt / (theta * cml.sigma_mkt)


def efficiency(
    p: PortfolioPoint, cml: CapitalMarketLine, projected: ProjectedPoint | None = None
) -> float:
    if projected is None:
        projected = project_onto_cml(p, cml)
    lam_obs = (p.mu_obs - cml.rf) / p.sigma_obs
    # the projected point's Sharpe ratio is lambda_mkt by construction
    if lam_obs == cml.lambda_mkt:
        return 0.0
    dist = math.hypot(p.mu_obs - projected.mu_perp, p.sigma_obs - projected.sigma_perp)
    return dist if lam_obs > cml.lambda_mkt else -dist


def profile_portfolio(p: PortfolioPoint, cml: CapitalMarketLine) -> RiskProfile:
    projected = project_onto_cml(p, cml)
    theta = implied_risk_aversion(p, cml)
    return RiskProfile(
        theta=theta,
        w_star=optimal_weight(theta, cml),
        projected=projected,
        efficiency=efficiency(p, cml, projected),
    )


def quartiles(values: Sequence[float]) -> tuple[float, float, float]:
    """25th/50th/75th percentiles, linear interpolation at position (n-1)q."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise EmptyInput("quartiles of an empty sample")
    q = np.quantile(arr, [0.25, 0.5, 0.75], method="linear")
    return float(q[0]), float(q[1]), float(q[2])


def iqr_filter(values: Sequence[float], k: float = 1.5) -> np.ndarray:
    """Boolean mask keeping values inside [Q1 - k IQR, Q3 + k IQR]."""
    if k < 0:
        raise ValueError("k must be non-negative")
    arr = np.asarray(values, dtype=float)
    q1, _, q3 = quartiles(arr)
    spread = q3 - q1
    return (arr >= q1 - k * spread) & (arr <= q3 + k * spread)
