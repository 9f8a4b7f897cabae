"""Implied risk aversion and portfolio efficiency from the capital market line."""

from cmlm.errors import CmlmError, DataError, NumericError, UsageError
from cmlm.factor_model import (
    FactorLoadings,
    FactorObservation,
    FactorSeries,
    MarketMoments,
    estimate_moments,
    fit_loadings,
    portfolio_moments,
)
from cmlm.frontier import (
    CapitalMarketLine,
    FrontierCoefficients,
    FrontierWeights,
    frontier_coefficients,
    frontier_sigma,
    frontier_weights,
    tangency_portfolio,
)
from cmlm.inference import (
    PortfolioPoint,
    ProjectedPoint,
    RiskProfile,
    efficiency,
    implied_risk_aversion,
    iqr_filter,
    optimal_weight,
    profile_portfolio,
    project_onto_cml,
    quartiles,
)

__version__ = "0.1.0"

__all__ = [
    "CapitalMarketLine",
    "CmlmError",
    "DataError",
    "FactorLoadings",
    "FactorObservation",
    "FactorSeries",
    "FrontierCoefficients",
    "FrontierWeights",
    "MarketMoments",
    "NumericError",
    "PortfolioPoint",
    "ProjectedPoint",
    "RiskProfile",
    "UsageError",
    "efficiency",
    "estimate_moments",
    "fit_loadings",
    "frontier_coefficients",
    "frontier_sigma",
    "frontier_weights",
    "implied_risk_aversion",
    "iqr_filter",
    "optimal_weight",
    "portfolio_moments",
    "profile_portfolio",
    "project_onto_cml",
    "quartiles",
    "tangency_portfolio",
]
