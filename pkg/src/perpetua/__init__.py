"""Perpetual and finite-horizon American options under multidimensional Black-Scholes."""

from .exceptions import (AssumptionViolation, HorizonExplosion, NumericalError, PerpetuaError,
                         PsorDivergence, ZeroRate)
from .market_model import MarketModel, simulate_paths, validate
from .payoff import PayoffSpec, check_assumptions, phi, psi, psi_minus
from .fd_solver import LogGrid, solve_finite_horizon, solve_perpetual, extract_boundary
from .lsmc import LsmcConfig, price_finite, price_perpetual_extrapolated, tail_bound
from .premium import ExerciseOracle, estimate_premium
from .estimators import FiniteHorizonAmericanPDE, LSMCPricer, PerpetualAmericanPDE

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolation", "HorizonExplosion", "NumericalError", "PerpetuaError", "PsorDivergence",
    "ZeroRate", "MarketModel", "simulate_paths", "validate", "PayoffSpec", "check_assumptions",
    "phi", "psi", "psi_minus", "LogGrid", "solve_finite_horizon", "solve_perpetual",
    "extract_boundary", "LsmcConfig", "price_finite", "price_perpetual_extrapolated", "tail_bound",
    "ExerciseOracle", "estimate_premium", "FiniteHorizonAmericanPDE", "LSMCPricer",
    "PerpetualAmericanPDE",
]
