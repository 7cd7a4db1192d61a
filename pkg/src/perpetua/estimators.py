"""Scikit-learn style wrappers: ``fit`` solves or learns, ``predict`` prices spots."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import fd_solver as fd
from . import lsmc
from .market_model import MarketModel
from .payoff import PayoffSpec


def _model(est) -> MarketModel:
    return MarketModel.from_volatility(est.rate, est.dividends, est.vols, est.correlation)


def _spots(X, d: int) -> np.ndarray:
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if d == 1 else X.reshape(1, -1)
    if X.shape[1] != d:
        raise ValueError(f"expected {d} price columns, got {X.shape[1]}")
    if np.any(X <= 0):
        raise ValueError("prices must be strictly positive")
    return X


class _Base(BaseEstimator):
    def _setup(self):
        self.model_ = _model(self)
        self.payoff_ = self.payoff if isinstance(self.payoff, PayoffSpec) else PayoffSpec.from_mapping(self.payoff)
        self.n_features_in_ = self.model_.dim
        return self.model_, self.payoff_

    def _grid(self, horizon=None):
        if self.bounds is not None:
            lo, hi = self.bounds
            return fd.LogGrid.from_prices(lo, hi, self.n_nodes or (2048 if self.model_.dim == 1 else 129))
        return fd.LogGrid.default(self.model_, self.payoff_, n=self.n_nodes, horizon=horizon)


class PerpetualAmericanPDE(_Base):
    """Perpetual American value by projected SOR on a log-price grid.

    ``fit()`` solves the stationary obstacle problem; ``predict(X)`` interpolates
    the value at rows of ``X`` (one column per asset).
    """

    def __init__(self, payoff=None, rate=0.05, dividends=(0.0,), vols=(0.2,), correlation=None,
                 n_nodes=None, bounds=None, omega="auto", far_field="auto"):
        self.payoff = payoff
        self.rate = rate
        self.dividends = dividends
        self.vols = vols
        self.correlation = correlation
        self.n_nodes = n_nodes
        self.bounds = bounds
        self.omega = omega
        self.far_field = far_field

    def fit(self, X=None, y=None):
        model, spec = self._setup()
        self.value_function_ = fd.solve_perpetual(model, spec, self._grid(), omega=self.omega,
                                                  far_field=self.far_field)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "value_function_")
        return np.asarray(self.value_function_(_spots(X, self.model_.dim))).reshape(-1)

    def exercise_region(self, X) -> np.ndarray:
        """Boolean membership of rows of ``X`` in the exercise region."""
        from .premium import ExerciseOracle

        check_is_fitted(self, "value_function_")
        return ExerciseOracle(self.value_function_).contains(_spots(X, self.model_.dim))

    @property
    def boundary_(self):
        check_is_fitted(self, "value_function_")
        return self.value_function_.boundary


class FiniteHorizonAmericanPDE(_Base):
    """Finite-maturity American value by Crank-Nicolson with PSOR."""

    def __init__(self, payoff=None, rate=0.05, dividends=(0.0,), vols=(0.2,), correlation=None,
                 maturity=1.0, n_steps=500, n_nodes=None, bounds=None, omega="auto"):
        self.payoff = payoff
        self.rate = rate
        self.dividends = dividends
        self.vols = vols
        self.correlation = correlation
        self.maturity = maturity
        self.n_steps = n_steps
        self.n_nodes = n_nodes
        self.bounds = bounds
        self.omega = omega

    def fit(self, X=None, y=None):
        model, spec = self._setup()
        self.surface_ = fd.solve_finite_horizon(model, spec, self._grid(self.maturity), self.maturity,
                                                self.n_steps, omega=self.omega)
        return self

    def predict(self, X, t: float = 0.0) -> np.ndarray:
        check_is_fitted(self, "surface_")
        return np.asarray(self.surface_.at(t, _spots(X, self.model_.dim))).reshape(-1)


class LSMCPricer(_Base):
    """Least-squares Monte Carlo pricer at a fixed spot.

    ``fit(X)`` learns the exercise policy from training paths started at the
    single row of ``X``; ``predict(X)`` resimulates under that policy from each
    row.  ``std_error_`` holds the standard errors of the last prediction.
    """

    def __init__(self, payoff=None, rate=0.05, dividends=(0.0,), vols=(0.2,), correlation=None,
                 maturity=1.0, n_paths=20_000, n_exercise_dates=50, degree=2, seed=0,
                 antithetic=False):
        self.payoff = payoff
        self.rate = rate
        self.dividends = dividends
        self.vols = vols
        self.correlation = correlation
        self.maturity = maturity
        self.n_paths = n_paths
        self.n_exercise_dates = n_exercise_dates
        self.degree = degree
        self.seed = seed
        self.antithetic = antithetic

    def _config(self):
        return lsmc.LsmcConfig(self.n_paths, self.n_exercise_dates, self.degree, self.seed,
                               self.antithetic)

    def fit(self, X, y=None):
        model, spec = self._setup()
        X = _spots(X, model.dim)
        if X.shape[0] != 1:
            raise ValueError("fit expects exactly one spot")
        cfg = self._config()
        dates = lsmc.uniform_dates(self.maturity, cfg.n_exercise_dates)
        self.policy_ = lsmc.learn_policy(model, spec, X[0], dates, cfg)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "policy_")
        X = _spots(X, self.model_.dim)
        cfg = self._config()
        values, errors = [], []
        for x in X:
            out = lsmc.apply_policy(self.model_, self.payoff_, x, self.policy_, cfg)["american"]
            values.append(float(out.mean()))
            errors.append(lsmc._pair_se(out, cfg.antithetic))
        self.std_error_ = np.asarray(errors)
        return np.asarray(values)
