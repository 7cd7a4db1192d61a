"""Independent reference values for one-asset problems.

Closed-form perpetual put and call, European Black-Scholes prices, a
recombining binomial tree with its discrete Snell envelope, and quadrature of
discounted expectations under the lognormal law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.stats import norm

from .exceptions import UnsupportedDimension, ZeroRate
from .payoff import PayoffSpec, psi


def _one_dim(model):
    if model.dim != 1:
        raise UnsupportedDimension("this oracle is defined for a single asset only")
    return model.rate, float(model.dividends[0]), float(model.cov_matrix[0, 0])


@dataclass(frozen=True)
class CharacteristicRoots:
    """Roots of ``a/2 l (l - 1) + (r - delta) l - r = 0``."""

    plus: float
    minus: float

    def residual(self, model) -> float:
        r, q, a = _one_dim(model)
        f = lambda l: 0.5 * a * l * (l - 1) + (r - q) * l - r  # noqa: E731
        return max(abs(f(self.plus)), abs(f(self.minus)))


def characteristic_roots(model) -> CharacteristicRoots:
    r, q, a = _one_dim(model)
    b = r - q - 0.5 * a
    disc = np.sqrt(b * b + 2.0 * a * r)
    return CharacteristicRoots((-b + disc) / a, (-b - disc) / a)


def perpetual_put_closed_form(model, K: float, x):
    """Perpetual put value at ``x`` and its exercise boundary ``b*``.

    ``V(x) = K - x`` below ``b* = K l/(l - 1)`` and ``(K - b*) (x/b*)^l``
    above, with ``l`` the negative characteristic root.
    """
    r, _, _ = _one_dim(model)
    if not r > 0:
        raise ZeroRate("the perpetual put needs a positive interest rate")
    lam = characteristic_roots(model).minus
    b = K * lam / (lam - 1.0)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        cont = (K - b) * (x / b) ** lam
    return np.where(x < b, K - x, cont), float(b)


def perpetual_call_closed_form(model, K: float, x):
    """Perpetual call value and boundary; requires a positive dividend yield."""
    r, q, _ = _one_dim(model)
    if not r > 0:
        raise ZeroRate("the perpetual call needs a positive interest rate")
    if not q > 0:
        raise ValueError("the perpetual call is finite only with a positive dividend yield")
    lam = characteristic_roots(model).plus
    b = K * lam / (lam - 1.0)
    x = np.asarray(x, dtype=float)
    return np.where(x > b, x - K, (b - K) * (x / b) ** lam), float(b)


def black_scholes(model, K: float, x, T: float, kind: str = "put"):
    """European call/put price with continuous dividend yield."""
    r, q, a = _one_dim(model)
    x = np.asarray(x, dtype=float)
    if T <= 0:
        return np.maximum(x - K, 0.0) if kind == "call" else np.maximum(K - x, 0.0)
    s = np.sqrt(a * T)
    d1 = (np.log(x / K) + (r - q + 0.5 * a) * T) / s
    d2 = d1 - s
    if kind == "call":
        return x * np.exp(-q * T) * norm.cdf(d1) - K * np.exp(-r * T) * norm.cdf(d2)
    return K * np.exp(-r * T) * norm.cdf(-d2) - x * np.exp(-q * T) * norm.cdf(-d1)


# --- binomial tree -------------------------------------------------------------


@dataclass(frozen=True)
class TreeModel:
    """Recombining tree with equal log-steps ``+/- sqrt(a dt)`` and the log
    drift carried by the up-probability."""

    x0: float
    maturity: float
    steps: int
    dt: float
    log_step: float
    p_up: float
    discount: float

    def prices(self, k: int) -> np.ndarray:
        """Prices of the ``k + 1`` nodes at step ``k`` (lowest first)."""
        j = np.arange(k + 1)
        return self.x0 * np.exp((2 * j - k) * self.log_step)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt


def build_tree(model, x: float, T: float, m: int) -> TreeModel:
    r, q, a = _one_dim(model)
    if m < 1 or not T > 0:
        raise ValueError("tree needs m >= 1 and T > 0")
    dt = T / m
    u = np.sqrt(a * dt)
    p = 0.5 + 0.5 * (r - q - 0.5 * a) * dt / u
    if not 0.0 < p < 1.0:
        raise ValueError(f"up-probability {p} outside (0, 1); increase the number of steps")
    return TreeModel(float(x), float(T), int(m), dt, float(u), float(p), float(np.exp(-r * dt)))


def _snell_step(y_next, payoff_k, tree: TreeModel, exercise: bool = True):
    cont = tree.discount * (tree.p_up * y_next[1:] + (1.0 - tree.p_up) * y_next[:-1])
    if not exercise:
        return cont, np.zeros_like(cont)
    y = np.maximum(payoff_k, cont)
    return y, np.maximum(payoff_k - cont, 0.0)


def binomial_american(model, spec: PayoffSpec, x: float, T: float, m: int,
                      exercise: bool = True) -> float:
    """Root value of the tree recursion ``Y_k = max(psi, e^{-r dt} E Y_{k+1})``.

    ``exercise=False`` gives the European value on the same tree.
    """
    if m < 100:
        raise ValueError("binomial_american needs at least 100 steps")
    tree = build_tree(model, x, T, m)
    y = psi(spec, tree.prices(m))
    for k in range(m - 1, -1, -1):
        y, _ = _snell_step(y, psi(spec, tree.prices(k)), tree, exercise)
    return float(y[0])


@dataclass(eq=False)
class SnellEnvelope:
    """Node values ``Y[k, j]`` and compensator increments ``dK[k, j]`` (NaN-padded)."""

    tree: TreeModel
    values: np.ndarray
    increments: np.ndarray
    payoff: np.ndarray

    @property
    def root(self) -> float:
        return float(self.values[0, 0])


def discrete_snell(model, spec: PayoffSpec, tree: TreeModel) -> SnellEnvelope:
    """Snell envelope of the discounted payoff on ``tree`` with its Doob-Meyer
    compensator: ``dK_k = (psi - e^{-r dt} E Y_{k+1})^+``, zero where ``Y > psi``."""
    _one_dim(model)
    m = tree.steps
    values = np.full((m + 1, m + 1), np.nan)
    incr = np.full((m, m + 1), np.nan)
    pay = np.full((m + 1, m + 1), np.nan)
    y = psi(spec, tree.prices(m))
    values[m] = y
    pay[m] = y
    for k in range(m - 1, -1, -1):
        pk = psi(spec, tree.prices(k))
        y, dk = _snell_step(y, pk, tree)
        values[k, : k + 1] = y
        incr[k, : k + 1] = dk
        pay[k, : k + 1] = pk
    return SnellEnvelope(tree, values, incr, pay)


# --- lognormal quadrature ----------------------------------------------------------


def expected_value(model, func, x: float, t: float, breakpoints=()) -> float:
    """``E f(X_t)`` for one asset by adaptive quadrature over the Gaussian log-price.

    ``breakpoints`` are prices where ``func`` has kinks or jumps.
    """
    r, q, a = _one_dim(model)
    if t <= 0:
        return float(np.ravel(func(np.array([x])))[0])
    mu = np.log(x) + (r - q - 0.5 * a) * t
    s = np.sqrt(a * t)
    pts = sorted((np.log(b) - mu) / s for b in breakpoints if b > 0)
    pts = [p for p in pts if -12 < p < 12]
    g = lambda z: float(np.ravel(func(np.array([np.exp(mu + s * z)])))[0]) * norm.pdf(z)  # noqa: E731
    edges = [-12.0] + pts + [12.0]
    return float(sum(integrate.quad(g, lo, hi, limit=200, epsabs=1e-12)[0]
                     for lo, hi in zip(edges[:-1], edges[1:])))


def discounted_time_integral(model, func, x: float, t0: float = 0.0, t1: float = np.inf,
                             breakpoints=()) -> float:
    """``int_{t0}^{t1} e^{-r t} E f(X_t) dt`` by nested adaptive quadrature."""
    r = model.rate
    h = lambda t: np.exp(-r * t) * expected_value(model, func, x, t, breakpoints)  # noqa: E731
    return float(integrate.quad(h, t0, t1, limit=400, epsabs=1e-9, epsrel=1e-9)[0])
