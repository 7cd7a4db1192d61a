"""Least-squares Monte Carlo for Bermudan approximations of American prices.

The exercise policy is learned by regressing discounted realized cash flows on
polynomials of a few payoff-relevant summaries of the state, using in-the-money
paths only.  Prices come from an independent resimulation under the learned
policy, so they are statistical lower bounds.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .exceptions import (AssumptionViolation, HorizonExplosion, RegressionSingular,
                         TooFewPaths, ZeroRate)
from .market_model import _as_state, iterate_states
from .payoff import PayoffSpec, check_assumptions, psi, psi_minus, psi_minus_bound

TRAIN_STREAM = 0
PRICE_STREAM = 1
TAIL_STREAM = 2


@dataclass(frozen=True)
class LsmcConfig:
    n_paths: int = 20_000
    n_exercise_dates: int = 50
    degree: int = 2
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if self.n_paths < 1000:
            raise TooFewPaths(f"n_paths must be at least 1000, got {self.n_paths}")
        if self.degree not in (1, 2, 3):
            raise ValueError("basis degree must be 1, 2 or 3")
        if self.n_exercise_dates < 1:
            raise ValueError("n_exercise_dates must be positive")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic sampling needs an even number of paths")

    @classmethod
    def from_mapping(cls, cfg) -> "LsmcConfig":
        return cls(**dict(cfg))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PriceEstimate:
    value: float
    std_error: float
    T: float
    is_lower_bound: bool = True
    tail_bound: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def error_bar(self) -> float:
        """``3 SE`` plus the truncation bound when one applies."""
        return 3.0 * self.std_error + (self.tail_bound or 0.0)

    def record(self, spec: PayoffSpec, model, x, seed: int) -> dict:
        """JSON-ready summary."""
        return {"family": spec.family, "params": {"payoff": spec.to_dict(), "model": model.to_dict()},
                "x": np.atleast_1d(np.asarray(x, dtype=float)).tolist(), "T": self.T,
                "value": self.value, "std_error": self.std_error, "tail_bound": self.tail_bound,
                "seed": int(seed)}


@dataclass(frozen=True)
class TailBound:
    """Upper bound on ``V - V_T`` at one spot."""

    value: float
    std_error: float
    closed_form: bool

    def __float__(self) -> float:
        return self.value

    @property
    def upper(self) -> float:
        return self.value + 3.0 * self.std_error


# --- regression basis ------------------------------------------------------------


def summaries(spec: PayoffSpec, x: np.ndarray) -> np.ndarray:
    """Scalar summaries of ``x`` (shape ``(n, d)``), scaled by the strike."""
    s = spec.total_strike
    if x.shape[1] == 1:
        return x / s
    f = spec.family
    if f == "min_put":
        cols = [x.min(axis=1), x.mean(axis=1)]
    elif f in ("index_call", "index_put"):
        cols = [x @ spec.weights, x.max(axis=1)]
    elif f == "multi_strike":
        cols = [(x - spec.strikes).max(axis=1) + s, x.mean(axis=1)]
    else:
        cols = [x.max(axis=1), x.mean(axis=1)]
    return np.column_stack(cols) / s


def basis(spec: PayoffSpec, x: np.ndarray, degree: int) -> np.ndarray:
    """All monomials of total degree ``<= degree`` in the summaries."""
    z = summaries(spec, x)
    cols = [np.ones(z.shape[0])]
    for p in range(1, degree + 1):
        for combo in combinations_with_replacement(range(z.shape[1]), p):
            cols.append(np.prod(z[:, combo], axis=1))
    return np.column_stack(cols)


def _fit(a: np.ndarray, y: np.ndarray) -> np.ndarray:
    coef, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
    if rank < a.shape[1]:
        raise RegressionSingular(f"regression basis is rank deficient ({rank} < {a.shape[1]})")
    return coef


# --- exercise dates ----------------------------------------------------------------


def uniform_dates(T: float, n: int) -> np.ndarray:
    return np.linspace(0.0, T, n + 1)


def nested_dates(T: float, spacing: float, dense_until: float) -> np.ndarray:
    """Dates ``0, h, 2h, ...`` up to ``dense_until``, then the spacing doubles
    each time the horizon doubles.  Truncations of one schedule are nested, so
    the Bermudan price is monotone in ``T``."""
    pts = [np.arange(0.0, min(T, dense_until) + 0.5 * spacing, spacing)]
    lo, h = dense_until, 2.0 * spacing
    while lo < T - 1e-12:
        hi = min(2.0 * lo, T)
        pts.append(np.arange(lo + h, hi + 0.5 * h, h))
        lo, h = 2.0 * lo, 2.0 * h
    dates = np.unique(np.concatenate(pts))
    return dates[dates <= T + 1e-12]


# --- pricing -------------------------------------------------------------------------


@dataclass
class Policy:
    """Regression coefficients per exercise date (``None`` where no regression ran)."""

    dates: np.ndarray
    coefs: list
    continuation0: float
    degree: int


def _disc(r, t):
    return np.exp(-r * t)


def learn_policy(model, spec: PayoffSpec, x, dates: np.ndarray, cfg: LsmcConfig) -> Policy:
    """Backward induction on training paths (stream 0)."""
    x0 = _as_state(model, x).reshape(-1)
    n = cfg.n_paths
    states = np.empty((dates.size, n, model.dim))
    for k, (_, s) in enumerate(iterate_states(model, x0, dates, n, cfg.seed, TRAIN_STREAM,
                                              cfg.antithetic)):
        states[k] = s
    r = model.rate
    cash = psi(spec, states[-1])
    coefs: list = [None] * dates.size
    n_basis = basis(spec, states[-1][:1], cfg.degree).shape[1]
    for k in range(dates.size - 2, 0, -1):
        cash *= _disc(r, dates[k + 1] - dates[k])
        ex = psi(spec, states[k])
        itm = ex > 0
        if itm.sum() < max(2 * n_basis, 20):
            continue
        a = basis(spec, states[k][itm], cfg.degree)
        coef = _fit(a, cash[itm])
        coefs[k] = coef
        stop = np.zeros(n, dtype=bool)
        stop[itm] = ex[itm] >= a @ coef
        cash[stop] = ex[stop]
    cont0 = float(np.mean(cash) * _disc(r, dates[1] - dates[0])) if dates.size > 1 else 0.0
    return Policy(dates, coefs, cont0, cfg.degree)


def _pair_se(v: np.ndarray, antithetic: bool) -> float:
    if antithetic:
        h = v.size // 2
        v = 0.5 * (v[:h] + v[h:])
    return float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0


def apply_policy(model, spec: PayoffSpec, x, policy: Policy, cfg: LsmcConfig,
                 stream_id: int = PRICE_STREAM) -> dict:
    """Resimulate under ``policy``; returns per-path discounted American and
    European payoffs."""
    x0 = _as_state(model, x).reshape(-1)
    n, r, dates = cfg.n_paths, model.rate, policy.dates
    amer = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    last = dates.size - 1
    euro = np.zeros(n)
    for k, (t, s) in enumerate(iterate_states(model, x0, dates, n, cfg.seed, stream_id,
                                              cfg.antithetic)):
        if k == 0:
            continue
        ex = psi(spec, s)
        if k == last:
            stop = alive
            euro = _disc(r, t) * ex
        elif policy.coefs[k] is None:
            continue
        else:
            cand = alive & (ex > 0)
            stop = np.zeros(n, dtype=bool)
            if cand.any():
                stop[cand] = ex[cand] >= basis(spec, s[cand], policy.degree) @ policy.coefs[k]
        amer[stop] = _disc(r, t) * ex[stop]
        alive &= ~stop
    return {"american": amer, "european": euro}


def _price_on_dates(model, spec, x, dates, cfg) -> PriceEstimate:
    T = float(dates[-1])
    x0 = _as_state(model, x).reshape(-1)
    policy = learn_policy(model, spec, x0, dates, cfg)
    out = apply_policy(model, spec, x0, policy, cfg)
    amer, euro = out["american"], out["european"]
    p0 = float(psi(spec, x0[None, :])[0])
    details = {"european": float(np.mean(euro)), "european_se": _pair_se(euro, cfg.antithetic),
               "premium_se": _pair_se(amer - euro, cfg.antithetic),
               "n_dates": int(dates.size - 1), "continuation0": policy.continuation0}
    if p0 > 0 and p0 >= policy.continuation0:
        details["premium_se"] = 0.0
        return PriceEstimate(p0, 0.0, T, True, None, {**details, "exercise_at_zero": True})
    return PriceEstimate(float(np.mean(amer)), _pair_se(amer, cfg.antithetic), T, True, None, details)


def price_finite(model, spec: PayoffSpec, x, T: float, cfg: LsmcConfig) -> PriceEstimate:
    """Bermudan lower-bound estimate of ``V_T(0, x)`` on equally spaced dates."""
    if not T > 0:
        raise ValueError("T must be positive")
    rep = check_assumptions(spec, model)
    if not rep.a1:
        raise AssumptionViolation("; ".join(rep.reasons))
    return _price_on_dates(model, spec, x, uniform_dates(T, cfg.n_exercise_dates), cfg)


# --- tail bound ----------------------------------------------------------------------------


def _require_a2(spec, model):
    rep = check_assumptions(spec, model)
    if model.rate <= 0:
        raise ZeroRate("discounting is required: r must be positive")
    if not (rep.a1 and rep.a2a and rep.a2b):
        raise AssumptionViolation("; ".join(r for r in rep.reasons if r.startswith(("A1", "A2"))))
    return rep


def _closed_form_tail(model, spec, x0, T):
    K = spec.strike
    if spec.family == "put":
        return 2.0 * np.e * K * np.exp(-model.rate * T)
    q = float(model.dividends[0])
    return 2.0 * np.e * max(float(x0[0]), K) * np.exp(-q * T)


def tail_bounds(model, spec: PayoffSpec, x, horizons, cfg: LsmcConfig,
                dt_tail: float = 0.05, cutoff: float = 1e-12) -> list[TailBound]:
    """``e (E e^{-rT} psi(X_T) + E int_T^inf e^{-rt} Psi^-(X_t) dt)`` for each ``T``.

    One-asset puts and calls use closed-form bounds.  Other families share a
    single simulation: the integral is accumulated by the trapezoidal rule on
    step ``dt_tail`` (stretched by ``r t / 2`` once that exceeds one, since the
    integrand decays on the scale ``1/r``) and truncated once
    ``e^{-rt} (c0 + c1 |E X_t|)`` drops below ``cutoff``.
    """
    _require_a2(spec, model)
    hs = np.asarray(horizons, dtype=float).ravel()
    if np.any(hs <= 0):
        raise ValueError("horizons must be positive")
    x0 = _as_state(model, x).reshape(-1)
    if spec.family == "zero":
        return [TailBound(0.0, 0.0, True) for _ in hs]
    if spec.family in ("put", "call"):
        return [TailBound(float(_closed_form_tail(model, spec, x0, T)), 0.0, True) for T in hs]

    r = model.rate
    c0, c1 = psi_minus_bound(spec, model)

    def running(t):
        return np.exp(-r * t) * (c0 + c1 * float(np.sum(x0 * np.exp((r - model.dividends) * t))))

    times = [0.0]
    t = 0.0
    while t < hs.max() - 1e-12 or running(t) >= cutoff:
        t += dt_tail * max(1.0, 0.5 * r * t)
        times.append(t)
    times = np.union1d(np.asarray(times), hs)

    n = cfg.n_paths
    integral = np.zeros(n)
    at_T = {}
    g_prev = None
    t_prev = 0.0
    for t, s in iterate_states(model, x0, times, n, cfg.seed, TAIL_STREAM, cfg.antithetic):
        g = np.exp(-r * t) * psi_minus(spec, model, s)
        if g_prev is not None:
            integral += 0.5 * (t - t_prev) * (g + g_prev)
        g_prev, t_prev = g, t
        for T in hs[np.isclose(hs, t, rtol=0, atol=1e-12)]:
            at_T[float(T)] = (np.exp(-r * t) * psi(spec, s), integral.copy())
    out = []
    for T in hs:
        term, i_T = at_T[float(T)]
        sample = np.e * (term + integral - i_T)
        out.append(TailBound(float(np.mean(sample)), _pair_se(sample, cfg.antithetic), False))
    return out


def tail_bound(model, spec: PayoffSpec, x, T: float, cfg: LsmcConfig, **kw) -> TailBound:
    """Bound on ``V(x) - V_T(0, x)``; see :func:`tail_bounds`."""
    return tail_bounds(model, spec, x, [T], cfg, **kw)[0]


# --- perpetual extrapolation ----------------------------------------------------------------


def price_perpetual_extrapolated(model, spec: PayoffSpec, x, cfg: LsmcConfig, target: float = 0.05,
                                 T0: float = 1.0, T_cap: float = 1024.0,
                                 dense_until: float = 8.0) -> PriceEstimate:
    """Bermudan prices on doubling horizons ``T0, 2 T0, ...`` until the tail
    bound is below ``target``.

    All horizons use truncations of one nested date schedule (spacing
    ``T0 / n_exercise_dates`` up to ``dense_until``, then doubling per octave)
    and common random numbers, so the ladder is monotone up to noise.  The
    returned estimate carries the final tail bound; ``details['ladder']`` lists
    every rung.
    """
    _require_a2(spec, model)
    spacing = T0 / cfg.n_exercise_dates
    rungs = T0 * 2.0 ** np.arange(int(np.floor(np.log2(T_cap / T0) + 1e-9)) + 1)
    bounds = tail_bounds(model, spec, x, rungs, cfg)
    ladder = []
    for T, tb in zip(rungs, bounds):
        T = float(T)
        est = _price_on_dates(model, spec, x, nested_dates(T, spacing, dense_until), cfg)
        ladder.append({"T": T, "value": est.value, "std_error": est.std_error,
                       "tail_bound": tb.value, "tail_se": tb.std_error,
                       "european": est.details["european"],
                       "premium_se": est.details["premium_se"]})
        if tb.upper < target:
            est.tail_bound = tb.upper
            est.details["ladder"] = ladder
            est.details["target"] = target
            est.is_lower_bound = True
            return est
    raise HorizonExplosion(f"tail bound still above {target} at T={rungs[-1]:g}")
