"""Multidimensional Black-Scholes model and exact path simulation.

Prices follow ``dX^i = (r - delta_i) X^i dt + X^i (sigma dW)_i`` with ``sigma`` the
symmetric square root of the covariance matrix ``a``.  Because the log-price is
Gaussian with constant coefficients, every transition is sampled exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np
from scipy.special import ndtri

from .exceptions import (
    EmptyTimes,
    NegativeDividend,
    NegativeRate,
    NonMonotoneTimes,
    NonPositiveDt,
    NonPositiveState,
    NonSymmetric,
    NotPositiveDefinite,
)

EIGEN_FLOOR = 1e-10
_U64 = (1 << 64) - 1


@dataclass
class ValidationReport:
    """Outcome of checking model parameters against their invariants."""

    checks: dict[str, bool]
    eigen_min: float
    eigen_max: float
    vol_matrix: np.ndarray | None
    messages: list[str] = field(default_factory=list)
    m_matrix: bool | None = None

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def as_dict(self) -> dict:
        out = {
            "passed": self.passed,
            "checks": dict(self.checks),
            "eigen_min": self.eigen_min,
            "eigen_max": self.eigen_max,
            "messages": list(self.messages),
        }
        if self.vol_matrix is not None:
            out["vol_matrix"] = np.asarray(self.vol_matrix).tolist()
        if self.m_matrix is not None:
            out["m_matrix"] = self.m_matrix
        return out


def symmetric_sqrt(a: np.ndarray) -> np.ndarray:
    """Symmetric square root of a symmetric positive semidefinite matrix."""
    w, q = np.linalg.eigh(a)
    return (q * np.sqrt(np.clip(w, 0.0, None))) @ q.T


def _inspect(rate, dividends, cov) -> tuple[ValidationReport, list[Exception]]:
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    dividends = np.atleast_1d(np.asarray(dividends, dtype=float))
    errors: list[Exception] = []
    checks: dict[str, bool] = {}
    messages: list[str] = []

    d = cov.shape[0]
    if cov.shape != (d, d) or dividends.shape != (d,):
        raise ValueError(
            f"cov_matrix must be d x d and dividends length d; got {cov.shape} and {dividends.shape}"
        )

    scale = max(1.0, float(np.max(np.abs(cov))))
    checks["symmetric"] = bool(np.max(np.abs(cov - cov.T)) <= 1e-12 * scale)
    if not checks["symmetric"]:
        messages.append("cov_matrix is not symmetric")
        errors.append(NonSymmetric("cov_matrix is not symmetric"))

    eig = np.linalg.eigvalsh(0.5 * (cov + cov.T))
    eig_min, eig_max = float(eig[0]), float(eig[-1])
    checks["positive_definite"] = bool(eig_max > 0 and eig_min > EIGEN_FLOOR * eig_max)
    if not checks["positive_definite"]:
        msg = f"cov_matrix not positive definite (eigenvalues in [{eig_min:.3e}, {eig_max:.3e}])"
        messages.append(msg)
        errors.append(NotPositiveDefinite(msg))

    checks["nonnegative_rate"] = bool(rate >= 0)
    if not checks["nonnegative_rate"]:
        messages.append(f"rate {rate} < 0")
        errors.append(NegativeRate(f"rate {rate} < 0"))

    checks["nonnegative_dividends"] = bool(np.all(dividends >= 0))
    if not checks["nonnegative_dividends"]:
        messages.append(f"dividends {dividends.tolist()} contain negative entries")
        errors.append(NegativeDividend("dividends must be nonnegative"))

    vol = symmetric_sqrt(0.5 * (cov + cov.T)) if checks["positive_definite"] else None
    if vol is not None:
        checks["sqrt_consistent"] = bool(np.max(np.abs(vol @ vol - cov)) < 1e-12 * scale)
    report = ValidationReport(checks, eig_min, eig_max, vol, messages)
    return report, errors


@dataclass(frozen=True, eq=False)
class MarketModel:
    """Rates, dividend yields and covariance of the Black-Scholes model.

    ``vol_matrix`` is always recomputed as the symmetric square root of
    ``cov_matrix``; only the covariance determines the law of the prices.
    """

    rate: float
    dividends: np.ndarray
    cov_matrix: np.ndarray
    vol_matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cov = np.atleast_2d(np.array(self.cov_matrix, dtype=float))
        div = np.atleast_1d(np.array(self.dividends, dtype=float))
        report, errors = _inspect(float(self.rate), div, cov)
        if errors:
            raise errors[0]
        vol = report.vol_matrix
        for arr in (cov, div, vol):
            arr.flags.writeable = False
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "cov_matrix", cov)
        object.__setattr__(self, "dividends", div)
        object.__setattr__(self, "vol_matrix", vol)

    @classmethod
    def from_volatility(cls, rate, dividends, vols, correlation=None) -> "MarketModel":
        vols = np.atleast_1d(np.asarray(vols, dtype=float))
        corr = np.eye(vols.size) if correlation is None else np.asarray(correlation, dtype=float)
        return cls(rate, dividends, np.outer(vols, vols) * corr)

    @classmethod
    def from_vol_matrix(cls, rate, dividends, vol_matrix) -> "MarketModel":
        s = np.atleast_2d(np.asarray(vol_matrix, dtype=float))
        return cls(rate, dividends, s @ s.T)

    @classmethod
    def from_mapping(cls, cfg: Mapping) -> "MarketModel":
        """Build from a config section with ``rate``, ``dividends`` and ``cov_matrix``
        (or ``vol_matrix``).  When both matrices are present the covariance wins."""
        if "cov_matrix" in cfg:
            return cls(cfg["rate"], cfg["dividends"], cfg["cov_matrix"])
        return cls.from_vol_matrix(cfg["rate"], cfg["dividends"], cfg["vol_matrix"])

    @property
    def dim(self) -> int:
        return self.cov_matrix.shape[0]

    @property
    def log_drift(self) -> np.ndarray:
        """Drift of the log-prices, ``r - delta_i - a_ii / 2``."""
        return self.rate - self.dividends - 0.5 * np.diag(self.cov_matrix)

    def to_dict(self) -> dict:
        return {
            "rate": self.rate,
            "dividends": self.dividends.tolist(),
            "cov_matrix": self.cov_matrix.tolist(),
        }


def validate(model) -> ValidationReport:
    """Check model invariants, raising the first violated one.

    ``model`` may be a :class:`MarketModel` or a mapping with ``rate``,
    ``dividends`` and ``cov_matrix`` (or ``vol_matrix``) entries.  The returned
    report carries the eigenvalue range of ``a`` and its symmetric square root.
    """
    if isinstance(model, MarketModel):
        rate, div, cov = model.rate, model.dividends, model.cov_matrix
    else:
        rate, div = model["rate"], model["dividends"]
        if "cov_matrix" in model:
            cov = model["cov_matrix"]
        else:
            s = np.atleast_2d(np.asarray(model["vol_matrix"], dtype=float))
            cov = s @ s.T
    report, errors = _inspect(float(rate), div, cov)
    if errors:
        raise errors[0]
    return report


def _as_state(model: MarketModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != model.dim:
        if model.dim == 1:
            x = x[..., None]
        else:
            raise ValueError(f"state must have trailing dimension {model.dim}, got shape {x.shape}")
    if not np.all(x > 0):
        raise NonPositiveState("all price coordinates must be strictly positive")
    return x


def exact_step(model: MarketModel, x, dt: float, z) -> np.ndarray:
    """Advance prices ``x`` by ``dt`` using standard normal draws ``z``.

    ``x`` and ``z`` share a trailing axis of length ``d``; leading axes broadcast.
    """
    x = _as_state(model, x)
    if not dt > 0:
        raise NonPositiveDt(f"dt must be positive, got {dt}")
    z = np.asarray(z, dtype=float)
    if model.dim == 1 and (z.ndim == 0 or z.shape[-1] != 1):
        z = z[..., None]
    shock = z @ model.vol_matrix.T
    return x * np.exp(model.log_drift * dt + np.sqrt(dt) * shock)


def expected_price(model: MarketModel, x, t: float) -> np.ndarray:
    """Risk-neutral mean ``x_i exp((r - delta_i) t)``."""
    x = _as_state(model, x)
    if t < 0:
        raise ValueError("t must be nonnegative")
    return x * np.exp((model.rate - model.dividends) * t)


def make_rng(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Counter-based generator; ``(seed, stream_id)`` selects an independent stream."""
    return np.random.Generator(np.random.Philox(key=[int(seed) & _U64, int(stream_id) & _U64]))


def standard_normals(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normals by inverse-CDF of open-interval uniforms."""
    n = int(np.prod(shape))
    k = rng.bit_generator.random_raw(n) >> np.uint64(11)
    u = (k.astype(float) + 0.5) * 2.0**-53
    return ndtri(u).reshape(shape)


def _normal_block(rng, n_paths, d, antithetic):
    if not antithetic:
        return standard_normals(rng, (n_paths, d))
    half = standard_normals(rng, ((n_paths + 1) // 2, d))
    return np.concatenate([half, -half])[:n_paths]


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float).ravel()
    if times.size == 0:
        raise EmptyTimes("time grid is empty")
    if times[0] != 0.0:
        raise NonMonotoneTimes("time grid must start at 0")
    if np.any(np.diff(times) <= 0):
        raise NonMonotoneTimes("time grid must be strictly increasing")
    return times


def iterate_states(model, x, times, n_paths, seed, stream_id=0, antithetic=False) -> Iterator:
    """Yield ``(t, X_t)`` along ``times`` without storing the paths.

    Draw order matches :func:`simulate_paths`, so both see identical states.
    """
    times = _check_times(times)
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    x0 = _as_state(model, x).reshape(-1)
    rng = make_rng(seed, stream_id)
    state = np.broadcast_to(x0, (n_paths, model.dim)).copy()
    yield times[0], state
    for t_prev, t in zip(times[:-1], times[1:]):
        z = _normal_block(rng, n_paths, model.dim, antithetic)
        state = exact_step(model, state, t - t_prev, z)
        yield t, state


@dataclass(eq=False)
class PathSet:
    """Simulated price paths with the RNG coordinates that produced them."""

    initial: np.ndarray
    times: np.ndarray
    paths: np.ndarray  # (n_paths, n_times, d)
    seed: int
    stream_id: int

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    def to_csv(self, path) -> None:
        d = self.paths.shape[2]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path_id", "time"] + [f"asset_{i + 1}" for i in range(d)])
            for p in range(self.n_paths):
                for j, t in enumerate(self.times):
                    w.writerow([p, repr(float(t))] + [repr(float(v)) for v in self.paths[p, j]])


def simulate_paths(model: MarketModel, x, times, n_paths: int, seed: int,
                   stream_id: int = 0, antithetic: bool = False) -> PathSet:
    times = _check_times(times)
    x0 = _as_state(model, x).reshape(-1)
    out = np.empty((n_paths, times.size, model.dim))
    for j, (_, state) in enumerate(iterate_states(model, x0, times, n_paths, seed, stream_id, antithetic)):
        out[:, j] = state
    return PathSet(x0, times, out, int(seed), int(stream_id))
