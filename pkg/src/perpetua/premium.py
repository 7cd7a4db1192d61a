"""Monte Carlo checks of the stochastic representation of American values.

* :func:`estimate_premium` integrates ``e^{-rt} Psi^-(X_t)`` over the time a
  path spends in the exercise region of a solved value function.  For a
  perpetual option the result equals the option value.
* :func:`check_k_representation` compares the compensator of a discrete Snell
  envelope with the time integral of ``Phi(X, u_T)`` along tree paths.
* :func:`check_bound_315` checks ``E int e^{-rt} Phi(X_t, V(X_t)) dt <=
  2 E int e^{-rt} Psi^-(X_t) dt`` and that the left side reproduces ``V``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import lsmc, oracles
from .exceptions import OracleGridMismatch, UnsupportedDimension
from .fd_solver import ValueFunction, ValueSurface, exercise_tolerance
from .market_model import _as_state, iterate_states, make_rng
from .payoff import PayoffSpec, psi, psi_minus

PREMIUM_STREAM = 3
TREE_STREAM = 4


class ExerciseOracle:
    """Membership in ``{V = psi, psi > 0}`` for a solved perpetual value.

    The nodal gap ``v - psi - eps_scale (1 + psi)`` is interpolated linearly in
    log-price; a point is in the region when the interpolated gap is ``<= 0``
    and ``psi > 0`` there.  Points outside the grid take the value of the
    nearest edge node.
    """

    def __init__(self, vf: ValueFunction, eps_scale: float = 1e-6):
        self.vf = vf
        self.eps_scale = float(eps_scale)
        grid = vf.grid
        gap = vf.values - vf.psi - exercise_tolerance(vf.psi) * (eps_scale / 1e-6)
        self._gap = gap.reshape(grid.shape)
        self._interp = None
        if grid.dim > 1:
            self._interp = RegularGridInterpolator(grid.axes, self._gap)

    @property
    def grid(self):
        return self.vf.grid

    @property
    def spec(self) -> PayoffSpec:
        return self.vf.spec

    def gap(self, x: np.ndarray) -> np.ndarray:
        z = np.log(x)
        if self._interp is None:
            return np.interp(z[:, 0], self.grid.axes[0], self._gap)
        return self._interp(np.clip(z, self.grid.lower, self.grid.upper))

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] != self.grid.dim:
            x = x.reshape(-1, self.grid.dim)
        return (self.gap(x) <= 0.0) & (psi(self.spec, x) > 0)

    def value(self, x) -> float:
        return float(np.asarray(self.vf(x)).reshape(-1)[0])

    def check(self, model, spec: PayoffSpec, x0: np.ndarray) -> None:
        g = self.grid
        if g.dim != model.dim:
            raise OracleGridMismatch(f"oracle grid has dimension {g.dim}, model {model.dim}")
        if spec.to_dict() != self.spec.to_dict():
            raise OracleGridMismatch("oracle was solved for a different payoff")
        z = np.log(x0)
        if np.any(z < g.lower) or np.any(z > g.upper):
            raise OracleGridMismatch("spot lies outside the oracle grid")


def time_grid(T_max: float, dt: float, stretch_after: float = 2.0) -> np.ndarray:
    """Step ``dt`` up to ``stretch_after``, then ``dt * t / stretch_after``.

    The expected integrand varies on the scale ``1/r``, so later steps can grow
    in proportion to ``t``.
    """
    ts = [0.0]
    t = 0.0
    while t < T_max - 1e-12:
        t = min(t + dt * max(1.0, t / stretch_after), T_max)
        ts.append(t)
    return np.asarray(ts)


@dataclass
class PremiumEstimate:
    value: float
    std_error: float
    T_max: float
    tail_remainder: float
    n_paths: int
    per_path: np.ndarray | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "T_max": self.T_max,
                "tail_remainder": self.tail_remainder, "n_paths": self.n_paths}

    def per_path_csv(self, path) -> None:
        if self.per_path is None:
            raise ValueError("per-path integrals were not kept")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path_id", "integral"])
            for i, v in enumerate(self.per_path):
                w.writerow([i, repr(float(v))])


def default_horizon(model, spec: PayoffSpec, x, value: float, cfg: lsmc.LsmcConfig,
                    rel: float = 1e-3, T_cap: float = 4096.0) -> tuple[float, float]:
    """Smallest doubling horizon whose tail bound is below ``rel * value``.

    Returns ``(T_max, tail_bound(T_max))``; for puts and calls the closed-form
    bound is inverted exactly.
    """
    if value <= 0:
        return 1.0, float(lsmc.tail_bound(model, spec, x, 1.0, cfg).upper)
    goal = rel * value
    x0 = _as_state(model, x).reshape(-1)
    if spec.family == "put":
        T = np.log(2 * np.e * spec.strike / goal) / model.rate
    elif spec.family == "call":
        T = np.log(2 * np.e * max(float(x0[0]), spec.strike) / goal) / float(model.dividends[0])
    else:
        Ts = 2.0 ** np.arange(0, int(np.log2(T_cap)) + 1)
        for T, tb in zip(Ts, lsmc.tail_bounds(model, spec, x0, Ts, cfg)):
            if tb.upper < goal:
                return float(T), tb.upper
        return float(Ts[-1]), lsmc.tail_bounds(model, spec, x0, [Ts[-1]], cfg)[0].upper
    T = float(max(T, 1.0))
    return T, float(lsmc.tail_bound(model, spec, x0, T, cfg).upper)


def _integrals(model, spec, x0, times, n_paths, seed, member, antithetic=False):
    """Trapezoidal per-path integrals of ``e^{-rt} Psi^-`` with and without the
    exercise indicator."""
    r = model.rate
    masked = np.zeros(n_paths)
    full = np.zeros(n_paths)
    prev = None
    t_prev = 0.0
    for t, s in iterate_states(model, x0, times, n_paths, seed, PREMIUM_STREAM, antithetic):
        g = np.exp(-r * t) * psi_minus(spec, model, s)
        gm = np.where(member(s), g, 0.0)
        if prev is not None:
            h = 0.5 * (t - t_prev)
            full += h * (g + prev[0])
            masked += h * (gm + prev[1])
        prev, t_prev = (g, gm), t
    return masked, full


def _se(v):
    return float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0


def estimate_premium(model, spec: PayoffSpec, x, oracle: ExerciseOracle, T_max: float | None = None,
                     dt: float = 0.05, n_paths: int = 100_000, seed: int = 0,
                     keep_paths: bool = False) -> PremiumEstimate:
    """``E_x int_0^T_max e^{-rt} Psi^-(X_t) 1{X_t in exercise region} dt``.

    The integral is accumulated with the trapezoidal rule on :func:`time_grid`.
    ``tail_remainder`` is the tail bound at ``T_max``.
    """
    lsmc._require_a2(spec, model)
    x0 = _as_state(model, x).reshape(-1)
    oracle.check(model, spec, x0)
    cfg = lsmc.LsmcConfig(n_paths=max(n_paths, 1000), seed=seed)
    if T_max is None:
        T_max, tail = default_horizon(model, spec, x0, oracle.value(x0[None, :]), cfg)
    else:
        tail = float(lsmc.tail_bound(model, spec, x0, T_max, cfg).upper)
    if spec.family == "zero":
        return PremiumEstimate(0.0, 0.0, float(T_max), 0.0, n_paths,
                               np.zeros(n_paths) if keep_paths else None)
    masked, _ = _integrals(model, spec, x0, time_grid(T_max, dt), n_paths, seed, oracle.contains)
    return PremiumEstimate(float(masked.mean()), _se(masked), float(T_max), tail, n_paths,
                           masked if keep_paths else None)


# --- bound on the reflection term -------------------------------------------------------


@dataclass
class BoundReport:
    lhs: float
    rhs: float
    lhs_se: float
    rhs_se: float
    joint_se: float
    value: float
    premium_tolerance: float
    T_max: float
    quadrature_rhs: float | None = None

    @property
    def inequality_holds(self) -> bool:
        return self.lhs <= self.rhs + 3.0 * self.joint_se

    @property
    def premium_matches(self) -> bool:
        return abs(self.lhs - self.value) <= self.premium_tolerance

    @property
    def quadrature_matches(self) -> bool | None:
        if self.quadrature_rhs is None:
            return None
        return abs(self.rhs - self.quadrature_rhs) <= 3.0 * self.rhs_se + 1e-12

    @property
    def verdict(self) -> bool:
        return self.inequality_holds and self.premium_matches and self.quadrature_matches is not False

    def as_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs,
                "std_errors": {"lhs": self.lhs_se, "rhs": self.rhs_se, "joint": self.joint_se},
                "value": self.value, "premium_tolerance": self.premium_tolerance,
                "T_max": self.T_max, "quadrature_rhs": self.quadrature_rhs,
                "verdict": "pass" if self.verdict else "fail"}


def check_bound_315(model, spec: PayoffSpec, x, vf: ValueFunction, T_max: float | None = None,
                    n_paths: int = 50_000, seed: int = 0, dt: float = 0.05,
                    quadrature: bool = False) -> BoundReport:
    """Monte Carlo check of ``E int e^{-rt} Phi(X_t, V(X_t)) dt <= 2 E int e^{-rt} Psi^-(X_t) dt``.

    Both sides share paths; the left side is also compared with ``V(x)``
    (tolerance ``3 SE + tail + 1%``).  With ``quadrature=True`` (one asset) the
    right side is recomputed by nested adaptive quadrature.
    """
    lsmc._require_a2(spec, model)
    x0 = _as_state(model, x).reshape(-1)
    oracle = ExerciseOracle(vf)
    oracle.check(model, spec, x0)
    cfg = lsmc.LsmcConfig(n_paths=max(n_paths, 1000), seed=seed)
    value = oracle.value(x0[None, :])
    if T_max is None:
        T_max, tail = default_horizon(model, spec, x0, value, cfg)
    else:
        tail = float(lsmc.tail_bound(model, spec, x0, T_max, cfg).upper)
    if spec.family == "zero":
        return BoundReport(0.0, 0.0, 0.0, 0.0, 0.0, value, 0.0, float(T_max))
    masked, full = _integrals(model, spec, x0, time_grid(T_max, dt), n_paths, seed, oracle.contains)
    rhs_paths = 2.0 * full
    quad = None
    if quadrature:
        f = lambda s: psi_minus(spec, model, s)  # noqa: E731
        quad = 2.0 * oracles.discounted_time_integral(model, f, float(x0[0]), 0.0, T_max,
                                                      breakpoints=[spec.total_strike])
    tol = 3.0 * _se(masked) + tail + 0.01 * value
    return BoundReport(float(masked.mean()), float(rhs_paths.mean()), _se(masked), _se(rhs_paths),
                       _se(rhs_paths - masked), value, tol, float(T_max), quad)


# --- compensator of the discrete Snell envelope -----------------------------------------------


@dataclass
class KRepresentationReport:
    levels: list
    discrepancies: list
    ratios: list
    minimality_max: float
    positivity_min: float
    compensator_mean: list
    phi_integral_mean: list
    min_ratio: float = 1.3
    minimality_tol: float = 1e-10

    @property
    def rate_ok(self) -> bool:
        return all(r >= self.min_ratio for r in self.ratios)

    @property
    def minimality_ok(self) -> bool:
        return self.minimality_max <= self.minimality_tol

    @property
    def positivity_ok(self) -> bool:
        return self.positivity_min >= -self.minimality_tol

    @property
    def passed(self) -> bool:
        return self.rate_ok and self.minimality_ok and self.positivity_ok

    def as_dict(self) -> dict:
        return {"levels": self.levels, "discrepancies": self.discrepancies, "ratios": self.ratios,
                "minimality_max": self.minimality_max, "positivity_min": self.positivity_min,
                "compensator_mean": self.compensator_mean,
                "phi_integral_mean": self.phi_integral_mean,
                "verdict": "pass" if self.passed else "fail"}


def _tree_level(model, spec, x, T, m, surface, n_paths, seed):
    tree = oracles.build_tree(model, x, T, m)
    env = oracles.discrete_snell(model, spec, tree)
    rng = make_rng(seed, TREE_STREAM)
    ups = rng.random((n_paths, m)) < tree.p_up
    j = np.concatenate([np.zeros((n_paths, 1), dtype=np.int64), np.cumsum(ups, axis=1)], axis=1)

    # Phi at every node, with u_T from the surface or from the tree itself
    phi_nodes = np.zeros((m, m + 1))
    slack = np.zeros((m + 1, m + 1))
    for k in range(m):
        xs = tree.prices(k)
        p = env.payoff[k, : k + 1]
        if surface is None:
            contact = env.values[k, : k + 1] <= p
        else:
            u = surface.at(k * tree.dt, xs)
            contact = u - p <= exercise_tolerance(p)
        phi_nodes[k, : k + 1] = np.where(contact, psi_minus(spec, model, xs), 0.0)
        slack[k, : k + 1] = env.values[k, : k + 1] - p

    rows = np.arange(m)
    dk = env.increments[rows[None, :], j[:, :-1]]
    dphi = phi_nodes[rows[None, :], j[:, :-1]] * tree.dt
    cum = np.cumsum(dk - dphi, axis=1)
    disc = float(np.mean(np.max(np.abs(cum), axis=1)))

    inc = env.increments
    valid = ~np.isnan(inc)
    above = valid & (slack[:m] > 1e-10)
    minimality = float(np.max(inc[above], initial=0.0))
    positivity = float(np.min(inc[valid]))
    return disc, minimality, positivity, float(dk.sum(axis=1).mean()), float(dphi.sum(axis=1).mean())


def check_k_representation(model, spec: PayoffSpec, surface: ValueSurface | None = None,
                           n_paths: int = 2000, seed: int = 0, *, x: float | None = None,
                           T: float | None = None, levels=(200, 400, 800)) -> KRepresentationReport:
    """Compare discrete compensator increments with ``Phi(X, u_T) dt`` along tree paths.

    For each number of tree steps in ``levels`` the discrepancy is the mean
    over sampled paths of ``sup_k |sum_{i<k} (dK_i - Phi_i dt)|``.  ``u_T``
    comes from ``surface`` when given, otherwise from the tree's own values.
    """
    if model.dim != 1:
        raise UnsupportedDimension("the tree check is one-dimensional")
    if surface is None and T is None:
        raise ValueError("give a solved surface or a horizon T")
    T = float(surface.maturity if T is None else T)
    x = float(spec.total_strike if x is None else x)
    res = [_tree_level(model, spec, x, T, int(m), surface, n_paths, seed) for m in levels]
    disc = [r[0] for r in res]
    ratios = [a / b if b > 0 else np.inf for a, b in zip(disc[:-1], disc[1:])]
    if all(d == 0 for d in disc):
        ratios = [np.inf] * (len(disc) - 1)
    return KRepresentationReport(list(map(int, levels)), disc, ratios,
                                 max(r[1] for r in res), min(r[2] for r in res),
                                 [r[3] for r in res], [r[4] for r in res])
