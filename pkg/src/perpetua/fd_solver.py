"""Finite-difference obstacle-problem solvers on log-price grids (d = 1, 2).

With ``z = log x`` the pricing operator has constant coefficients,

    Lz = sum_i (r - delta_i - a_ii/2) d_i + 1/2 sum_ij a_ij d_ij,

and both the finite-horizon problem ``min(u - psi, -u_t - L u + r u) = 0`` and the
stationary problem ``min(r v - L v, v - psi) = 0`` become linear complementarity
problems for the matrix ``A ~ r I - Lz``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator

from . import _lcp
from .exceptions import (
    AssumptionViolation,
    EmptyExerciseRegion,
    GridTooCoarse,
    PsorDivergence,
    UnsupportedDimension,
)
from .payoff import PayoffSpec, check_assumptions, psi

MIN_NODES = 16
PSOR_MAX_ITER = 100_000


@dataclass(frozen=True, eq=False)
class LogGrid:
    """Uniform tensor grid in log-prices; node ``k`` sits at price ``exp(z_k)``."""

    lower: np.ndarray
    upper: np.ndarray
    n: tuple[int, ...]

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        n = tuple(int(k) for k in np.atleast_1d(self.n))
        if not (lo.shape == hi.shape and len(n) == lo.size):
            raise ValueError("grid bounds and node counts must agree in dimension")
        if lo.size not in (1, 2):
            raise UnsupportedDimension(f"finite-difference grids support d in {{1, 2}}, got {lo.size}")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(hi > lo)):
            raise ValueError("grid bounds must be finite with upper > lower")
        if min(n) < MIN_NODES:
            raise GridTooCoarse(f"each axis needs at least {MIN_NODES} nodes, got {n}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "n", n)

    @classmethod
    def from_prices(cls, lower, upper, n) -> "LogGrid":
        d = np.atleast_1d(np.asarray(lower, dtype=float)).size
        n = tuple(np.broadcast_to(np.asarray(n), (d,)).tolist())
        return cls(np.log(lower), np.log(upper), n)

    @classmethod
    def default(cls, model, spec: PayoffSpec, n=None, x_ref=None, horizon=None, width=6.0) -> "LogGrid":
        """Bounds ``log x_ref -/+ width * sqrt(a_ii * T_eff)``.

        ``T_eff = max(5, 3/r)`` for perpetual problems (capped at 100 years); for a
        finite maturity ``T`` it is ``max(T, 0.25)`` unless that exceeds the
        perpetual value.
        """
        d = model.dim
        if d not in (1, 2):
            raise UnsupportedDimension(f"finite-difference grids support d in {{1, 2}}, got {d}")
        t_eff = max(5.0, 3.0 / model.rate) if model.rate > 0 else 100.0
        t_eff = min(t_eff, 100.0)
        if horizon is not None:
            t_eff = min(t_eff, max(float(horizon), 0.25))
        x_ref = spec.reference_point(d) if x_ref is None else np.broadcast_to(np.asarray(x_ref, float), (d,))
        half = width * np.sqrt(np.diag(model.cov_matrix) * t_eff)
        if n is None:
            n = 2048 if d == 1 else 129
        n = tuple(np.broadcast_to(np.asarray(n), (d,)).tolist())
        return cls(np.log(x_ref) - half, np.log(x_ref) + half, n)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @property
    def spacing(self) -> np.ndarray:
        return (self.upper - self.lower) / (np.asarray(self.n) - 1)

    @property
    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, k) for lo, hi, k in zip(self.lower, self.upper, self.n)]

    @property
    def price_axes(self) -> list[np.ndarray]:
        return [np.exp(z) for z in self.axes]

    def log_points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def points(self) -> np.ndarray:
        """Prices of all nodes, shape ``(size, d)`` in C order."""
        return np.exp(self.log_points())

    def boundary_mask(self) -> np.ndarray:
        idx = np.indices(self.n).reshape(self.dim, -1)
        edge = np.zeros(self.size, dtype=bool)
        for i, k in enumerate(self.n):
            edge |= (idx[i] == 0) | (idx[i] == k - 1)
        return edge

    def key(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist(), "n": list(self.n)}


@dataclass(eq=False)
class DiscreteOperator:
    """Sparse ``A ~ r I - Lz``; rows of boundary nodes are identity placeholders."""

    matrix: sp.csr_matrix
    interior: np.ndarray
    m_matrix: bool
    upwind: tuple[bool, ...]
    grid: LogGrid
    tangential: sp.csr_matrix | None = None


def build_operator(model, grid: LogGrid, cross_stencil: str = "seven_point") -> DiscreteOperator:
    """Assemble the discrete operator.

    Diffusion uses second-order central differences.  Drift is central while
    ``|mu_i| h_i <= a_ii`` (nonnegative neighbour weights) and first-order upwind
    otherwise.  The cross derivative uses the seven-point stencil aligned with
    the sign of ``a_12``, which keeps off-diagonals nonpositive when
    ``h_2 a_11 >= |a_12| h_1`` and ``h_1 a_22 >= |a_12| h_2``; ``"four_point"``
    selects the symmetric centred stencil instead.
    """
    d = model.dim
    if d != grid.dim:
        raise ValueError(f"model dimension {d} differs from grid dimension {grid.dim}")
    if d > 2:
        raise UnsupportedDimension("finite-difference operator supports d <= 2")
    n = grid.n
    size = grid.size
    h = grid.spacing
    mu = model.log_drift
    a = model.cov_matrix
    r = model.rate

    idx = np.arange(size).reshape(n)
    inner = idx[tuple(slice(1, -1) for _ in range(d))].ravel()
    interior = np.zeros(size, dtype=bool)
    interior[inner] = True
    strides = [int(np.prod(n[i + 1:])) for i in range(d)]

    rows, cols, vals = [], [], []

    def add(offset, coef):
        rows.append(inner)
        cols.append(inner + offset)
        vals.append(np.full(inner.size, coef))

    center = r
    upwind = []
    weights = []
    for i in range(d):
        diff = 0.5 * a[i, i] / h[i] ** 2
        lo_w, hi_w = diff, diff
        central = abs(mu[i]) * h[i] <= a[i, i]
        upwind.append(not central)
        if central:
            lo_w -= mu[i] / (2 * h[i])
            hi_w += mu[i] / (2 * h[i])
        elif mu[i] > 0:
            hi_w += mu[i] / h[i]
        else:
            lo_w -= mu[i] / h[i]
        add(-strides[i], -lo_w)
        add(strides[i], -hi_w)
        center += lo_w + hi_w
        weights.append((lo_w, hi_w))

    if d == 2 and a[0, 1] != 0.0:
        a12 = a[0, 1]
        s0, s1 = strides
        if cross_stencil == "four_point":
            c = a12 / (4 * h[0] * h[1])
            add(s0 + s1, -c)
            add(-s0 - s1, -c)
            add(s0 - s1, c)
            add(-s0 + s1, c)
        elif cross_stencil == "seven_point":
            c = abs(a12) / (2 * h[0] * h[1])
            pair = (s0 + s1) if a12 > 0 else (s0 - s1)
            add(pair, -c)
            add(-pair, -c)
            for off in (s0, -s0, s1, -s1):
                add(off, c)
            center -= 2 * c
        else:
            raise ValueError(f"unknown cross stencil {cross_stencil!r}")

    add(0, center)
    edge = np.flatnonzero(~interior)
    rows.append(edge)
    cols.append(edge)
    vals.append(np.ones(edge.size))
    mat = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    )
    mat.sum_duplicates()
    coo = mat[inner].tocoo()
    off = coo.col != inner[coo.row]
    m_ok = bool(np.all(coo.data[off] <= 1e-12 * abs(center)))
    tang = _tangential_rows(grid, interior, strides, weights, r) if d == 2 else None
    return DiscreteOperator(mat, interior, m_ok, tuple(upwind), grid, tang)


def _tangential_rows(grid, interior, strides, weights, r):
    """Edge rows of ``r - L`` with every derivative normal to the edge dropped.

    For Lipschitz values ``d/dz_i v = x_i d/dx_i v`` vanishes as ``x_i -> 0``, and
    far out along an axis the value stops depending on that coordinate, so
    edge nodes keep only the diffusion and drift along the edge.  Corners
    reduce to ``r v``.
    """
    idx = np.indices(grid.n).reshape(grid.dim, -1)
    edge = ~interior
    rows, cols, vals = [], [], []
    nodes = np.flatnonzero(edge)
    center = np.full(nodes.size, r)
    for i, (lo_w, hi_w) in enumerate(weights):
        along = (idx[i][nodes] > 0) & (idx[i][nodes] < grid.n[i] - 1)
        k = nodes[along]
        rows += [k, k]
        cols += [k - strides[i], k + strides[i]]
        vals += [np.full(k.size, -lo_w), np.full(k.size, -hi_w)]
        center[along] += lo_w + hi_w
    rows.append(nodes)
    cols.append(nodes)
    vals.append(center)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(grid.size, grid.size))


# --- boundary closure -------------------------------------------------------


def _decay_ratio(op: DiscreteOperator, row: int, stride: int, toward_upper: bool) -> float:
    m = op.matrix
    lo, dg, up = m[row, row - stride], m[row, row], m[row, row + stride]
    roots = np.roots([up, dg, lo]).real
    roots = roots[roots > 0]
    return float(roots.min() if toward_upper else roots.max())


@dataclass(eq=False)
class _Closure:
    """Generator rows ``gen`` on nodes governed by the equation (``pde``) plus
    algebraic boundary rows ``bnd`` with right-hand side ``rhs``."""

    gen: sp.csr_matrix
    pde: np.ndarray
    bnd: sp.csr_matrix
    rhs: np.ndarray
    kinds: dict


def _closure(op: DiscreteOperator, spec: PayoffSpec, far_field: str, psi_nodes: np.ndarray) -> _Closure:
    """Boundary treatment.

    1-d ``"auto"``: an edge where the payoff vanishes gets the discrete decaying
    mode of the interior recurrence (``v_N = rho v_{N-1}``); other edges hold
    ``v = psi``.  2-d ``"auto"``: edge nodes obey the equation with derivatives
    normal to the edge dropped (see :func:`_tangential_rows`).
    ``"dirichlet"`` holds ``v = psi`` on every edge node.
    """
    grid = op.grid
    if far_field not in ("auto", "dirichlet"):
        raise ValueError(f"unknown far_field {far_field!r}")
    inner = sp.diags(op.interior.astype(float))
    gen_inner = sp.csr_matrix(inner @ op.matrix)
    edge = np.flatnonzero(~op.interior)
    if far_field == "auto" and grid.dim == 2:
        gen = sp.csr_matrix(gen_inner + op.tangential)
        empty = sp.csr_matrix((grid.size, grid.size))
        kinds = {int(k): "tangential" for k in edge}
        return _Closure(gen, np.ones(grid.size, dtype=bool), empty, np.zeros(grid.size), kinds)

    rows, cols, vals = [], [], []
    rhs = np.zeros(grid.size)
    kinds = {}
    transparent = set()
    if far_field == "auto":
        n = grid.n[0]
        if psi_nodes[0] == 0.0 and psi_nodes[1] == 0.0:
            transparent.add(0)
        if psi_nodes[-1] == 0.0 and psi_nodes[-2] == 0.0:
            transparent.add(n - 1)

    for k in edge:
        rows.append(k)
        cols.append(k)
        vals.append(1.0)
        if k in transparent:
            if k == 0:
                rho = 1.0 / _decay_ratio(op, 1, 1, toward_upper=False)
                rows.append(k), cols.append(1), vals.append(-rho)
            else:
                rho = _decay_ratio(op, k - 1, 1, toward_upper=True)
                rows.append(k), cols.append(k - 1), vals.append(-rho)
            kinds[int(k)] = "transparent"
        else:
            rhs[k] = psi_nodes[k]
            kinds[int(k)] = "dirichlet"
    b = sp.csr_matrix((vals, (rows, cols)), shape=(grid.size, grid.size))
    return _Closure(gen_inner, op.interior.copy(), b, rhs, kinds)


def _system(cl: _Closure, scale: float, shift: float = 0.0) -> sp.csr_matrix:
    """``shift I + scale A`` on equation rows, closure rows elsewhere."""
    m = sp.diags(shift * cl.pde.astype(float)) + scale * cl.gen + cl.bnd
    m = sp.csr_matrix(m)
    m.eliminate_zeros()
    m.sort_indices()
    return m


# --- results -----------------------------------------------------------------


@dataclass(eq=False)
class FreeBoundary:
    """Exercise boundary: a scalar in 1-d, a list of crossing points in 2-d."""

    dim: int
    points: np.ndarray
    side: str | None = None

    @property
    def value(self) -> float:
        if self.dim != 1:
            raise ValueError("scalar boundary only defined for d = 1")
        return float(self.points[0, 0])


def _interp_nodes(grid: LogGrid, values: np.ndarray, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if grid.dim == 1:
        z = np.log(x[..., 0] if (x.ndim and x.shape[-1] == 1) else x)
        return np.interp(z, grid.axes[0], values.reshape(-1))
    z = np.log(x)
    lo, hi = grid.lower, grid.upper
    z = np.clip(z, lo, hi)
    f = RegularGridInterpolator(grid.axes, values.reshape(grid.shape))
    return f(z.reshape(-1, grid.dim)).reshape(z.shape[:-1])


def exercise_tolerance(psi_values) -> np.ndarray:
    return 1e-6 * (1.0 + np.asarray(psi_values))


@dataclass(eq=False)
class ValueFunction:
    """Stationary (perpetual) value on a grid."""

    grid: LogGrid
    values: np.ndarray
    psi: np.ndarray
    spec: PayoffSpec
    residual: float
    sweeps: int
    method: str
    omega: float
    boundary_kinds: dict = field(default_factory=dict)
    boundary: FreeBoundary | None = None

    @property
    def raw_contact(self) -> np.ndarray:
        """Nodes where ``|v - psi| <= eps_ex`` regardless of the payoff sign."""
        return np.abs(self.values - self.psi) <= exercise_tolerance(self.psi)

    @property
    def mask(self) -> np.ndarray:
        """Exercise region ``{v = psi, psi > 0}`` up to ``eps_ex``."""
        return self.raw_contact & (self.psi > 0)

    def __call__(self, x) -> np.ndarray:
        return _interp_nodes(self.grid, self.values, x)

    def to_csv(self, path) -> None:
        pts = self.grid.points()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x_{i + 1}" for i in range(self.grid.dim)] + ["psi", "v", "mask"])
            for p, s, v, m in zip(pts, self.psi.ravel(), self.values.ravel(), self.mask.ravel()):
                w.writerow([repr(float(c)) for c in p] + [repr(float(s)), repr(float(v)), int(m)])


@dataclass(eq=False)
class ValueSurface:
    """Finite-horizon value ``u(t_j, node)``; ``values[0]`` is the time-0 layer."""

    grid: LogGrid
    maturity: float
    times: np.ndarray
    values: np.ndarray
    psi: np.ndarray
    spec: PayoffSpec
    sweeps: int
    omega: float

    @property
    def steps(self) -> int:
        return self.times.size - 1

    @property
    def mask(self) -> np.ndarray:
        return (np.abs(self.values - self.psi) <= exercise_tolerance(self.psi)) & (self.psi > 0)

    def at(self, t: float, x) -> np.ndarray:
        """Value at time ``t`` (linear in time between layers) and prices ``x``."""
        j = np.searchsorted(self.times, t, side="right") - 1
        j = int(np.clip(j, 0, self.steps - 1))
        w = (t - self.times[j]) / (self.times[j + 1] - self.times[j])
        w = float(np.clip(w, 0.0, 1.0))
        layer = (1 - w) * self.values[j] + w * self.values[j + 1]
        return _interp_nodes(self.grid, layer, x)

    def __call__(self, x) -> np.ndarray:
        return _interp_nodes(self.grid, self.values[0], x)

    def to_csv(self, path) -> None:
        pts = self.grid.points()
        mask = self.mask
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x_{i + 1}" for i in range(self.grid.dim)] + ["psi", "u", "mask"])
            for j, t in enumerate(self.times):
                for p, s, u, m in zip(pts, self.psi.ravel(), self.values[j].ravel(), mask[j].ravel()):
                    w.writerow([repr(float(t))] + [repr(float(c)) for c in p]
                               + [repr(float(s)), repr(float(u)), int(m)])


# --- solvers -------------------------------------------------------------------


def _psor_tol(psi_nodes, tol, strike_scale):
    """``1e-9 * ||psi||_inf``, with the norm capped at ten strikes so that wide
    grids for unbounded payoffs keep a meaningful tolerance."""
    if tol is not None:
        return float(tol)
    scale = min(float(np.max(np.abs(psi_nodes))), 10.0 * strike_scale)
    return 1e-9 * scale if scale > 0 else 1e-12


def _resolve_omega(omega, m):
    return _lcp.optimal_omega(m) if omega == "auto" else float(omega)


def solve_perpetual(model, spec: PayoffSpec, grid: LogGrid | None = None, *, omega="auto",
                    tol=None, max_iter: int = PSOR_MAX_ITER, far_field: str = "auto",
                    method: str = "psor", fallback: bool = True,
                    cross_stencil: str = "seven_point", check: bool = True) -> ValueFunction:
    """Solve ``min(r v - L v, v - psi) = 0`` on ``grid``.

    ``method="psor"`` runs projected SOR on the stationary complementarity
    problem starting from ``v = psi``; if it stalls and ``fallback`` is set the
    solve switches to pseudo-time marching.  ``method="march"`` uses the
    marching route directly.
    """
    if check:
        rep = check_assumptions(spec, model)
        if not rep.passed:
            raise AssumptionViolation("; ".join(rep.reasons))
    grid = grid or LogGrid.default(model, spec)
    op = build_operator(model, grid, cross_stencil)
    psi_nodes = psi(spec, grid.points())
    cl = _closure(op, spec, far_field, psi_nodes)
    rhs, kinds = cl.rhs, cl.kinds
    m = _system(cl, 1.0)
    tol = _psor_tol(psi_nodes, tol, spec.total_strike)

    if method == "psor":
        w = _resolve_omega(omega, m)
        try:
            v, sweeps = _lcp.psor(m, rhs, psi_nodes, psi_nodes, w, tol, max_iter)
            used = "psor"
        except PsorDivergence:
            if not fallback:
                raise
            v, sweeps, w = _march_to_steady(cl, psi_nodes, omega, tol, max_iter, model.rate)
            used = "march"
    elif method == "march":
        v, sweeps, w = _march_to_steady(cl, psi_nodes, omega, tol, max_iter, model.rate)
        used = "march"
    else:
        raise ValueError(f"unknown method {method!r}")

    res = _lcp.complementarity_residual(m, rhs, psi_nodes, v)
    vf = ValueFunction(grid, v.reshape(grid.shape), psi_nodes.reshape(grid.shape), spec,
                       float(np.max(np.abs(res))), sweeps, used, w, kinds)
    try:
        vf.boundary = extract_boundary(vf)
    except EmptyExerciseRegion:
        vf.boundary = None
    return vf


def _march_to_steady(cl: _Closure, psi_nodes, omega, tol, max_iter, rate, tol_stat=None,
                     max_steps: int = 5000):
    """Implicit-Euler pseudo-time marching until the layer stops changing."""
    r = max(rate, 1e-3)
    tol_stat = tol_stat if tol_stat is not None else 10 * tol
    v = psi_nodes.copy()
    dtau = 0.01
    dtau_max = 20.0 / r
    total = 0
    cache = {}
    w = 1.0
    inner = cl.pde
    rhs = cl.rhs
    for _ in range(max_steps):
        if dtau not in cache:
            m = _system(cl, dtau, 1.0)
            cache[dtau] = (m, _resolve_omega(omega, m))
        m, w = cache[dtau]
        q = np.where(inner, v, rhs)
        new, sweeps = _lcp.psor(m, q, psi_nodes, v, w, tol, max_iter)
        total += sweeps
        change = float(np.max(np.abs(new - v)))
        v = new
        if dtau >= dtau_max and change < tol_stat:
            return v, total, w
        dtau = min(dtau * 2.0, dtau_max)
    raise PsorDivergence("pseudo-time marching did not reach a steady state")


def solve_finite_horizon(model, spec: PayoffSpec, grid: LogGrid | None, T: float, m: int, *,
                         theta: float = 0.5, rannacher: int = 2, omega="auto", tol=None,
                         max_iter: int = PSOR_MAX_ITER, far_field: str = "auto",
                         cross_stencil: str = "seven_point", check: bool = True) -> ValueSurface:
    """Backward theta-scheme (Crank-Nicolson by default) for the American problem.

    Each step solves ``min(M u - N u_next, u - psi) = 0`` by PSOR warm-started
    at the next layer.  The first ``rannacher`` steps after maturity are each
    replaced by two implicit-Euler half steps to damp the payoff kink.
    """
    if check:
        rep = check_assumptions(spec, model)
        if not rep.a1:
            raise AssumptionViolation("; ".join(rep.reasons))
    if not T > 0:
        raise ValueError("maturity must be positive")
    if m < 1:
        raise ValueError("need at least one time step")
    grid = grid or LogGrid.default(model, spec, horizon=T)
    op = build_operator(model, grid, cross_stencil)
    psi_nodes = psi(spec, grid.points())
    cl = _closure(op, spec, far_field, psi_nodes)
    rhs = cl.rhs
    tol = _psor_tol(psi_nodes, tol, spec.total_strike)
    dt = T / m
    inner = cl.pde
    eye = sp.identity(grid.size, format="csr")

    systems = {}

    def step(u_next, h, th):
        key = (h, th)
        if key not in systems:
            lhs = _system(cl, th * h, 1.0)
            expl = eye - (1 - th) * h * cl.gen
            systems[key] = (lhs, sp.csr_matrix(expl), _resolve_omega(omega, lhs))
        lhs, expl, w = systems[key]
        q = np.where(inner, expl @ u_next, rhs)
        return _lcp.psor(lhs, q, psi_nodes, u_next, w, tol, max_iter)

    values = np.empty((m + 1, grid.size))
    values[m] = psi_nodes
    u = psi_nodes.copy()
    total = 0
    for j in range(m - 1, -1, -1):
        if m - 1 - j < rannacher and theta != 1.0:
            for _ in range(2):
                u, s = step(u, dt / 2, 1.0)
                total += s
        else:
            u, s = step(u, dt, theta)
            total += s
        values[j] = u
    w = next(iter(systems.values()))[2]
    times = np.linspace(0.0, T, m + 1)
    return ValueSurface(grid, float(T), times, values.reshape((m + 1,) + grid.shape),
                        psi_nodes.reshape(grid.shape), spec, total, w)


def extract_boundary(vf: ValueFunction) -> FreeBoundary:
    """Locate the edge of the exercise region.

    In 1-d the outermost exercise node on the continuation side (largest node
    for put-type payoffs, smallest for call-type) is refined by linear
    interpolation of ``v - psi - eps_ex`` towards its continuation neighbour.
    In 2-d each grid row along the first axis contributes its mask crossings.
    """
    mask = vf.mask
    if not mask.any():
        raise EmptyExerciseRegion("no grid node satisfies v = psi with psi > 0")
    grid = vf.grid
    gap = (vf.values - vf.psi) - exercise_tolerance(vf.psi)
    if grid.dim == 1:
        z = grid.axes[0]
        put_side = vf.psi[0] > vf.psi[-1]
        ex = np.flatnonzero(mask)
        if put_side:
            k, nb = ex.max(), ex.max() + 1
        else:
            k, nb = ex.min(), ex.min() - 1
        zb = z[k]
        if 0 <= nb < z.size and gap[nb] > 0:
            zb = z[k] + (z[nb] - z[k]) * (-gap[k]) / (gap[nb] - gap[k])
        return FreeBoundary(1, np.array([[np.exp(zb)]]), "lower" if put_side else "upper")

    z0, z1 = grid.axes
    pts = []
    for j in range(grid.n[1]):
        col = mask[:, j]
        g = gap[:, j]
        for i in np.flatnonzero(col[:-1] != col[1:]):
            a, b = (i, i + 1) if col[i] else (i + 1, i)
            t = -g[a] / (g[b] - g[a]) if g[b] != g[a] else 0.5
            zc = z0[a] + t * (z0[b] - z0[a])
            pts.append((np.exp(zc), np.exp(z1[j])))
    return FreeBoundary(2, np.array(pts).reshape(-1, 2))
