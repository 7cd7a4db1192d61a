"""Reproducible experiments on horizon convergence, Lipschitz continuity and growth.

Each study returns a :class:`StudyResult` whose rows carry the measured
quantity, the bound it is compared against and the literal outcome of that
comparison.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import fd_solver as fd
from . import lsmc
from .exceptions import AssumptionViolation
from .payoff import PayoffSpec, check_assumptions, growth_constant, lipschitz_constant


@dataclass
class StudySpec:
    """Inputs shared by the studies.

    ``grid`` is a :class:`~perpetua.fd_solver.LogGrid` (PDE route, ``d <= 2``);
    ``method="mc"`` switches to least-squares Monte Carlo with ``lsmc_config``.
    Finite-horizon PDE solves use ``max(min_steps, steps_per_year * T)`` time steps.
    """

    model: object
    payoff: PayoffSpec
    spots: list
    ladder: list = field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0])
    grid: fd.LogGrid | None = None
    method: str = "pde"
    steps_per_year: int = 100
    min_steps: int = 200
    max_steps: int = 2000
    lsmc_config: lsmc.LsmcConfig = field(default_factory=lsmc.LsmcConfig)
    mc_target: float = 0.5
    output: str | None = None

    def __post_init__(self):
        ladder = np.asarray(self.ladder, dtype=float)
        if ladder.size == 0 or np.any(ladder <= 0) or np.any(np.diff(ladder) <= 0):
            raise ValueError("horizon ladder must be positive and strictly increasing")
        self.ladder = ladder.tolist()
        d = self.model.dim
        spots = [np.broadcast_to(np.asarray(s, dtype=float), (d,)).copy() for s in self.spots]
        if not spots:
            raise ValueError("at least one spot is required")
        if any(np.any(s <= 0) for s in spots):
            raise ValueError("spots must lie in the open positive orthant")
        self.spots = spots
        if self.method not in ("pde", "mc"):
            raise ValueError("method must be 'pde' or 'mc'")
        if self.method == "pde" and d > 2:
            raise ValueError("the PDE route supports d <= 2; use method='mc'")

    def steps(self, T: float) -> int:
        return int(min(self.max_steps, max(self.min_steps, round(self.steps_per_year * T))))

    def resolved_grid(self) -> fd.LogGrid:
        return self.grid or fd.LogGrid.default(self.model, self.payoff)


@dataclass
class StudyResult:
    kind: str
    columns: list
    rows: list
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(bool(r["ok"]) for r in self.rows)

    def as_dict(self) -> dict:
        return {"kind": self.kind, "passed": self.passed, "columns": self.columns,
                "rows": self.rows, "meta": self.meta}

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.columns, extrasaction="ignore")
        w.writeheader()
        for r in self.rows:
            w.writerow(r)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_table(self) -> str:
        def fmt(v):
            if isinstance(v, (bool, np.bool_)):
                return "yes" if v else "NO"
            if isinstance(v, float):
                return f"{v:.6g}"
            if isinstance(v, (list, tuple)):
                return "(" + ", ".join(f"{c:.6g}" for c in v) + ")"
            return str(v)
        cells = [[fmt(r.get(c)) for c in self.columns] for r in self.rows]
        widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(self.columns)]
        lines = ["  ".join(c.rjust(w) for c, w in zip(self.columns, widths))]
        lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
        return "\n".join(lines)


def _spot_label(x: np.ndarray):
    return float(x[0]) if x.size == 1 else [float(c) for c in x]


def run_rate_study(study: StudySpec) -> StudyResult:
    """Measured ``V(x) - V_T(0, x)`` against the tail bound for every ladder entry."""
    model, spec = study.model, study.payoff
    rep = check_assumptions(spec, model)
    if not (rep.a1 and rep.a2a and rep.a2b) or model.rate <= 0:
        raise AssumptionViolation("; ".join(rep.reasons))
    cfg = study.lsmc_config
    rows = []
    meta = {"family": spec.family, "ladder": study.ladder, "method": study.method}

    if study.method == "pde":
        grid = study.resolved_grid()
        vf = fd.solve_perpetual(model, spec, grid)
        pts = np.array(study.spots)
        v_inf = np.asarray(vf(pts)).reshape(-1)
        meta.update(grid=grid.key(), residual=vf.residual)
        for T in study.ladder:
            surf = fd.solve_finite_horizon(model, spec, grid, T, study.steps(T))
            v_T = np.asarray(surf(pts)).reshape(-1)
            for x, v, vt in zip(study.spots, v_inf, v_T):
                tb = lsmc.tail_bound(model, spec, x, T, cfg)
                gap = float(v - vt)
                bound = tb.upper
                rows.append({"T": T, "x": _spot_label(x), "V_T": float(vt), "V": float(v),
                             "gap": gap, "bound": bound, "ok": gap <= bound})
    else:
        for x in study.spots:
            perp = lsmc.price_perpetual_extrapolated(model, spec, x, cfg, target=study.mc_target)
            spacing = 1.0 / cfg.n_exercise_dates
            bounds = lsmc.tail_bounds(model, spec, x, study.ladder, cfg)
            for T, tb in zip(study.ladder, bounds):
                est = lsmc._price_on_dates(model, spec, x, lsmc.nested_dates(T, spacing, 8.0), cfg)
                gap = perp.value - est.value
                slack = 3.0 * float(np.hypot(perp.std_error, est.std_error))
                bound = tb.upper + slack
                rows.append({"T": T, "x": _spot_label(x), "V_T": est.value, "V": perp.value,
                             "gap": gap, "bound": bound, "ok": gap <= bound})
    cols = ["T", "x", "V_T", "V", "gap", "bound", "ok"]
    return StudyResult("rate", cols, rows, meta)


def _pair_ratios(points: np.ndarray, values: np.ndarray, shape: tuple, strides=(1, 2, 4, 8)):
    """Max difference quotient over node pairs along each axis and the diagonals."""
    pts = points.reshape(shape + (-1,))
    v = values.reshape(shape)
    best = 0.0
    d = len(shape)
    offsets = []
    for s in strides:
        for a in range(d):
            off = [0] * d
            off[a] = s
            offsets.append(tuple(off))
        if d == 2:
            offsets += [(s, s), (s, -s)]
    for off in offsets:
        sl_a, sl_b = [], []
        for o, n in zip(off, shape):
            if abs(o) >= n:
                break
            if o >= 0:
                sl_a.append(slice(0, n - o))
                sl_b.append(slice(o, n))
            else:
                sl_a.append(slice(-o, n))
                sl_b.append(slice(0, n + o))
        else:
            sa, sb = tuple(sl_a), tuple(sl_b)
            dist = np.linalg.norm(pts[sa] - pts[sb], axis=-1)
            keep = dist > 0
            if keep.any():
                q = np.abs(v[sa] - v[sb])[keep] / dist[keep]
                best = max(best, float(q.max()))
    return best


def run_lipschitz_study(study: StudySpec) -> StudyResult:
    """Discrete Lipschitz ratio of the perpetual value against ``L``.

    PDE route: max over grid-node pairs (axis and diagonal neighbours at
    strides 1, 2, 4, 8) compared with ``L (1 + 2 h)``, ``h`` the largest
    log-spacing.  MC route: consecutive spots priced with common random
    numbers, compared with ``L + 3 SE / |x - y|``.
    """
    model, spec = study.model, study.payoff
    L = lipschitz_constant(spec)
    rows = []
    if study.method == "pde":
        grid = study.resolved_grid()
        vf = fd.solve_perpetual(model, spec, grid)
        h = float(np.max(grid.spacing))
        ratio = _pair_ratios(grid.points(), vf.values, grid.shape)
        bound = L * (1.0 + 2.0 * h)
        rows.append({"pair": "grid", "ratio": ratio, "L": L, "bound": bound,
                     "ok": ratio <= bound})
    else:
        cfg = study.lsmc_config
        T = study.ladder[-1]
        est = [lsmc.price_finite(model, spec, x, T, cfg) for x in study.spots]
        pairs = list(zip(study.spots, est))
        for (xa, ea), (xb, eb) in zip(pairs[:-1], pairs[1:]):
            dist = float(np.linalg.norm(xa - xb))
            if dist == 0:
                continue
            ratio = abs(ea.value - eb.value) / dist
            bound = L + 3.0 * float(np.hypot(ea.std_error, eb.std_error)) / dist
            rows.append({"pair": f"{_spot_label(xa)}~{_spot_label(xb)}", "ratio": ratio, "L": L,
                         "bound": bound, "ok": ratio <= bound})
    return StudyResult("lipschitz", ["pair", "ratio", "L", "bound", "ok"], rows,
                       {"family": spec.family})


def run_growth_study(study: StudySpec) -> StudyResult:
    """``u_T(t, x) <= C (1 + |x|)`` at every node and time level of each ladder surface."""
    model, spec = study.model, study.payoff
    C = growth_constant(spec)
    grid = study.resolved_grid()
    norm = 1.0 + np.linalg.norm(grid.points(), axis=1)
    rows = []
    for T in study.ladder:
        surf = fd.solve_finite_horizon(model, spec, grid, T, study.steps(T))
        u = surf.values.reshape(surf.values.shape[0], -1)
        worst = float(np.max(u / (C * norm))) if C > 0 else float(np.max(np.abs(u)))
        peak = float(np.max(u))
        ok = bool(np.all(u <= C * norm + 1e-12)) if C > 0 else bool(np.all(np.abs(u) <= 1e-12))
        rows.append({"T": T, "C": C, "max_u": peak, "max_ratio": worst, "ok": ok})
    return StudyResult("growth", ["T", "C", "max_u", "max_ratio", "ok"], rows,
                       {"family": spec.family, "grid": grid.key()})
