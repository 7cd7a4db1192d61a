"""Convex Lipschitz payoff families and the exercise source term ``Psi^-``.

For a payoff ``psi`` the generator image is ``Psi = -r psi + L_BS psi`` where
``L_BS = sum (r - delta_i) x_i d_i + 1/2 sum a_ij x_i x_j d_ij``.  On the region
``{psi > 0}`` every family below is piecewise linear, so ``Psi^- = max(-Psi, 0)``
has a closed form; on ``{psi = 0}`` the payoff is locally zero and so is ``Psi^-``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatch

FAMILIES = ("call", "put", "index_call", "index_put", "max_call", "min_put", "multi_strike", "zero")
BOUNDED = {"put", "index_put", "min_put", "zero"}
# payoffs that vanish for large prices; the exercise region sits at low prices
PUT_TYPE = {"put", "index_put", "min_put"}


@dataclass(frozen=True, eq=False)
class PayoffSpec:
    """A payoff family with its parameters.

    ``strike`` is used by every family except ``multi_strike`` (``strikes``) and
    ``zero``.  ``weights`` applies to index options; ``dim`` fixes the dimension
    of ``max_call``/``min_put`` when it cannot be inferred.
    """

    family: str
    strike: float | None = None
    weights: np.ndarray | None = None
    strikes: np.ndarray | None = None
    dim: int | None = field(default=None)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown payoff family {self.family!r}; expected one of {FAMILIES}")
        d = self.dim
        if self.family in ("call", "put"):
            d = 1
        if self.family in ("index_call", "index_put"):
            if self.weights is None:
                raise ValueError(f"{self.family} requires weights")
            w = np.atleast_1d(np.array(self.weights, dtype=float))
            if np.any(w <= 0):
                raise ValueError("index weights must be positive")
            w.flags.writeable = False
            object.__setattr__(self, "weights", w)
            d = w.size
        if self.family == "multi_strike":
            if self.strikes is None:
                raise ValueError("multi_strike requires strikes")
            k = np.atleast_1d(np.array(self.strikes, dtype=float))
            if np.any(k <= 0):
                raise ValueError("strikes must be positive")
            k.flags.writeable = False
            object.__setattr__(self, "strikes", k)
            d = k.size
        elif self.family != "zero":
            if self.strike is None or not self.strike > 0:
                raise ValueError(f"{self.family} requires a positive strike")
            object.__setattr__(self, "strike", float(self.strike))
        object.__setattr__(self, "dim", d)

    @classmethod
    def from_mapping(cls, cfg) -> "PayoffSpec":
        cfg = dict(cfg)
        family = cfg.pop("family")
        return cls(family, **cfg)

    def to_dict(self) -> dict:
        out = {"family": self.family}
        if self.strike is not None:
            out["strike"] = self.strike
        if self.weights is not None:
            out["weights"] = self.weights.tolist()
        if self.strikes is not None:
            out["strikes"] = self.strikes.tolist()
        if self.dim is not None and self.family in ("max_call", "min_put", "zero"):
            out["dim"] = self.dim
        return out

    @property
    def is_bounded(self) -> bool:
        return self.family in BOUNDED

    @property
    def is_put_type(self) -> bool:
        return self.family in PUT_TYPE

    @property
    def total_strike(self) -> float:
        """Strike scale used for tolerances and grid placement."""
        if self.family == "multi_strike":
            return float(np.max(self.strikes))
        if self.family == "zero":
            return 1.0
        return float(self.strike)

    def reference_point(self, d: int) -> np.ndarray:
        """A price vector at the money, used to centre grids."""
        if self.family in ("index_call", "index_put"):
            return np.full(d, self.strike / float(np.sum(self.weights)))
        if self.family == "multi_strike":
            return self.strikes.copy()
        return np.full(d, self.total_strike)

    def __call__(self, x):
        return psi(self, x)


def _points(spec: PayoffSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if spec.dim == 1:
        if x.ndim == 0 or x.shape[-1] != 1:
            x = x[..., None]
        return x
    if x.ndim == 0:
        raise DimensionMismatch(f"{spec.family} expects {spec.dim}-dimensional states")
    if spec.dim is not None and x.shape[-1] != spec.dim:
        raise DimensionMismatch(f"{spec.family} expects dimension {spec.dim}, got {x.shape[-1]}")
    return x


def psi(spec: PayoffSpec, x) -> np.ndarray:
    """Payoff at ``x`` (trailing axis = assets).  Returns shape ``x.shape[:-1]``."""
    x = _points(spec, x)
    f = spec.family
    if f == "call":
        return np.maximum(x[..., 0] - spec.strike, 0.0)
    if f == "put":
        return np.maximum(spec.strike - x[..., 0], 0.0)
    if f == "index_call":
        return np.maximum(x @ spec.weights - spec.strike, 0.0)
    if f == "index_put":
        return np.maximum(spec.strike - x @ spec.weights, 0.0)
    if f == "max_call":
        return np.maximum(x.max(axis=-1) - spec.strike, 0.0)
    if f == "min_put":
        return np.maximum(spec.strike - x.min(axis=-1), 0.0)
    if f == "multi_strike":
        return np.maximum((x - spec.strikes).max(axis=-1), 0.0)
    return np.zeros(x.shape[:-1])


def _check_model_dim(spec, model, x):
    if x.shape[-1] != model.dim:
        raise DimensionMismatch(f"model has dimension {model.dim}, state has {x.shape[-1]}")


def psi_minus(spec: PayoffSpec, model, x) -> np.ndarray:
    """Closed-form ``Psi^-`` on ``{psi > 0}``; zero where the payoff vanishes.

    Ties in the max/min families go to the first index.
    """
    x = _points(spec, x)
    _check_model_dim(spec, model, x)
    r, dv = model.rate, model.dividends
    f = spec.family
    if f == "zero":
        return np.zeros(x.shape[:-1])
    if f == "call":
        val = dv[0] * x[..., 0] - r * spec.strike
    elif f == "put":
        val = r * spec.strike - dv[0] * x[..., 0]
    elif f == "index_call":
        val = x @ (spec.weights * dv) - r * spec.strike
    elif f == "index_put":
        val = r * spec.strike - x @ (spec.weights * dv)
    elif f == "max_call":
        i = np.argmax(x, axis=-1)[..., None]
        val = np.take_along_axis(x, i, -1)[..., 0] * dv[i[..., 0]] - r * spec.strike
    elif f == "min_put":
        i = np.argmin(x, axis=-1)[..., None]
        val = r * spec.strike - np.take_along_axis(x, i, -1)[..., 0] * dv[i[..., 0]]
    else:  # multi_strike
        i = np.argmax(x - spec.strikes, axis=-1)
        xi = np.take_along_axis(x, i[..., None], -1)[..., 0]
        val = dv[i] * xi - r * spec.strikes[i]
    return np.where(psi(spec, x) > 0, np.maximum(val, 0.0), 0.0)


def phi(spec: PayoffSpec, model, x, y) -> np.ndarray:
    """Reflection intensity ``Psi^-(x) 1{y <= psi(x)}``."""
    return np.where(np.asarray(y) <= psi(spec, x), psi_minus(spec, model, x), 0.0)


def lipschitz_constant(spec: PayoffSpec) -> float:
    """Lipschitz constant of ``psi`` for the Euclidean norm on prices.

    Max, min and multi-strike payoffs are 1-Lipschitz for the sup norm, hence
    for the Euclidean norm too; index payoffs have constant ``|w|``.
    """
    if spec.family == "zero":
        return 0.0
    if spec.family in ("index_call", "index_put"):
        return float(np.linalg.norm(spec.weights))
    return 1.0


def growth_constant(spec: PayoffSpec) -> float:
    """``C = max(L, psi(0))`` so that ``psi(x) <= C (1 + |x|)``."""
    d = spec.dim or 1
    return max(lipschitz_constant(spec), float(psi(spec, np.zeros(d))))


def psi_minus_bounded(spec: PayoffSpec, model) -> bool:
    """Whether ``Psi^-`` is bounded: always for put-type payoffs, and for
    call-type payoffs exactly when no dividend yield is positive."""
    if spec.family == "zero" or spec.is_put_type:
        return True
    return not bool(np.any(model.dividends > 0))


def psi_minus_bound(spec: PayoffSpec, model) -> tuple[float, float]:
    """Constants ``(c0, c1)`` with ``Psi^-(x) <= c0 + c1 |x|``."""
    r, dv = model.rate, model.dividends
    f = spec.family
    if f == "zero":
        return 0.0, 0.0
    if f in ("put", "index_put", "min_put"):
        return r * spec.strike, 0.0
    if f == "call":
        return 0.0, float(dv[0])
    if f == "index_call":
        return 0.0, float(np.sum(spec.weights * dv))
    return 0.0, float(np.max(dv))


@dataclass
class AssumptionReport:
    a1: bool
    a2a: bool
    a2b: bool
    growth_342: bool
    reasons: list[str]

    @property
    def passed(self) -> bool:
        return self.a1 and self.a2a and self.a2b and self.growth_342

    def as_dict(self) -> dict:
        return {"a1": self.a1, "a2a": self.a2a, "a2b": self.a2b,
                "growth_342": self.growth_342, "passed": self.passed, "reasons": list(self.reasons)}


def check_assumptions(spec: PayoffSpec, model) -> AssumptionReport:
    """Decide (A1), (A2)(a), (A2)(b) and the ``Psi^-`` growth condition.

    (A2) is decided by its standard sufficient conditions: with ``r > 0``,
    (a) holds for bounded payoffs or when every dividend yield is positive, and
    (b) holds for bounded ``Psi^-`` or for linear-growth ``Psi^-`` with positive
    dividend yields.
    """
    reasons = []
    a1 = True
    if spec.dim is not None and spec.dim != model.dim:
        a1 = False
        reasons.append(f"A1: payoff dimension {spec.dim} differs from model dimension {model.dim}")
    else:
        reasons.append("A1: payoff family is nonnegative, convex and Lipschitz "
                       f"(L={lipschitz_constant(spec):.6g})")

    r_pos = model.rate > 0
    all_div = bool(np.all(model.dividends > 0))
    if not r_pos:
        a2a = False
        reasons.append("A2(a): requires r>0")
    elif spec.is_bounded:
        a2a = True
        reasons.append("A2(a): psi bounded and r>0")
    elif all_div:
        a2a = True
        reasons.append("A2(a): psi Lipschitz and all delta_i>0 with r>0")
    else:
        a2a = False
        reasons.append("A2(a): unbounded psi requires all delta_i>0")

    if not r_pos:
        a2b = False
        reasons.append("A2(b): requires r>0")
    elif psi_minus_bounded(spec, model):
        a2b = True
        reasons.append("A2(b): Psi^- bounded and r>0")
    elif all_div:
        a2b = True
        reasons.append("A2(b): Psi^- of linear growth and all delta_i>0 with r>0")
    else:
        a2b = False
        reasons.append("A2(b): unbounded Psi^- requires all delta_i>0")

    reasons.append("growth: Psi^- has linear growth for every supported family")
    return AssumptionReport(a1, a2a, a2b, True, reasons)
