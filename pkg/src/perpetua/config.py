"""Run configuration: YAML/JSON files with strict keys, overrides and hashing."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

import numpy as np
import yaml

from .exceptions import ParseError
from .fd_solver import LogGrid
from .lsmc import LsmcConfig
from .market_model import MarketModel
from .payoff import PayoffSpec

SCHEMA = {
    "model": {"rate", "dividends", "vols", "correlation", "cov_matrix", "vol_matrix"},
    "payoff": {"family", "strike", "weights", "strikes", "dim"},
    "grid": {"n", "lower", "upper", "omega", "tol", "far_field", "cross_stencil", "steps",
             "method", "cache_dir"},
    "price": {"method", "horizon", "spots"},
    "lsmc": {"n_paths", "n_exercise_dates", "degree", "antithetic", "target", "T0", "T_cap"},
    "premium": {"spots", "n_paths", "dt", "T_max", "bound", "quadrature"},
    "study": {"kind", "ladder", "spots", "method", "steps_per_year", "min_steps", "max_steps",
              "target"},
    "oracle": {"kind", "spots", "horizon", "steps"},
    "seed": None,
    "format": None,
}
FORMATS = ("csv", "json", "table")


@dataclass
class RunConfig:
    """Parsed configuration; ``data`` holds the validated nested mapping."""

    data: dict

    @property
    def seed(self) -> int:
        return int(self.data.get("seed", 0))

    @property
    def format(self) -> str:
        return self.data.get("format", "table")

    def section(self, name: str) -> dict:
        return dict(self.data.get(name) or {})

    @property
    def hash(self) -> str:
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":"), default=_jsonable)
        return hashlib.sha256(blob.encode()).hexdigest()

    def model(self) -> MarketModel:
        m = self.section("model")
        if "rate" not in m or "dividends" not in m:
            raise ParseError("model section needs 'rate' and 'dividends'")
        if "cov_matrix" in m or "vol_matrix" in m:
            return MarketModel.from_mapping(m)
        if "vols" not in m:
            raise ParseError("model section needs 'vols', 'cov_matrix' or 'vol_matrix'")
        return MarketModel.from_volatility(m["rate"], m["dividends"], m["vols"], m.get("correlation"))

    def payoff(self) -> PayoffSpec:
        p = self.section("payoff")
        if "family" not in p:
            raise ParseError("payoff section needs 'family'")
        try:
            return PayoffSpec.from_mapping(p)
        except TypeError as exc:
            raise ParseError(str(exc)) from exc

    def grid(self, model, spec, horizon=None) -> LogGrid:
        g = self.section("grid")
        if "lower" in g or "upper" in g:
            if not ("lower" in g and "upper" in g):
                raise ParseError("grid needs both 'lower' and 'upper' price bounds")
            n = g.get("n", 2048 if model.dim == 1 else 129)
            return LogGrid.from_prices(np.atleast_1d(g["lower"]), np.atleast_1d(g["upper"]), n)
        return LogGrid.default(model, spec, n=g.get("n"), horizon=horizon)

    def lsmc(self) -> LsmcConfig:
        s = {k: v for k, v in self.section("lsmc").items() if k in ("n_paths", "n_exercise_dates",
                                                                     "degree", "antithetic")}
        return LsmcConfig(seed=self.seed, **s)

    def spots(self, section: str, model, default=None) -> list[np.ndarray]:
        raw = self.section(section).get("spots", default)
        if raw is None:
            raise ParseError(f"section '{section}' needs 'spots'")
        out = []
        for s in raw:
            arr = np.atleast_1d(np.asarray(s, dtype=float))
            if arr.size == 1 and model.dim > 1:
                arr = np.full(model.dim, arr[0])
            if arr.size != model.dim:
                raise ParseError(f"spot {s!r} does not match model dimension {model.dim}")
            out.append(arr)
        return out


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _check(data) -> dict:
    if not isinstance(data, dict):
        raise ParseError("configuration must be a mapping")
    for key, val in data.items():
        if key not in SCHEMA:
            raise ParseError(f"unknown top-level key {key!r}")
        allowed = SCHEMA[key]
        if allowed is None:
            continue
        if val is None:
            continue
        if not isinstance(val, dict):
            raise ParseError(f"section {key!r} must be a mapping")
        bad = set(val) - allowed
        if bad:
            raise ParseError(f"unknown key(s) in section {key!r}: {sorted(bad)}")
    if "seed" in data and not isinstance(data["seed"], int):
        raise ParseError("seed must be an integer")
    if "format" in data and data["format"] not in FORMATS:
        raise ParseError(f"format must be one of {FORMATS}")
    return data


def apply_override(data: dict, item: str) -> None:
    """Apply ``dotted.key=value``; the value is parsed as YAML."""
    if "=" not in item:
        raise ParseError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ParseError(f"cannot parse override value {raw!r}") from exc
    parts = key.strip().split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ParseError(f"override {key!r} descends into a non-mapping")
    node[parts[-1]] = value


def parse_config(text: str, overrides=()) -> RunConfig:
    """Parse YAML (or JSON) text.  A previous JSON report is accepted too: its
    embedded ``config`` is re-used, which reproduces the run."""
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed configuration: {exc}") from exc
    if isinstance(data, dict) and "config" in data and "config_hash" in data:
        data = data["config"]
    data = copy.deepcopy(data) if data is not None else {}
    if not isinstance(data, dict):
        raise ParseError("configuration must be a mapping")
    for item in overrides:
        apply_override(data, item)
    return RunConfig(_check(data))


def load_config(path, overrides=()) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, overrides)
