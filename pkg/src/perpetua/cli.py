"""Command-line entry point.

Exit codes: 0 success, 1 assumption or verdict failure, 2 usage or parse
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import cache
from . import convergence_study as cs
from . import fd_solver as fd
from . import lsmc, oracles, premium
from .config import FORMATS, RunConfig, load_config
from .exceptions import (AssumptionViolation, EmptyExerciseRegion, ModelError, NumericalError,
                         ParseError, PerpetuaError)
from .market_model import validate
from .payoff import check_assumptions

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class Outcome:
    def __init__(self, rows, payload=None, passed=True):
        self.rows = rows
        self.payload = payload if payload is not None else {"rows": rows}
        self.passed = passed


def _num(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def _spot(x):
    x = np.asarray(x, dtype=float).ravel()
    return float(x[0]) if x.size == 1 else x.tolist()


def _perpetual(cfg: RunConfig, model, spec) -> fd.ValueFunction:
    g = cfg.section("grid")
    grid = cfg.grid(model, spec)
    opts = {"omega": g.get("omega", "auto"), "tol": g.get("tol"),
            "far_field": g.get("far_field", "auto"), "method": g.get("method", "psor"),
            "cross_stencil": g.get("cross_stencil", "seven_point")}
    key = None
    if g.get("cache_dir"):
        key = cache.cache_key(model, spec, grid, **opts)
        hit = cache.load(g["cache_dir"], key)
        if hit is not None:
            return hit
    vf = fd.solve_perpetual(model, spec, grid, **opts)
    if key is not None:
        cache.save(vf, g["cache_dir"], key)
    return vf


def _default_spots(cfg, section, model, spec):
    return cfg.spots(section, model, default=[spec.reference_point(model.dim).tolist()])


# --- commands -------------------------------------------------------------------


def cmd_validate(cfg: RunConfig) -> Outcome:
    rows = []
    try:
        model = cfg.model()
    except ModelError as exc:
        rows.append({"check": "model", "passed": False, "reason": str(exc)})
        return Outcome(rows, {"rows": rows}, passed=False)
    report = validate(model)
    for name, ok in report.checks.items():
        rows.append({"check": f"model.{name}", "passed": bool(ok), "reason": ""})
    spec = cfg.payoff()
    rep = check_assumptions(spec, model)
    labels = [("A1", rep.a1, "A1"), ("A2(a)", rep.a2a, "A2(a)"), ("A2(b)", rep.a2b, "A2(b)"),
              ("growth", rep.growth_342, "growth")]
    for name, ok, prefix in labels:
        reason = "; ".join(r for r in rep.reasons if r.startswith(prefix))
        rows.append({"check": name, "passed": bool(ok), "reason": reason})
    payload = {"rows": rows, "model": report.as_dict(), "assumptions": rep.as_dict()}
    return Outcome(rows, payload, passed=report.passed and rep.passed)


def cmd_price(cfg: RunConfig) -> Outcome:
    model, spec = cfg.model(), cfg.payoff()
    p = cfg.section("price")
    method = p.get("method", "pde" if model.dim <= 2 else "mc")
    horizon = p.get("horizon")
    spots = _default_spots(cfg, "price", model, spec)
    rows, extra = [], {}
    if method == "pde":
        if horizon is None:
            vf = _perpetual(cfg, model, spec)
            vals = np.asarray(vf(np.array(spots))).reshape(-1)
            b = vf.boundary.value if (vf.boundary is not None and model.dim == 1) else None
            for x, v in zip(spots, vals):
                rows.append({"x": _spot(x), "T": None, "value": float(v), "error": vf.residual,
                             "boundary": b})
            extra = {"sweeps": vf.sweeps, "omega": vf.omega, "solver": vf.method}
        else:
            steps = int(cfg.section("grid").get("steps", 500))
            surf = fd.solve_finite_horizon(model, spec, cfg.grid(model, spec, horizon), float(horizon),
                                           steps)
            vals = np.asarray(surf(np.array(spots))).reshape(-1)
            for x, v in zip(spots, vals):
                rows.append({"x": _spot(x), "T": float(horizon), "value": float(v), "error": None,
                             "boundary": None})
            extra = {"sweeps": surf.sweeps, "steps": steps}
    elif method == "mc":
        lc = cfg.lsmc()
        ls = cfg.section("lsmc")
        ladders = []
        for x in spots:
            if horizon is None:
                est = lsmc.price_perpetual_extrapolated(model, spec, x, lc,
                                                        target=float(ls.get("target", 0.05)),
                                                        T0=float(ls.get("T0", 1.0)),
                                                        T_cap=float(ls.get("T_cap", 1024.0)))
                ladders.append({"x": _spot(x), "ladder": est.details["ladder"]})
            else:
                est = lsmc.price_finite(model, spec, x, float(horizon), lc)
            rows.append({"x": _spot(x), "T": est.T, "value": est.value, "std_error": est.std_error,
                         "tail_bound": est.tail_bound, "error": est.error_bar})
        extra = {"ladders": ladders, "records": [
            {"x": r["x"], "value": r["value"], "std_error": r["std_error"],
             "tail_bound": r["tail_bound"]} for r in rows]}
    else:
        raise ParseError(f"unknown price method {method!r}")
    return Outcome(rows, {"rows": rows, "method": method, **extra})


def cmd_boundary(cfg: RunConfig) -> Outcome:
    model, spec = cfg.model(), cfg.payoff()
    horizon = cfg.section("price").get("horizon")
    rows = []
    if horizon is None or model.dim == 2:
        vf = _perpetual(cfg, model, spec)
        if vf.boundary is None:
            raise EmptyExerciseRegion("the exercise region is empty")
        for pt in vf.boundary.points:
            rows.append({"t": None, **{f"x_{i + 1}": float(c) for i, c in enumerate(pt)}})
    else:
        steps = int(cfg.section("grid").get("steps", 500))
        surf = fd.solve_finite_horizon(model, spec, cfg.grid(model, spec, horizon), float(horizon), steps)
        for j, t in enumerate(surf.times[:-1]):
            layer = fd.ValueFunction(surf.grid, surf.values[j], surf.psi, spec, 0.0, 0, "layer",
                                     surf.omega)
            try:
                b = fd.extract_boundary(layer).value
            except EmptyExerciseRegion:
                b = None
            rows.append({"t": float(t), "x_1": b})
    return Outcome(rows)


def cmd_premium(cfg: RunConfig) -> Outcome:
    model, spec = cfg.model(), cfg.payoff()
    p = cfg.section("premium")
    spots = _default_spots(cfg, "premium", model, spec)
    vf = _perpetual(cfg, model, spec)
    oracle = premium.ExerciseOracle(vf)
    rows, bounds = [], []
    ok_all = True
    for x in spots:
        est = premium.estimate_premium(model, spec, x, oracle, T_max=p.get("T_max"),
                                       dt=float(p.get("dt", 0.05)),
                                       n_paths=int(p.get("n_paths", 100_000)), seed=cfg.seed)
        v = float(np.asarray(vf(x[None, :])).reshape(-1)[0])
        tol = 3 * est.std_error + est.tail_remainder + 0.01 * v
        ok = abs(est.value - v) <= tol
        ok_all &= ok
        rows.append({"x": _spot(x), "premium": est.value, "std_error": est.std_error, "pde_value": v,
                     "tail_remainder": est.tail_remainder, "T_max": est.T_max, "tolerance": tol,
                     "verdict": "pass" if ok else "fail"})
        if p.get("bound"):
            rep = premium.check_bound_315(model, spec, x, vf, n_paths=int(p.get("n_paths", 50_000)),
                                          seed=cfg.seed, quadrature=bool(p.get("quadrature", False)))
            ok_all &= rep.verdict
            bounds.append({"x": _spot(x), **rep.as_dict()})
    return Outcome(rows, {"rows": rows, "bound": bounds}, passed=ok_all)


def cmd_study(cfg: RunConfig) -> Outcome:
    model, spec = cfg.model(), cfg.payoff()
    s = cfg.section("study")
    kind = s.get("kind", "rate")
    g = cfg.section("grid")
    grid = cfg.grid(model, spec) if model.dim <= 2 else None
    study = cs.StudySpec(model, spec, _default_spots(cfg, "study", model, spec),
                         ladder=s.get("ladder", [1.0, 2.0, 4.0, 8.0]), grid=grid,
                         method=s.get("method", "pde" if model.dim <= 2 else "mc"),
                         steps_per_year=int(s.get("steps_per_year", g.get("steps", 100))),
                         min_steps=int(s.get("min_steps", 200)),
                         max_steps=int(s.get("max_steps", 2000)),
                         lsmc_config=cfg.lsmc(), mc_target=float(s.get("target", 0.5)))
    runners = {"rate": cs.run_rate_study, "lipschitz": cs.run_lipschitz_study,
               "growth": cs.run_growth_study}
    if kind not in runners:
        raise ParseError(f"unknown study kind {kind!r}")
    res = runners[kind](study)
    rows = [{k: _num(v) for k, v in r.items()} for r in res.rows]
    return Outcome(rows, {"rows": rows, **res.as_dict()}, passed=res.passed)


def cmd_oracle(cfg: RunConfig) -> Outcome:
    model, spec = cfg.model(), cfg.payoff()
    o = cfg.section("oracle")
    kind = o.get("kind", "closed_form")
    spots = _default_spots(cfg, "oracle", model, spec)
    rows = []
    for x in spots:
        x0 = float(x[0])
        row = {"x": x0, "kind": kind}
        if kind == "closed_form":
            f = {"put": oracles.perpetual_put_closed_form,
                 "call": oracles.perpetual_call_closed_form}.get(spec.family)
            if f is None:
                raise ParseError("closed forms exist for one-asset puts and calls only")
            v, b = f(model, spec.strike, x0)
            row.update(value=float(v), boundary=b)
        elif kind == "binomial":
            row["value"] = oracles.binomial_american(model, spec, x0, float(o.get("horizon", 1.0)),
                                                     int(o.get("steps", 5000)))
        elif kind == "european":
            if spec.family not in ("put", "call"):
                raise ParseError("European closed form needs a one-asset put or call")
            row["value"] = float(oracles.black_scholes(model, spec.strike, x0,
                                                       float(o.get("horizon", 1.0)), spec.family))
        elif kind == "snell":
            tree = oracles.build_tree(model, x0, float(o.get("horizon", 1.0)), int(o.get("steps", 500)))
            env = oracles.discrete_snell(model, spec, tree)
            row.update(value=env.root, compensator_total=float(np.nansum(env.increments)))
        else:
            raise ParseError(f"unknown oracle kind {kind!r}")
        rows.append(row)
    return Outcome(rows)


HELP = {"validate": "check the model and the payoff assumptions",
        "price": "price by PDE (d <= 2) or least-squares Monte Carlo",
        "boundary": "extract the exercise boundary",
        "premium": "Monte Carlo early exercise premium against the PDE value",
        "study": "horizon-rate, Lipschitz or growth study",
        "oracle": "closed-form, binomial, European or Snell-envelope reference values"}
COMMANDS = {"validate": cmd_validate, "price": cmd_price, "boundary": cmd_boundary,
            "premium": cmd_premium, "study": cmd_study, "oracle": cmd_oracle}


# --- output ------------------------------------------------------------------------


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.10g}"
    if isinstance(v, list):
        return " ".join(_cell(c) for c in v)
    return str(v)


def _columns(rows):
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    return cols


def render(command: str, cfg: RunConfig, outcome: Outcome, fmt: str) -> str:
    if fmt == "json":
        doc = {"command": command, "config_hash": cfg.hash, "seed": cfg.seed, "config": cfg.data,
               "verdict": "pass" if outcome.passed else "fail", "result": outcome.payload}
        return json.dumps(doc, indent=2, default=_num) + "\n"
    cols = _columns(outcome.rows)
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(f"# config_hash={cfg.hash} seed={cfg.seed}\n")
        w = csv.writer(buf)
        w.writerow(cols)
        for r in outcome.rows:
            w.writerow([_cell(_num(r.get(c))) for c in cols])
        return buf.getvalue()
    cells = [[_cell(_num(r.get(c))) for c in cols] for r in outcome.rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
    lines = [f"{command}  config_hash={cfg.hash[:16]}  seed={cfg.seed}",
             "  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    lines.append("verdict: " + ("pass" if outcome.passed else "fail"))
    return "\n".join(lines) + "\n"


def _threads():
    raw = os.environ.get("PERPETUA_THREADS")
    if not raw:
        return
    n = int(raw)
    if n < 1:
        raise ValueError("PERPETUA_THREADS must be a positive integer")
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perpetua",
                                     description="American option pricing: PDE, Monte Carlo and oracles.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=HELP[name])
        sp.add_argument("config", help="YAML or JSON configuration file")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration entry, e.g. model.rate=0.03")
        sp.add_argument("--output", "-o", help="write the report here instead of stdout")
        sp.add_argument("--format", choices=FORMATS, help="output format (default from config or table)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        _threads()
        cfg = load_config(args.config, args.overrides)
        outcome = COMMANDS[args.command](cfg)
        code = EXIT_OK if outcome.passed else EXIT_FAIL
    except AssumptionViolation as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (PerpetuaError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = render(args.command, cfg, outcome, args.format or cfg.format)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
