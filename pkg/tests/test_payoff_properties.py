"""Randomised invariants of every payoff family, 10^4 cases per property."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from perpetua.market_model import MarketModel
from perpetua.payoff import PayoffSpec, check_assumptions, phi, psi, psi_minus

N_CASES = 10_000
PROFILE = settings(max_examples=N_CASES, deadline=None, database=None, derandomize=True,
                   suppress_health_check=list(HealthCheck))

prices = st.floats(min_value=1e-2, max_value=1e4, allow_nan=False, allow_infinity=False)
strikes = st.floats(min_value=1.0, max_value=500.0)
rates = st.floats(min_value=0.0, max_value=0.2)
divs = st.one_of(st.just(0.0), st.floats(min_value=0.0, max_value=0.2))


@st.composite
def payoffs(draw):
    family = draw(st.sampled_from(["call", "put", "index_call", "index_put", "max_call",
                                   "min_put", "multi_strike"]))
    if family in ("call", "put"):
        return PayoffSpec(family, strike=draw(strikes))
    d = draw(st.integers(min_value=2, max_value=3))
    if family in ("index_call", "index_put"):
        w = draw(st.lists(st.floats(min_value=0.05, max_value=3.0), min_size=d, max_size=d))
        return PayoffSpec(family, strike=draw(strikes), weights=w)
    if family == "multi_strike":
        return PayoffSpec(family, strikes=draw(st.lists(strikes, min_size=d, max_size=d)))
    return PayoffSpec(family, strike=draw(strikes), dim=d)


@st.composite
def cases(draw):
    spec = draw(payoffs())
    d = spec.dim
    vols = draw(st.lists(st.floats(min_value=0.05, max_value=0.6), min_size=d, max_size=d))
    model = MarketModel.from_volatility(draw(rates), draw(st.lists(divs, min_size=d, max_size=d)), vols)
    x = np.array(draw(st.lists(prices, min_size=d, max_size=d)))
    return spec, model, x


@PROFILE
@given(cases(), st.floats(-1e4, 1e4), st.floats(-1e4, 1e4))
def test_phi_is_monotone_in_its_value_argument(case, y1, y2):
    spec, model, x = case
    p1, p2 = float(phi(spec, model, x, y1)), float(phi(spec, model, x, y2))
    assert (p1 - p2) * (y1 - y2) <= 0.0


@PROFILE
@given(cases(), st.lists(prices, min_size=3, max_size=3), st.floats(0.0, 1.0))
def test_psi_is_convex(case, other, lam):
    spec, _, x = case
    y = np.resize(np.array(other), x.size)
    mid = psi(spec, lam * x + (1 - lam) * y)
    chord = lam * psi(spec, x) + (1 - lam) * psi(spec, y)
    assert mid <= chord + 1e-9 * (1.0 + abs(chord))
    assert psi(spec, x) >= 0.0


@PROFILE
@given(cases())
def test_psi_minus_is_nonnegative(case):
    spec, model, x = case
    v = float(psi_minus(spec, model, x))
    assert v >= 0.0
    assert np.isfinite(v)
    if psi(spec, x) == 0.0:
        assert v == 0.0


def _psi_minus_bounded(spec, model):
    # put-type sources are capped by r K; call-type ones grow with any dividend
    return spec.family in ("put", "index_put", "min_put") or bool(np.all(model.dividends == 0))


@PROFILE
@given(cases())
def test_assumption_gating(case):
    spec, model, _ = case
    rep = check_assumptions(spec, model)
    r_pos = model.rate > 0
    all_div = bool(np.all(model.dividends > 0))
    bounded = spec.family in ("put", "index_put", "min_put")
    assert rep.a1
    assert rep.a2a == (r_pos and (bounded or all_div))
    assert rep.a2b == (r_pos and (_psi_minus_bounded(spec, model) or all_div))
    assert rep.growth_342
    assert rep.passed == (rep.a2a and rep.a2b)
