import numpy as np
import pytest

from perpetua import oracles
from perpetua.exceptions import UnsupportedDimension, ZeroRate
from perpetua.market_model import MarketModel
from perpetua.payoff import PayoffSpec, phi, psi

PUT = PayoffSpec("put", strike=100.0)
BINOMIAL_5000 = 6.090224690881521  # T=1 American put at x=100


@pytest.fixture(scope="module")
def model():
    return MarketModel.from_volatility(0.05, [0.0], [0.2])


def test_negative_root_without_dividend(model):
    roots = oracles.characteristic_roots(model)
    assert roots.minus == pytest.approx(-2.5, abs=1e-14)
    assert roots.plus == pytest.approx(1.0, abs=1e-14)
    assert roots.residual(model) < 1e-12


@pytest.mark.parametrize("r, q, s", [(0.05, 0.1, 0.2), (0.02, 0.0, 0.4), (0.08, 0.03, 0.15)])
def test_roots_solve_the_quadratic(r, q, s):
    m = MarketModel.from_volatility(r, [q], [s])
    roots = oracles.characteristic_roots(m)
    assert roots.minus < 0 <= roots.plus
    assert roots.residual(m) < 1e-12


def test_closed_form_put(model):
    v, b = oracles.perpetual_put_closed_form(model, 100.0, 100.0)
    assert b == pytest.approx(71.42857142857143, rel=1e-14)
    assert v == pytest.approx(28.571428571428573 * 1.4**-2.5, rel=1e-14)
    assert v == pytest.approx(12.32, abs=5e-3)


def test_value_matching_and_decay(model):
    _, b = oracles.perpetual_put_closed_form(model, 100.0, 1.0)
    v_b, _ = oracles.perpetual_put_closed_form(model, 100.0, b)
    assert v_b == pytest.approx(100.0 - b, rel=1e-14)
    v_far, _ = oracles.perpetual_put_closed_form(model, 100.0, 1e8)
    assert v_far < 1e-10


def test_smooth_pasting(model):
    _, b = oracles.perpetual_put_closed_form(model, 100.0, 1.0)
    h = 1e-6
    vp = oracles.perpetual_put_closed_form(model, 100.0, [b, b + h])[0]
    assert (vp[1] - vp[0]) / h == pytest.approx(-1.0, abs=1e-6)


def test_stationary_equation_residual(model):
    """``L_BS V - r V + Phi(x, V) = 0`` with exact derivatives of the closed form."""
    r, a = 0.05, 0.04
    lam = oracles.characteristic_roots(model).minus
    xs = np.geomspace(20.0, 500.0, 100)
    v, b = oracles.perpetual_put_closed_form(model, 100.0, xs)
    cont = xs > b
    d1 = np.where(cont, lam * v / xs, -1.0)
    d2 = np.where(cont, lam * (lam - 1) * v / xs**2, 0.0)
    res = 0.5 * a * xs**2 * d2 + r * xs * d1 - r * v + phi(PUT, model, xs, v)
    assert np.max(np.abs(res)) < 1e-8


def test_zero_rate_rejected():
    m = MarketModel.from_volatility(0.0, [0.0], [0.2])
    with pytest.raises(ZeroRate):
        oracles.perpetual_put_closed_form(m, 100.0, 100.0)


def test_call_closed_form_needs_dividend(model):
    with pytest.raises(ValueError):
        oracles.perpetual_call_closed_form(model, 100.0, 100.0)
    m = MarketModel.from_volatility(0.05, [0.1], [0.2])
    v, b = oracles.perpetual_call_closed_form(m, 100.0, np.array([50.0, 1e4]))
    assert b > 100.0
    assert v[1] == pytest.approx(1e4 - 100.0)
    assert 0.0 < v[0] < 50.0


def test_one_dimensional_only():
    m2 = MarketModel.from_volatility(0.05, [0.0, 0.0], [0.2, 0.2])
    with pytest.raises(UnsupportedDimension):
        oracles.characteristic_roots(m2)
    with pytest.raises(UnsupportedDimension):
        oracles.perpetual_put_closed_form(m2, 100.0, 100.0)


def test_black_scholes_parity():
    m = MarketModel.from_volatility(0.05, [0.02], [0.25])
    c = oracles.black_scholes(m, 100.0, 110.0, 2.0, "call")
    p = oracles.black_scholes(m, 100.0, 110.0, 2.0, "put")
    assert c - p == pytest.approx(110.0 * np.exp(-0.04) - 100.0 * np.exp(-0.1), rel=1e-12)


def test_black_scholes_reference_value(model):
    # textbook at-the-money put, r=5%, sigma=20%, T=1
    assert oracles.black_scholes(model, 100.0, 100.0, 1.0, "put") == pytest.approx(5.573526, abs=1e-6)


def test_tree_probabilities_and_moments(model):
    tree = oracles.build_tree(model, 100.0, 1.0, 400)
    assert 0.0 < tree.p_up < 1.0
    mean = (2 * tree.p_up - 1) * tree.log_step
    var = tree.log_step**2 - mean**2
    assert mean == pytest.approx(0.03 * tree.dt, rel=1e-12)
    assert var == pytest.approx(0.04 * tree.dt, rel=tree.dt)
    assert tree.prices(0)[0] == pytest.approx(100.0)
    assert tree.prices(3).size == 4


def test_binomial_needs_steps(model):
    with pytest.raises(ValueError):
        oracles.binomial_american(model, PUT, 100.0, 1.0, 50)


def test_binomial_tiny_maturity_is_payoff(model):
    assert oracles.binomial_american(model, PUT, 80.0, 1e-8, 100) == pytest.approx(20.0, abs=1e-5)


def test_binomial_european_limit(model):
    tree_euro = oracles.binomial_american(model, PUT, 100.0, 1.0, 5000, exercise=False)
    bs = oracles.black_scholes(model, 100.0, 100.0, 1.0, "put")
    assert tree_euro == pytest.approx(bs, rel=5e-4)


def test_binomial_american_frozen(model):
    assert oracles.binomial_american(model, PUT, 100.0, 1.0, 5000) == pytest.approx(BINOMIAL_5000, rel=1e-12)


def test_binomial_cauchy(model):
    vals = [oracles.binomial_american(model, PUT, 100.0, 1.0, m) for m in (500, 1000, 2000, 4000)]
    gaps = np.abs(np.diff(vals))
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-1] < 2e-3


def test_binomial_rejects_two_assets():
    m2 = MarketModel.from_volatility(0.05, [0.0, 0.0], [0.2, 0.2])
    with pytest.raises(UnsupportedDimension):
        oracles.binomial_american(m2, PayoffSpec("max_call", strike=100.0, dim=2), 100.0, 1.0, 100)


def test_snell_envelope_structure(model):
    tree = oracles.build_tree(model, 100.0, 1.0, 300)
    env = oracles.discrete_snell(model, PUT, tree)
    assert env.root == oracles.binomial_american(model, PUT, 100.0, 1.0, 300)
    assert np.array_equal(env.values[-1], psi(PUT, tree.prices(300)))
    valid = ~np.isnan(env.values)
    assert np.all(env.values[valid] >= env.payoff[valid])
    inc = env.increments
    ok = ~np.isnan(inc)
    assert np.all(inc[ok] >= 0.0)
    above = ok & (env.values[:-1] > env.payoff[:-1])
    assert np.all(inc[above] == 0.0)


def test_snell_envelope_zero_payoff(model):
    tree = oracles.build_tree(model, 100.0, 1.0, 100)
    env = oracles.discrete_snell(model, PayoffSpec("zero", dim=1), tree)
    assert np.nanmax(np.abs(env.values)) == 0.0
    assert np.nanmax(np.abs(env.increments)) == 0.0


def test_lognormal_quadrature_reproduces_black_scholes(model):
    f = lambda s: psi(PUT, s)  # noqa: E731
    ev = oracles.expected_value(model, f, 100.0, 1.0, breakpoints=[100.0])
    assert np.exp(-0.05) * ev == pytest.approx(oracles.black_scholes(model, 100.0, 100.0, 1.0), rel=1e-9)


def test_discounted_time_integral_of_price():
    m = MarketModel.from_volatility(0.05, [0.04], [0.3])
    f = lambda s: np.asarray(s, dtype=float)  # noqa: E731
    # int e^{-rt} x e^{(r-delta)t} dt = x / delta
    assert oracles.discounted_time_integral(m, f, 100.0) == pytest.approx(2500.0, rel=1e-6)
