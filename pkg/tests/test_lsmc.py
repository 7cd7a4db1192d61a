import numpy as np
import pytest

from perpetua import lsmc
from perpetua.exceptions import AssumptionViolation, HorizonExplosion, RegressionSingular, TooFewPaths
from perpetua.market_model import MarketModel
from perpetua.payoff import PayoffSpec

PUT = PayoffSpec("put", strike=100.0)
V_PERP_100 = 12.320032868  # closed-form perpetual put
FD_T1_100 = 6.090224690881521  # binomial oracle, T=1, x=100


def test_config_invariants():
    with pytest.raises(TooFewPaths):
        lsmc.LsmcConfig(n_paths=999)
    with pytest.raises(ValueError):
        lsmc.LsmcConfig(degree=4)
    with pytest.raises(ValueError):
        lsmc.LsmcConfig(n_paths=1001, antithetic=True)
    cfg = lsmc.LsmcConfig(n_paths=2000, degree=3, seed=5)
    assert lsmc.LsmcConfig.from_mapping(cfg.to_dict()) == cfg


def test_basis_size_and_singularity():
    spec = PayoffSpec("max_call", strike=100.0, dim=2)
    x = np.full((10, 2), 100.0) + np.arange(10)[:, None] * [1.0, 2.0]
    assert lsmc.basis(spec, x, 2).shape == (10, 6)
    assert lsmc.basis(PUT, x[:, :1], 3).shape == (10, 4)
    with pytest.raises(RegressionSingular):
        lsmc._fit(np.ones((10, 2)), np.arange(10.0))


def test_nested_schedule():
    d = lsmc.nested_dates(32.0, 0.5, 8.0)
    assert d[0] == 0.0 and d[-1] == 32.0
    assert np.allclose(np.diff(d[d <= 8.0]), 0.5)
    assert np.allclose(np.diff(d[(d >= 8.0) & (d <= 16.0)]), 1.0)
    # truncations are nested
    assert set(lsmc.nested_dates(16.0, 0.5, 8.0)) <= set(d)


def test_zero_payoff_prices_to_zero(put_model):
    est = lsmc.price_finite(put_model, PayoffSpec("zero", dim=1), 100.0, 1.0,
                            lsmc.LsmcConfig(n_paths=2000, n_exercise_dates=10))
    assert est.value == 0.0 and est.std_error == 0.0


def test_finite_put_against_oracle(put_model):
    cfg = lsmc.LsmcConfig(n_paths=200_000, n_exercise_dates=50, seed=3)
    est = lsmc.price_finite(put_model, PUT, 100.0, 1.0, cfg)
    assert est.is_lower_bound
    assert abs(est.value - FD_T1_100) <= 3 * est.std_error + 0.05
    # lower-bound property
    assert est.value <= FD_T1_100 + 3 * est.std_error


def test_determinism(put_model):
    cfg = lsmc.LsmcConfig(n_paths=5000, n_exercise_dates=20, seed=17)
    a = lsmc.price_finite(put_model, PUT, 90.0, 1.0, cfg)
    b = lsmc.price_finite(put_model, PUT, 90.0, 1.0, cfg)
    assert a.value == b.value and a.std_error == b.std_error


def test_antithetic_reduces_error(put_model):
    plain = lsmc.price_finite(put_model, PUT, 100.0, 1.0, lsmc.LsmcConfig(20_000, 20, seed=1))
    anti = lsmc.price_finite(put_model, PUT, 100.0, 1.0, lsmc.LsmcConfig(20_000, 20, seed=1, antithetic=True))
    assert anti.std_error < plain.std_error
    assert abs(anti.value - plain.value) < 3 * np.hypot(anti.std_error, plain.std_error)


def test_two_asset_max_call_beats_european():
    m = MarketModel.from_volatility(0.05, [0.1, 0.1], [0.2, 0.2])
    spec = PayoffSpec("max_call", strike=100.0, dim=2)
    est = lsmc.price_finite(m, spec, [100.0, 100.0], 1.0, lsmc.LsmcConfig(20_000, 25, seed=2))
    assert est.value > est.details["european"]
    assert est.value - est.details["european"] > 3 * est.details["premium_se"]


def test_record_is_json_ready(put_model):
    est = lsmc.PriceEstimate(1.0, 0.1, 2.0, tail_bound=0.5)
    rec = est.record(PUT, put_model, 100.0, 7)
    assert rec["family"] == "put" and rec["x"] == [100.0] and rec["seed"] == 7
    assert est.error_bar == pytest.approx(0.8)


def test_closed_form_tails(put_model, call_model):
    cfg = lsmc.LsmcConfig(n_paths=1000)
    tb = lsmc.tail_bound(put_model, PUT, 120.0, 20.0, cfg)  # rT = 1
    assert tb.closed_form and tb.value == pytest.approx(200.0, rel=1e-14)
    call = PayoffSpec("call", strike=100.0)
    tb = lsmc.tail_bound(call_model, call, 80.0, 10.0, cfg)  # delta T = 1
    assert tb.value == pytest.approx(200.0, rel=1e-14)
    assert float(lsmc.tail_bound(put_model, PayoffSpec("zero", dim=1), 100.0, 1.0, cfg)) == 0.0


def test_tail_requires_discounting():
    m = MarketModel.from_volatility(0.0, [0.0], [0.2])
    with pytest.raises(AssumptionViolation):
        lsmc.tail_bound(m, PUT, 100.0, 1.0, lsmc.LsmcConfig(n_paths=1000))


def test_simulated_tail_behaviour():
    m = MarketModel.from_volatility(0.05, [0.0, 0.0], [0.2, 0.3])
    spec = PayoffSpec("min_put", strike=100.0, dim=2)
    cfg = lsmc.LsmcConfig(n_paths=4000, seed=1)
    tbs = lsmc.tail_bounds(m, spec, [100.0, 100.0], [1.0, 4.0, 16.0, 64.0], cfg)
    vals = [t.value for t in tbs]
    assert not tbs[0].closed_form
    assert np.all(np.diff(vals) < 0)
    # e times a bounded-payoff tail can never exceed 2 e K
    assert vals[0] <= 2 * np.e * 100.0
    fine = lsmc.tail_bound(m, spec, [100.0, 100.0], 4.0, cfg, dt_tail=0.025)
    assert abs(fine.value - vals[1]) <= 0.01 * vals[1] + 3 * np.hypot(fine.std_error, tbs[1].std_error)


def test_perpetual_put_extrapolation(put_model):
    cfg = lsmc.LsmcConfig(n_paths=20_000, n_exercise_dates=20, seed=4)
    est = lsmc.price_perpetual_extrapolated(put_model, PUT, 100.0, cfg, target=0.05)
    assert est.tail_bound < 0.05
    assert abs(est.value - V_PERP_100) <= 3 * est.std_error + est.tail_bound + 0.05
    ladder = est.details["ladder"]
    vals = np.array([r["value"] for r in ladder])
    ses = np.array([r["std_error"] for r in ladder])
    first4 = slice(0, 4)  # T = 1, 2, 4, 8
    assert [r["T"] for r in ladder[first4]] == [1.0, 2.0, 4.0, 8.0]
    assert np.all(np.diff(vals[first4]) >= -2 * ses[1:4])


def test_horizon_explosion(put_model):
    cfg = lsmc.LsmcConfig(n_paths=1000, n_exercise_dates=4)
    with pytest.raises(HorizonExplosion):
        lsmc.price_perpetual_extrapolated(put_model, PUT, 100.0, cfg, target=1e-3, T_cap=4.0)


def test_extrapolation_needs_positive_rate():
    m = MarketModel.from_volatility(0.0, [0.0], [0.2])
    with pytest.raises(AssumptionViolation):
        lsmc.price_perpetual_extrapolated(m, PUT, 100.0, lsmc.LsmcConfig(n_paths=1000))


@pytest.mark.parametrize("which", ["put", "call"])
def test_empirical_rate_bound(which, put_model, put_vf, call_model, call_vf):
    if which == "put":
        model, spec, vf, x = put_model, PUT, put_vf, 120.0
    else:
        model, spec, vf, x = call_model, PayoffSpec("call", strike=100.0), call_vf, 80.0
    v = float(vf(x))
    cfg = lsmc.LsmcConfig(n_paths=20_000, n_exercise_dates=50, seed=8)
    for T in (1.0, 2.0, 4.0, 8.0):
        est = lsmc.price_finite(model, spec, x, T, cfg)
        tb = lsmc.tail_bound(model, spec, x, T, cfg)
        assert v - est.value <= tb.upper + 3 * est.std_error
        assert est.value <= v + 3 * est.std_error
