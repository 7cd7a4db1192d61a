import json

import numpy as np
import pytest

from perpetua import fd_solver as fd
from perpetua import premium
from perpetua.exceptions import OracleGridMismatch, UnsupportedDimension
from perpetua.market_model import MarketModel
from perpetua.oracles import perpetual_put_closed_form
from perpetua.payoff import PayoffSpec, phi, psi_minus

PUT = PayoffSpec("put", strike=100.0)


@pytest.fixture(scope="module")
def put_oracle(put_vf):
    return premium.ExerciseOracle(put_vf)


def test_oracle_membership(put_oracle, put_vf):
    inside = put_oracle.contains(np.array([[40.0], [60.0], [70.0], [73.0], [100.0], [500.0]]))
    assert inside.tolist() == [True, True, True, False, False, False]
    # deterministic and restricted to the money region
    assert np.array_equal(inside, put_oracle.contains(np.array([[40.0], [60.0], [70.0], [73.0],
                                                                 [100.0], [500.0]])))
    assert not put_oracle.contains(np.array([[1e4]]))[0]
    assert put_oracle.contains(np.array([[1.0]]))[0]  # off grid on the deep side
    assert put_oracle.value(np.array([[100.0]])) == pytest.approx(float(put_vf(100.0)))


def test_oracle_grid_mismatch(put_model, put_oracle):
    with pytest.raises(OracleGridMismatch):
        put_oracle.check(put_model, PUT, np.array([5000.0]))
    with pytest.raises(OracleGridMismatch):
        put_oracle.check(put_model, PayoffSpec("call", strike=100.0), np.array([100.0]))


def test_time_grid():
    t = premium.time_grid(10.0, 0.05)
    assert t[0] == 0.0 and t[-1] == 10.0
    assert np.allclose(np.diff(t[t <= 2.0]), 0.05)
    assert np.all(np.diff(t) > 0) and np.diff(t)[-2] > 0.05


def test_zero_payoff_premium(put_model):
    vf = fd.solve_perpetual(put_model, PayoffSpec("zero", dim=1), fd.LogGrid.from_prices([10.0], [400.0], 64))
    est = premium.estimate_premium(put_model, vf.spec, 100.0, premium.ExerciseOracle(vf), n_paths=1000)
    assert est.value == 0.0 and est.tail_remainder == 0.0


@pytest.mark.parametrize("x", [100.0, 40.0])
def test_premium_reproduces_value(put_model, put_oracle, x):
    exact, _ = perpetual_put_closed_form(put_model, 100.0, x)
    est = premium.estimate_premium(put_model, PUT, x, put_oracle, n_paths=20_000, seed=2)
    assert est.value >= 0 and est.tail_remainder >= 0
    assert abs(est.value - exact) <= 3 * est.std_error + est.tail_remainder + 0.01 * exact
    # default horizon puts the tail below 0.1% of the value
    assert est.tail_remainder < 1e-3 * exact * 1.0001


def test_exercise_tolerance_halving(put_model, put_vf):
    a = premium.estimate_premium(put_model, PUT, 100.0, premium.ExerciseOracle(put_vf, 1e-6),
                                 n_paths=10_000, seed=5)
    b = premium.estimate_premium(put_model, PUT, 100.0, premium.ExerciseOracle(put_vf, 5e-7),
                                 n_paths=10_000, seed=5)
    assert abs(a.value - b.value) < 1e-3 * a.value


def test_step_halving_moves_little(put_model, put_oracle):
    a = premium.estimate_premium(put_model, PUT, 100.0, put_oracle, dt=0.05, n_paths=20_000, seed=6)
    b = premium.estimate_premium(put_model, PUT, 100.0, put_oracle, dt=0.025, n_paths=20_000, seed=6)
    assert abs(a.value - b.value) < 0.01 * a.value + 3 * np.hypot(a.std_error, b.std_error)


def test_per_path_output(tmp_path, put_model, put_oracle):
    est = premium.estimate_premium(put_model, PUT, 100.0, put_oracle, T_max=5.0, n_paths=1000,
                                   keep_paths=True)
    assert est.per_path.shape == (1000,)
    assert est.value == pytest.approx(est.per_path.mean())
    est.per_path_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "path_id,integral" and len(lines) == 1001
    assert set(est.as_dict()) == {"value", "std_error", "T_max", "tail_remainder", "n_paths"}


def test_phi_dominated_by_source(put_model, put_vf):
    xs = np.geomspace(10.0, 400.0, 2000)
    v = put_vf(xs)
    assert np.all(phi(PUT, put_model, xs, v) <= psi_minus(PUT, put_model, xs))


def test_bound_holds_with_slack(put_model, put_vf):
    rep = premium.check_bound_315(put_model, PUT, 100.0, put_vf, n_paths=20_000, seed=1)
    assert rep.inequality_holds and rep.premium_matches and rep.verdict
    assert rep.lhs <= 0.5 * rep.rhs + 3 * rep.joint_se
    out = rep.as_dict()
    assert {"lhs", "rhs", "std_errors", "verdict"} <= set(out)
    assert out["verdict"] == "pass"
    json.dumps(out)


def test_bound_right_side_against_quadrature(put_model, put_vf):
    rep = premium.check_bound_315(put_model, PUT, 150.0, put_vf, T_max=60.0, n_paths=20_000,
                                  seed=3, quadrature=True)
    assert np.isfinite(rep.lhs) and np.isfinite(rep.rhs)
    assert rep.quadrature_matches


def test_bound_zero_payoff(put_model):
    vf = fd.solve_perpetual(put_model, PayoffSpec("zero", dim=1), fd.LogGrid.from_prices([10.0], [400.0], 64))
    rep = premium.check_bound_315(put_model, vf.spec, 100.0, vf, n_paths=1000)
    assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.verdict


def test_k_representation_without_reflection():
    # call without dividends: Psi^- vanishes on the money region, so K stays at 0
    m = MarketModel.from_volatility(0.05, [0.0], [0.2])
    rep = premium.check_k_representation(m, PayoffSpec("call", strike=100.0), T=1.0, n_paths=500,
                                         levels=(100, 200))
    assert max(rep.compensator_mean) < 1e-12
    assert max(rep.phi_integral_mean) == 0.0
    assert rep.minimality_ok and rep.positivity_ok


def test_k_representation_tree_values(put_model):
    rep = premium.check_k_representation(put_model, PUT, T=1.0, n_paths=1000, levels=(100, 200, 400))
    assert rep.minimality_ok and rep.positivity_ok
    assert all(d > 0 for d in rep.discrepancies)
    assert np.all(np.diff(rep.discrepancies) < 0)
    assert rep.as_dict()["verdict"] in ("pass", "fail")


def test_k_representation_one_dimensional_only():
    m = MarketModel.from_volatility(0.05, [0.0, 0.0], [0.2, 0.2])
    with pytest.raises(UnsupportedDimension):
        premium.check_k_representation(m, PayoffSpec("min_put", strike=100.0, dim=2), T=1.0)
