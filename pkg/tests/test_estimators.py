import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from perpetua import FiniteHorizonAmericanPDE, LSMCPricer, PerpetualAmericanPDE

PUT = {"family": "put", "strike": 100.0}


def test_perpetual_estimator():
    est = PerpetualAmericanPDE(payoff=PUT, bounds=([10.0], [400.0]), n_nodes=1024).fit()
    v = est.predict([[60.0], [100.0]])
    assert v.shape == (2,)
    assert v[0] == pytest.approx(40.0, abs=1e-3)  # log-space interpolation of a linear payoff
    assert v[1] == pytest.approx(12.32, abs=0.02)
    assert est.exercise_region([[60.0], [100.0]]).tolist() == [True, False]
    assert est.boundary_.value == pytest.approx(71.43, rel=0.02)
    assert est.n_features_in_ == 1


def test_not_fitted():
    with pytest.raises(NotFittedError):
        PerpetualAmericanPDE(payoff=PUT).predict([[100.0]])


def test_params_and_clone():
    est = PerpetualAmericanPDE(payoff=PUT, rate=0.03, n_nodes=256)
    params = est.get_params()
    assert params["rate"] == 0.03 and params["n_nodes"] == 256
    twin = clone(est).set_params(rate=0.04)
    assert twin.rate == 0.04 and est.rate == 0.03


def test_bad_input_rejected():
    est = PerpetualAmericanPDE(payoff=PUT, bounds=([10.0], [400.0]), n_nodes=128).fit()
    with pytest.raises(ValueError):
        est.predict([[100.0, 1.0]])
    with pytest.raises(ValueError):
        est.predict([[-5.0]])


def test_finite_horizon_estimator():
    est = FiniteHorizonAmericanPDE(payoff=PUT, bounds=([10.0], [400.0]), n_nodes=1024,
                                   maturity=1.0, n_steps=300).fit()
    assert est.predict([[100.0]])[0] == pytest.approx(6.0902, rel=2e-3)
    assert est.predict([[100.0]], t=0.5)[0] < est.predict([[100.0]])[0]


def test_two_asset_estimator():
    est = PerpetualAmericanPDE(payoff={"family": "max_call", "strike": 100.0, "dim": 2},
                               dividends=(0.1, 0.1), vols=(0.2, 0.2),
                               bounds=([5.0, 5.0], [1000.0, 1000.0]), n_nodes=65).fit()
    v = est.predict(np.array([[100.0, 100.0], [300.0, 50.0]]))
    assert v[1] == pytest.approx(200.0, rel=2e-3)  # exercise region, up to interpolation error
    assert v[0] > 0


def test_lsmc_estimator():
    est = LSMCPricer(payoff=PUT, maturity=1.0, n_paths=20_000, n_exercise_dates=25, seed=1)
    est.fit([[100.0]])
    v = est.predict([[100.0], [90.0]])
    assert abs(v[0] - 6.0902) < 3 * est.std_error_[0] + 0.08
    assert v[1] > v[0]
    with pytest.raises(ValueError):
        est.fit([[100.0], [90.0]])
