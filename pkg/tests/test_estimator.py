import numpy as np
import pytest
from sklearn.base import clone

from genspr import SPRRegressor, solve
from genspr.stopping import StopConfig


def test_params_and_clone():
    est = SPRRegressor(rule="LC", k_max=30)
    params = est.get_params()
    assert params["rule"] == "LC" and params["k_max"] == 30
    c = clone(est)
    assert c.get_params() == params and c is not est


def test_fit_matches_solver(gravity100):
    p = gravity100
    est = SPRRegressor(noise_precision=p.M_inv, prior_cov=p.N).fit(p.A.to_dense(), p.b)
    ref = solve(p, StopConfig("DP"))
    assert est.k_stop_ == ref.k_stop
    assert np.allclose(est.coef_, ref.x, rtol=1e-12, atol=1e-14)
    assert est.n_features_in_ == 100
    assert est.n_iter_ == len(est.history_["phi_bar"])
    pred = est.predict(p.A.to_dense())
    assert np.allclose(pred, p.A.apply(est.coef_))
    assert est.score(p.A.to_dense(), p.b) > 0.9


def test_operator_input(gravity100):
    p = gravity100
    dense = SPRRegressor(noise_precision=p.M_inv, prior_cov=p.N).fit(p.A.to_dense(), p.b)
    for X in (p.A, p.A.aslinearoperator()):
        est = SPRRegressor(noise_precision=p.M_inv, prior_cov=p.N).fit(X, p.b)
        assert np.allclose(est.coef_, dense.coef_, rtol=1e-12, atol=1e-14)
        assert np.allclose(est.predict(X), dense.predict(p.A.to_dense()))


def test_rejections(gravity50):
    p = gravity50
    with pytest.raises(ValueError):
        SPRRegressor(rule="best").fit(p.A, p.b)
    with pytest.raises(ValueError):
        SPRRegressor(tau=1.0).fit(p.A, p.b)
    with pytest.raises(Exception):
        SPRRegressor().predict(p.A)
    est = SPRRegressor(k_max=5).fit(p.A.to_dense(), p.b)
    with pytest.raises(ValueError):
        est.predict(np.ones((3, 7)))
