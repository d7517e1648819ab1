import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hwlsfp.estimators import LsfpPrecoder
from hwlsfp.exceptions import ContractError
from hwlsfp.harness import preset_profile
from hwlsfp.performance import equal_power_slp


@pytest.fixture(scope="module")
def problem(desk_stats, desk_system):
    return desk_stats, preset_profile("moderate", desk_system.n_antennas), desk_system


def test_params():
    est = LsfpPrecoder(precoder="MR", max_iters=7)
    params = est.get_params()
    assert params["precoder"] == "MR" and params["max_iters"] == 7
    est.set_params(precoder="DU", eps=1e-3)
    assert est.precoder == "DU" and est.eps == 1e-3
    assert clone(est).get_params() == est.get_params()


def test_not_fitted():
    with pytest.raises(NotFittedError):
        LsfpPrecoder().predict()


def test_fit_predict_score(problem):
    est = LsfpPrecoder(precoder="DA", n_mc=200).fit(problem)
    se = est.predict()
    assert se.shape == (2, 2) and np.all(se > 0)
    assert est.score() == pytest.approx(se.sum())
    assert est.weights_.is_feasible(problem[2].rho_d)
    assert est.n_iter_ == est.trace_.n_iter
    slp = est.predict(equal_power_slp(problem[2]))
    assert est.score() >= slp.sum() - 1e-12
    assert est.predict_sinr().shape == (2, 2)


def test_slp_scheme(problem):
    est = LsfpPrecoder(scheme="SLP", n_mc=100).fit(problem)
    assert est.trace_ is None and est.n_iter_ == 0
    np.testing.assert_array_equal(est.weights_.gamma, equal_power_slp(problem[2]).gamma)


@pytest.mark.parametrize("bad", [{"precoder": "ZF"}, {"scheme": "X"}, {"n_mc": 0}, {"eps": -1.0}])
def test_invalid_params(problem, bad):
    with pytest.raises(ValueError):
        LsfpPrecoder(**bad).fit(problem)


def test_bad_input(problem, desk_system):
    with pytest.raises(ContractError):
        LsfpPrecoder().fit((problem[0], problem[1]))
    with pytest.raises(ContractError):
        LsfpPrecoder().fit((problem[0], "hw", desk_system))
    with pytest.raises(ContractError):
        LsfpPrecoder().fit((problem[0], problem[1], desk_system.replace(n_antennas=8)))
