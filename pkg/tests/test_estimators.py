import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from degparab.estimators import CollarTransformer, DegenerateParabolicSolver
from degparab.exceptions import CheckFailed, EllipticityRefusal


def test_transformer_params_and_clone():
    est = CollarTransformer(s=2.0, chart="blended")
    assert est.get_params()["s"] == 2.0
    twin = clone(est).set_params(s=3.0)
    assert twin.s == 3.0 and est.s == 2.0


@pytest.mark.parametrize("chart", ["sigma", "blended"])
def test_transformer_round_trip(chart):
    est = CollarTransformer(s=1.5, chart=chart).fit()
    y = np.geomspace(1e-3, 1.0, 25)
    t = est.transform(y)
    np.testing.assert_allclose(est.inverse_transform(t), y, rtol=1e-12)


def test_transformer_sigma_values():
    t = CollarTransformer(s=1.0).fit_transform(np.array([1.0, np.exp(-2.0)]))
    np.testing.assert_allclose(t, [0.0, 2.0], atol=1e-14)


def test_transformer_weak_and_unfitted():
    with pytest.raises(NotFittedError):
        CollarTransformer().transform([0.5])
    with pytest.raises(CheckFailed):
        CollarTransformer(s=0.5).fit()


def test_solver_estimator():
    est = DegenerateParabolicSolver(t_trunc=6.0, n_t=32, n_z=8, dt=0.05, horizon=0.2).fit()
    f = lambda tau, t, z: np.exp(-((t - 2.0) ** 2)) * np.cos(z)  # noqa: E731
    u = est.predict(f)
    assert u.shape == (33, 8)
    np.testing.assert_array_equal(u, est.solve(f).final.values)
    assert est.mr_quotient(f) > 0


def test_solver_estimator_refuses_comparison():
    with pytest.raises(EllipticityRefusal):
        DegenerateParabolicSolver(operator="comparison").fit()
    with pytest.raises(NotFittedError):
        DegenerateParabolicSolver().predict(None)
