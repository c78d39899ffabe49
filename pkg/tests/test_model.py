"""Tests for the sklearn-style estimator facade."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hmgcp.model import HMGCP
from hmgcp.simulate import preset, simulate_dataset


@pytest.fixture(scope="module")
def d1_data():
    return simulate_dataset(preset("paper-5.1-d1").simulation, seed=5)


@pytest.fixture(scope="module")
def fitted(d1_data):
    ds, _ = d1_data
    hyp = preset("paper-5.1-d1").simulation.hyperparams
    est = HMGCP(
        n_basis=2,
        kernel_params=[(k.variance, k.precision) for k in hyp.kernels],
        weights=hyp.weights,
        noise_vars=list(hyp.noise_vars),
        n_inducing=30,
        n_quad=100,
        max_iter=10,
        update_hyperparams=False,
        seed=0,
    )
    return est.fit(ds)


class TestSklearnProtocol:
    def test_get_params_round_trip(self):
        est = HMGCP(n_basis=3, max_iter=7, tol=1e-5)
        params = est.get_params()
        assert params["n_basis"] == 3 and params["max_iter"] == 7
        est2 = HMGCP(**params)
        assert est2.get_params() == params

    def test_set_params(self):
        est = HMGCP()
        est.set_params(n_inducing=12, monitor="elbo")
        assert est.n_inducing == 12 and est.monitor == "elbo"

    def test_clone(self, fitted):
        fresh = clone(fitted)
        assert not hasattr(fresh, "latent_")
        a, b = fresh.get_params(), fitted.get_params()
        assert a.keys() == b.keys()
        for key in a:
            assert np.array_equal(a[key], b[key]), key

    def test_unfitted_predict_raises(self):
        with pytest.raises(NotFittedError):
            HMGCP().predict([[1.0]])


class TestFitPredict:
    def test_fit_sets_attributes(self, fitted):
        assert fitted.n_iter_ >= 1
        assert fitted.task_types_ == ("regression", "classification", "point_process")
        assert fitted.latent_.mean.shape == (90,)
        assert fitted.report_.monitor

    def test_predict_shapes_and_ranges(self, fitted):
        x = np.linspace(0, 100, 33).reshape(-1, 1)
        reg = fitted.predict(x, task=0)
        cls = fitted.predict(x, task=1)
        cox = fitted.predict(x, task=2)
        assert reg.shape == cls.shape == cox.shape == (33,)
        assert np.all((cls >= 0) & (cls <= 1))
        assert np.all(cox >= 0)

    def test_predict_latent_moments(self, fitted):
        mu, var = fitted.predict_latent(np.linspace(0, 100, 9).reshape(-1, 1), task=0)
        assert mu.shape == var.shape == (9,)
        assert np.all(var >= 0)

    def test_1d_input_promoted(self, fitted):
        a = fitted.predict(np.array([10.0, 20.0]), task=0)
        b = fitted.predict(np.array([[10.0], [20.0]]), task=0)
        np.testing.assert_array_equal(a, b)

    def test_bad_input_dimension(self, fitted):
        with pytest.raises(ValueError, match="points"):
            fitted.predict(np.zeros((4, 3)), task=0)

    def test_sample_reported_shape(self, fitted):
        draws = fitted.sample_reported(np.linspace(0, 100, 5).reshape(-1, 1),
                                       task=2, n_draws=50, seed=1)
        assert draws.shape == (50, 5)
        assert np.all(draws >= 0)

    def test_wrong_training_input_type(self):
        with pytest.raises(TypeError):
            HMGCP().fit(np.zeros((5, 2)))

    def test_determinism(self, d1_data):
        ds, _ = d1_data
        kwargs = dict(max_iter=4, update_hyperparams=False, seed=3)
        a = HMGCP(**kwargs).fit(ds)
        b = HMGCP(**kwargs).fit(ds)
        np.testing.assert_array_equal(a.latent_.mean, b.latent_.mean)
        assert a.report_.deterministic_fields() == b.report_.deterministic_fields()

    def test_default_initialization_fits(self, d1_data):
        # estimator defaults must produce a working fit without explicit
        # hyperparameters
        ds, _ = d1_data
        est = HMGCP(max_iter=3, update_hyperparams=False).fit(ds)
        assert est.n_iter_ == 3
