"""Scikit-learn style estimator facade over the coordinate-ascent engine.

The estimator follows sklearn conventions (constructor stores parameters
verbatim, `fit` returns self, fitted attributes carry a trailing
underscore, `get_params`/`set_params` work with `sklearn.base.clone`), so
it composes with the wider ecosystem even though the training input is a
HeterogeneousDataset rather than an (X, y) pair.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .data import HeterogeneousDataset
from .inference import (
    FitConfig,
    fit,
    posterior_functions,
    predictive,
    sample_reported,
)
from .kernels import LmcHyperparams, RbfParams

__all__ = ["HMGCP"]

DEFAULT_KERNEL = (1.0, 0.01)
DEFAULT_WEIGHT = 0.5
DEFAULT_NOISE = 0.1


class HMGCP(BaseEstimator):
    """Heterogeneous multi-task Gaussian Cox process model.

    Parameters
    ----------
    n_basis : number of shared latent GP basis functions.
    kernel_params : optional list of (variance, precision) pairs, one per
        basis function; precision is the inverse squared lengthscale.
    weights : optional (n_tasks, n_basis) initial mixing matrix.
    noise_vars : optional initial noise variance per regression task.
    n_inducing : inducing-lattice size (int, or per-dimension counts).
    n_quad : quadrature node count (int, or per-dimension counts).
    max_iter, tol : sweep limit and relative monitor tolerance.
    update_hyperparams : refresh kernels/weights/noise during fitting.
    hyper_every : run the hyperparameter refresh every this many sweeps.
    inner_iters : quasi-Newton iteration cap per refresh.
    monitor : "tll" (training log-likelihood) or "elbo" (restricted bound).
    seed : RNG seed for the variational initialization.
    """

    def __init__(self, n_basis=2, kernel_params=None, weights=None, noise_vars=None,
                 n_inducing=30, n_quad=100, max_iter=50, tol=1e-3,
                 update_hyperparams=True, hyper_every=1, inner_iters=25,
                 monitor="tll", seed=0):
        self.n_basis = n_basis
        self.kernel_params = kernel_params
        self.weights = weights
        self.noise_vars = noise_vars
        self.n_inducing = n_inducing
        self.n_quad = n_quad
        self.max_iter = max_iter
        self.tol = tol
        self.update_hyperparams = update_hyperparams
        self.hyper_every = hyper_every
        self.inner_iters = inner_iters
        self.monitor = monitor
        self.seed = seed

    def _initial_hyperparams(self, dataset):
        kernel_params = self.kernel_params or [DEFAULT_KERNEL] * self.n_basis
        if len(kernel_params) != self.n_basis:
            raise ValueError("kernel_params must supply one pair per basis function")
        weights = self.weights
        if weights is None:
            weights = np.full((dataset.n_tasks, self.n_basis), DEFAULT_WEIGHT)
        noise = self.noise_vars
        if noise is None:
            noise = [DEFAULT_NOISE] * dataset.n_regression
        return LmcHyperparams(
            kernels=[RbfParams(variance=v, precision=p) for v, p in kernel_params],
            weights=np.asarray(weights, float),
            noise_vars=noise,
        )

    def fit(self, dataset, y=None):
        """Fit the variational posterior on a HeterogeneousDataset."""
        if not isinstance(dataset, HeterogeneousDataset):
            raise TypeError("fit expects a HeterogeneousDataset")
        config = FitConfig(
            hyperparams=self._initial_hyperparams(dataset),
            n_inducing=self.n_inducing,
            n_quad=self.n_quad,
            max_iter=self.max_iter,
            tol=self.tol,
            seed=self.seed,
            update_hyperparams=self.update_hyperparams,
            hyper_every=self.hyper_every,
            inner_iters=self.inner_iters,
            monitor=self.monitor,
        )
        result = fit(dataset, config)
        self.latent_ = result.state
        self.gamma_ = result.gamma
        self.hyperparams_ = result.hyperparams
        self.grid_ = result.grid
        self.rule_ = result.rule
        self.report_ = result.report
        self.domain_ = dataset.domain
        self.task_types_ = dataset.task_types
        self.n_iter_ = result.report.iterations
        self.converged_ = result.report.converged
        return self

    def _check_is_fitted(self):
        if not hasattr(self, "latent_"):
            raise NotFittedError("this HMGCP instance is not fitted yet; call fit first")

    def _check_X(self, X):
        X = np.asarray(X, float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[1] != self.domain_.dims:
            raise ValueError(f"X must be an (n, {self.domain_.dims}) array of points")
        return X

    def predict(self, X, task=0):
        """Posterior mean of the reported function of one task at points X:
        latent mean (regression), class probability (classification) or
        intensity (point process)."""
        self._check_is_fitted()
        X = self._check_X(X)
        summary = posterior_functions(
            self.latent_, self.gamma_, self.grid_, self.hyperparams_, task, X
        )
        return summary["reported"]

    def predict_latent(self, X, task=0):
        """Gaussian moments (mean, variance) of the latent function at X."""
        self._check_is_fitted()
        X = self._check_X(X)
        return predictive(self.latent_, self.grid_, self.hyperparams_, task, X)

    def sample_reported(self, X, task=0, n_draws=100, seed=0):
        """Posterior draws of the reported function, shape (n_draws, len(X))."""
        self._check_is_fitted()
        X = self._check_X(X)
        return sample_reported(
            self.latent_, self.gamma_, self.grid_, self.hyperparams_, task, X,
            n_draws=n_draws, seed=seed,
        )
