"""Mean-field coordinate ascent for the heterogeneous multi-task model.

One sweep updates, in order: the sigmoid-augmentation moments at
classification samples and at point-process events, the marginal intensity
of the latent marked point process at the quadrature nodes, the Gamma
posterior over each intensity upper bound, and finally the joint Gaussian
posterior over all inducing values. Kernel hyperparameters and regression
noise variances are refreshed after the variational block when enabled.

All per-sweep quantities derived from the latent posterior (predictive mean
g-bar and root second moment g-tilde at data points and quadrature nodes)
are computed once at the top of the sweep and shared by every update in
that sweep.
"""

import json
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag, cho_solve

from . import __version__
from .data import Domain, HeterogeneousDataset
from .kernels import (
    CholeskyError,
    InducingGrid,
    LmcHyperparams,
    RbfParams,
    _chol_with_jitter,
    build_inducing_grid,
    grid_from_points,
    task_kernel_matrix,
)
from .quadrature import QuadratureRule, gauss_legendre
from .rng import RNG_ID, make_rng
from .special import digamma, log_sigmoid, pg_mean, sigmoid

__all__ = [
    "LatentPosterior",
    "GammaPosterior",
    "AugmentationCache",
    "FitConfig",
    "FitReport",
    "FitResult",
    "DivergenceError",
    "predictive",
    "tilde_g",
    "build_cache",
    "update_pg_classification",
    "update_pg_pointprocess",
    "update_poisson_intensity",
    "update_lambda_bar",
    "task_precision_blocks",
    "update_latent",
    "initial_state",
    "fit",
    "posterior_functions",
    "sample_reported",
    "training_loglik",
    "restricted_elbo",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_FORMAT",
]

CHECKPOINT_FORMAT = "hmgcp-ckpt-1"

# Gamma shape floor for a point-process task with no events and vanishing
# latent mass; keeps the posterior proper.
ALPHA_FLOOR = 1e-3


class DivergenceError(RuntimeError):
    """Fit diverged (non-finite intensity or monitor). Carries the last
    valid state in `state`, `gamma`, `hyperparams`, `report` when raised
    from `fit`."""

    def __init__(self, message, state=None, gamma=None, hyperparams=None, report=None):
        super().__init__(message)
        self.state = state
        self.gamma = gamma
        self.hyperparams = hyperparams
        self.report = report


@dataclass(frozen=True)
class LatentPosterior:
    """Gaussian posterior over all inducing values, task-major block layout."""

    mean: np.ndarray        # (M*I,)
    cov: np.ndarray         # (M*I, M*I), symmetric PSD
    n_inducing: int
    task_counts: tuple      # (I_r, I_c, I_p)

    @property
    def n_tasks(self):
        return int(sum(self.task_counts))

    def task_mean(self, i):
        m = self.n_inducing
        return self.mean[i * m:(i + 1) * m]

    def task_cov(self, i):
        m = self.n_inducing
        return self.cov[i * m:(i + 1) * m, i * m:(i + 1) * m]

    def task_type(self, i):
        i_r, i_c, i_p = self.task_counts
        if i < 0 or i >= i_r + i_c + i_p:
            raise IndexError(f"task index {i} out of range")
        if i < i_r:
            return "regression"
        if i < i_r + i_c:
            return "classification"
        return "point_process"


@dataclass(frozen=True)
class GammaPosterior:
    """Gamma(alpha_i, rate beta_i) posterior per point-process task."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, float))
        beta = np.atleast_1d(np.asarray(self.beta, float))
        if np.any(alpha <= 0) or np.any(beta <= 0):
            raise ValueError("Gamma parameters must be strictly positive")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    def mean(self):
        return self.alpha / self.beta

    def log_mean(self):
        """E[log intensity bound] = psi(alpha) - log(beta)."""
        return digamma(self.alpha) - np.log(self.beta)


@dataclass
class AugmentationCache:
    """Per-sweep working quantities shared by the coordinate updates.

    g-bar (predictive mean) and g-tilde (root second moment) are cached at
    every task's observation locations and, for point-process tasks, at the
    quadrature nodes. The update steps fill in the augmentation moments:
    E[omega] at classification samples and events, the node-wise marginal
    intensity of the latent marked process, its omega-weighted first moment,
    and the integrated intensity `capacity` (one value per point-process
    task).
    """

    data_mean: tuple = ()
    data_tilde: tuple = ()
    node_mean: tuple = ()
    node_tilde: tuple = ()
    omega_cls: tuple = ()
    tilt_cls: tuple = ()
    omega_pp: tuple = ()
    tilt_pp: tuple = ()
    lam1: np.ndarray = None
    intensity_nodes: tuple = ()
    omega_intensity_nodes: tuple = ()
    capacity: np.ndarray = None


class ClipCounter:
    """Counts negative predictive variances clipped to zero."""

    def __init__(self):
        self.count = 0


def predictive(state, grid, hyp, task, points, clip_counter=None):
    """Gaussian moments of the task-`task` latent function at `points`.

    mu = k_*^T K_i^{-1} m_i
    var = k_xx - k_*^T K_i^{-1} k_* + k_*^T K_i^{-1} Sigma_i K_i^{-1} k_*

    Variances are clipped at zero from below; clip events are counted on
    `clip_counter` when given.
    """
    if not 0 <= task < state.n_tasks:
        raise IndexError(f"task index {task} out of range")
    points = np.atleast_2d(np.asarray(points, float))
    if points.shape[0] == 0:
        return np.zeros(0), np.zeros(0)
    k_star = task_kernel_matrix(hyp, task, grid.points, points)  # (M, n)
    a = grid.task_solve(task, k_star)
    mu = a.T @ state.task_mean(task)
    quad_prior = np.sum(k_star * a, axis=0)
    quad_post = np.sum(a * (state.task_cov(task) @ a), axis=0)
    var = hyp.task_variance(task) - quad_prior + quad_post
    if clip_counter is not None:
        clip_counter.count += int(np.sum(var < 0))
    return mu, np.maximum(var, 0.0)


def tilde_g(mu, var):
    """Root second moment sqrt(mu^2 + var)."""
    var = np.asarray(var, float)
    if np.any(var < 0):
        raise ValueError("variance must be nonnegative")
    out = np.sqrt(np.asarray(mu, float) ** 2 + var)
    return out if out.ndim else float(out)


def build_cache(state, dataset, grid, hyp, rule, clip_counter=None):
    """Evaluate g-bar / g-tilde at every data point and quadrature node."""
    data_mean, data_tilde = [], []
    for i in range(dataset.n_tasks):
        mu, var = predictive(state, grid, hyp, i, dataset.task_points(i), clip_counter)
        data_mean.append(mu)
        data_tilde.append(tilde_g(mu, var))
    node_mean, node_tilde = [], []
    offset = dataset.n_regression + dataset.n_classification
    for k in range(dataset.n_point_process):
        mu, var = predictive(state, grid, hyp, offset + k, rule.nodes, clip_counter)
        node_mean.append(mu)
        node_tilde.append(tilde_g(mu, var))
    return AugmentationCache(
        data_mean=tuple(data_mean),
        data_tilde=tuple(data_tilde),
        node_mean=tuple(node_mean),
        node_tilde=tuple(node_tilde),
    )


def update_pg_classification(cache, dataset):
    """E[omega] at every classification sample: pg_mean(1, g-tilde)."""
    omega, tilt = [], []
    for k in range(dataset.n_classification):
        c = cache.data_tilde[dataset.n_regression + k]
        omega.append(pg_mean(1.0, c))
        tilt.append(c)
    cache.omega_cls = tuple(omega)
    cache.tilt_cls = tuple(tilt)
    return cache.omega_cls


def update_pg_pointprocess(cache, dataset):
    """E[omega] at every point-process event: pg_mean(1, g-tilde)."""
    offset = dataset.n_regression + dataset.n_classification
    omega, tilt = [], []
    for k in range(dataset.n_point_process):
        c = cache.data_tilde[offset + k]
        omega.append(pg_mean(1.0, c))
        tilt.append(c)
    cache.omega_pp = tuple(omega)
    cache.tilt_pp = tuple(tilt)
    return cache.omega_pp


def update_poisson_intensity(cache, gamma, rule, dataset):
    """Node-wise marginal intensity of the latent marked process and its
    integral.

    For each point-process task: lam1 = exp(E[log bound]); the omega-marginal
    intensity at a node is lam1 * s(-g-tilde) * exp((g-tilde - g-bar)/2); the
    omega-weighted first moment multiplies that by pg_mean(1, g-tilde).
    Returns the per-task integrated intensity (capacity) R >= 0.
    """
    lam1 = np.exp(gamma.log_mean())
    intensity, omega_int = [], []
    capacity = np.zeros(dataset.n_point_process)
    for k in range(dataset.n_point_process):
        gt, gb = cache.node_tilde[k], cache.node_mean[k]
        log_int = np.log(lam1[k]) + log_sigmoid(-gt) + (gt - gb) / 2.0
        lam_nodes = np.exp(log_int)
        if not np.all(np.isfinite(lam_nodes)):
            bad = int(np.argmax(~np.isfinite(lam_nodes)))
            raise DivergenceError(
                f"non-finite latent intensity for point-process task {k} at "
                f"quadrature node {bad} (g-bar={gb[bad]:.3g}, g-tilde={gt[bad]:.3g})"
            )
        intensity.append(lam_nodes)
        omega_int.append(lam_nodes * pg_mean(1.0, gt))
        capacity[k] = float(rule.weights @ lam_nodes)
    cache.lam1 = lam1
    cache.intensity_nodes = tuple(intensity)
    cache.omega_intensity_nodes = tuple(omega_int)
    cache.capacity = capacity
    return capacity


def update_lambda_bar(dataset, capacity):
    """Gamma posterior over each intensity upper bound: shape N + R, rate |X|."""
    capacity = np.atleast_1d(np.asarray(capacity, float))
    if np.any(capacity < 0):
        raise ValueError("integrated intensity must be nonnegative")
    counts = np.array([len(t) for t in dataset.point_process], float)
    alpha = counts + capacity
    degenerate = alpha < ALPHA_FLOOR
    if np.any(degenerate):
        warnings.warn(
            "point-process task with no events and vanishing latent intensity; "
            "flooring Gamma shape",
            RuntimeWarning,
        )
        alpha = np.maximum(alpha, ALPHA_FLOOR)
    beta = np.full_like(alpha, dataset.domain.volume())
    return GammaPosterior(alpha=alpha, beta=beta)


def task_precision_blocks(dataset, grid, hyp, cache, rule, i):
    """Precision contribution H_i and linear term v_i of global task i.

    Regression: H = P P^T / sigma^2, v = P y / sigma^2 with the projection
    P = K_i^{-1} K_mn. Classification: H = P diag(E[omega]) P^T, v = P y/2.
    Point process: the event sum plus the quadrature approximation of the
    intensity-weighted integrals,
      H = P diag(E[omega]) P^T + P_s diag(w Omega) P_s^T,
      v = P 1/2 - P_s (w Lambda)/2,
    with P_s the projection at the quadrature nodes.
    """
    kind, k = dataset.task_index(i)
    proj = grid.task_solve(i, task_kernel_matrix(hyp, i, grid.points, dataset.task_points(i)))
    if kind == "regression":
        task = dataset.regression[k]
        return proj @ proj.T / hyp.noise_vars[k], proj @ task.outputs / hyp.noise_vars[k]
    if kind == "classification":
        task = dataset.classification[k]
        return (proj * cache.omega_cls[k]) @ proj.T, proj @ (task.labels / 2.0)
    proj_n = grid.task_solve(i, task_kernel_matrix(hyp, i, grid.points, rule.nodes))
    w_omega = rule.weights * cache.omega_intensity_nodes[k]
    w_lam = rule.weights * cache.intensity_nodes[k]
    h = (proj * cache.omega_pp[k]) @ proj.T + (proj_n * w_omega) @ proj_n.T
    v = 0.5 * proj.sum(axis=1) - 0.5 * (proj_n @ w_lam)
    return h, v


def update_latent(dataset, grid, hyp, cache, rule):
    """Joint Gaussian update over all inducing values.

    Assembles the per-task precision contributions and linear terms, then
    Sigma = [blockdiag(H) + K_mm^{-1}]^{-1}, m = Sigma v.
    """
    m = grid.n_inducing
    h_blocks, v_parts = [], []
    for i in range(dataset.n_tasks):
        h, v = task_precision_blocks(dataset, grid, hyp, cache, rule, i)
        h_blocks.append(h)
        v_parts.append(v)

    k_inv = grid.solve(np.eye(m * dataset.n_tasks))
    k_inv = (k_inv + k_inv.T) / 2.0
    precision = block_diag(*h_blocks) + k_inv
    factor, _ = _chol_with_jitter(precision)
    cov = cho_solve((factor, True), np.eye(precision.shape[0]))
    cov = (cov + cov.T) / 2.0
    mean = cho_solve((factor, True), np.concatenate(v_parts))
    return LatentPosterior(
        mean=mean,
        cov=cov,
        n_inducing=m,
        task_counts=(dataset.n_regression, dataset.n_classification, dataset.n_point_process),
    )


# ---------------------------------------------------------------------------
# Fit loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitConfig:
    """Everything a fit needs besides the data.

    `hyperparams` is the initial point; `monitor` is "tll" (plug-in training
    log-likelihood) or "elbo" (closed-form bound restricted to regression and
    classification terms).
    """

    hyperparams: LmcHyperparams
    n_inducing: object = 30
    n_quad: object = 100
    max_iter: int = 50
    tol: float = 1e-3
    seed: object = 0
    update_hyperparams: bool = True
    hyper_every: int = 1
    inner_iters: int = 25
    monitor: str = "tll"

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.monitor not in ("tll", "elbo"):
            raise ValueError("monitor must be 'tll' or 'elbo'")

    def echo(self):
        """JSON-serializable snapshot of the configuration."""
        return {
            "n_inducing": _as_list(self.n_inducing),
            "n_quad": _as_list(self.n_quad),
            "max_iter": self.max_iter,
            "tol": self.tol,
            "seed": _as_list(self.seed),
            "update_hyperparams": self.update_hyperparams,
            "hyper_every": self.hyper_every,
            "inner_iters": self.inner_iters,
            "monitor": self.monitor,
            "hyperparams": hyperparams_to_dict(self.hyperparams),
        }


def _as_list(x):
    if np.isscalar(x):
        return x
    return list(x)


@dataclass
class FitReport:
    """Per-sweep trajectory of a fit."""

    iterations: int = 0
    monitor: list = field(default_factory=list)
    monitor_name: str = "tll"
    hyper_trace: list = field(default_factory=list)
    converged: bool = False
    var_clip_events: int = 0
    runtime_seconds: float = 0.0
    seed: object = 0

    def deterministic_fields(self):
        """Everything except wall-clock timing (for reproducibility checks)."""
        return {
            "iterations": self.iterations,
            "monitor": list(self.monitor),
            "monitor_name": self.monitor_name,
            "hyper_trace": list(self.hyper_trace),
            "converged": self.converged,
            "var_clip_events": self.var_clip_events,
            "seed": _as_list(self.seed),
        }

    def to_dict(self):
        out = self.deterministic_fields()
        out["runtime_seconds"] = self.runtime_seconds
        return out


@dataclass(frozen=True)
class FitResult:
    state: LatentPosterior
    gamma: GammaPosterior
    hyperparams: LmcHyperparams
    report: FitReport
    grid: InducingGrid
    rule: QuadratureRule


def initial_state(dataset, grid, seed):
    """Random mean (N(0, 0.1^2) i.i.d.), prior covariance, empirical Gamma init."""
    rng = make_rng(seed)
    mean = 0.1 * rng.standard_normal(grid.k_mm.shape[0])
    state = LatentPosterior(
        mean=mean,
        cov=grid.prior_cov(),
        n_inducing=grid.n_inducing,
        task_counts=(dataset.n_regression, dataset.n_classification, dataset.n_point_process),
    )
    counts = np.array([max(len(t), 1) for t in dataset.point_process], float)
    gamma = GammaPosterior(alpha=counts, beta=np.full_like(counts, dataset.domain.volume()))
    return state, gamma


def fit(dataset, config: FitConfig) -> FitResult:
    """Run the full coordinate-ascent loop until the monitor stabilizes.

    Sweep order: classification augmentation, point-process augmentation,
    latent-process intensity, intensity upper bounds, latent functions; then
    kernel/weight refresh and closed-form noise update when enabled.
    Convergence: |delta monitor| / |monitor| < tol. Because the model is
    conditionally conjugate, each closed-form sweep equals a natural-gradient
    step of size one, which is why a handful of sweeps usually suffices.
    """
    from . import hyperopt as _hyperopt

    if not isinstance(dataset, HeterogeneousDataset):
        raise TypeError("fit expects a HeterogeneousDataset")
    hyp = config.hyperparams
    if hyp.n_tasks != dataset.n_tasks:
        raise ValueError(
            f"hyperparameters cover {hyp.n_tasks} tasks, dataset has {dataset.n_tasks}"
        )
    if hyp.noise_vars.size != dataset.n_regression:
        raise ValueError("need one noise variance per regression task")

    start = time.perf_counter()
    grid = build_inducing_grid(dataset.domain, config.n_inducing, hyp)
    rule = gauss_legendre(dataset.domain, config.n_quad)
    state, gamma = initial_state(dataset, grid, config.seed)
    report = FitReport(monitor_name=config.monitor, seed=config.seed)
    clip = ClipCounter()
    cache = None
    prev = None

    for sweep in range(1, config.max_iter + 1):
        try:
            cache = build_cache(state, dataset, grid, hyp, rule, clip)
            update_pg_classification(cache, dataset)
            update_pg_pointprocess(cache, dataset)
            update_poisson_intensity(cache, gamma, rule, dataset)
            gamma = update_lambda_bar(dataset, cache.capacity)
            state = update_latent(dataset, grid, hyp, cache, rule)
            if config.update_hyperparams and sweep % config.hyper_every == 0:
                hyp, grid = _hyperopt.optimize_kernel_hyperparams(
                    hyp, grid, state, inner_iters=config.inner_iters
                )
                if dataset.n_regression:
                    noise = [
                        _hyperopt.optimal_noise(state, dataset, grid, hyp, i)
                        for i in range(dataset.n_regression)
                    ]
                    hyp = LmcHyperparams(
                        kernels=hyp.kernels, weights=hyp.weights, noise_vars=noise
                    )
        except (DivergenceError, CholeskyError) as exc:
            report.iterations = sweep
            report.var_clip_events = clip.count
            report.runtime_seconds = time.perf_counter() - start
            raise DivergenceError(
                f"sweep {sweep}: {exc}", state=state, gamma=gamma, hyperparams=hyp, report=report
            ) from exc

        if config.monitor == "tll":
            value = training_loglik(state, gamma, grid, hyp, dataset, rule)
        else:
            value = restricted_elbo(state, dataset, grid, hyp, cache)
        report.monitor.append(float(value))
        report.hyper_trace.append(hyperparams_to_dict(hyp))
        report.iterations = sweep
        if not np.isfinite(value):
            report.var_clip_events = clip.count
            report.runtime_seconds = time.perf_counter() - start
            raise DivergenceError(
                f"sweep {sweep}: non-finite monitor value",
                state=state, gamma=gamma, hyperparams=hyp, report=report,
            )
        if prev is not None and abs(value - prev) / max(abs(value), 1e-12) < config.tol:
            report.converged = True
            prev = value
            break
        prev = value

    report.var_clip_events = clip.count
    report.runtime_seconds = time.perf_counter() - start
    return FitResult(state=state, gamma=gamma, hyperparams=hyp, report=report,
                     grid=grid, rule=rule)


# ---------------------------------------------------------------------------
# Posterior summaries
# ---------------------------------------------------------------------------


def posterior_functions(state, gamma, grid, hyp, task, points, clip_counter=None):
    """Per-point posterior summary of the reported function of one task.

    Returns dict with `latent_mean`, `latent_var` and `reported`, the latter
    being the plug-in posterior-mean transform: the latent mean for
    regression, its sigmoid for classification, and mean-bound * sigmoid for
    point-process tasks.
    """
    mu, var = predictive(state, grid, hyp, task, points, clip_counter)
    kind = state.task_type(task)
    if kind == "regression":
        reported = mu
    elif kind == "classification":
        reported = sigmoid(mu)
    else:
        i_r, i_c, _ = state.task_counts
        reported = gamma.mean()[task - i_r - i_c] * sigmoid(mu)
    return {"latent_mean": mu, "latent_var": var, "reported": reported}


def sample_reported(state, gamma, grid, hyp, task, points, n_draws=100, seed=0):
    """Draws of the reported function at `points` from the variational
    posterior: inducing values from their Gaussian block (and, for
    point-process tasks, the intensity bound from its Gamma), pushed through
    the conditional-mean map and the task's link. Shape (n_draws, n_points)."""
    points = np.atleast_2d(np.asarray(points, float))
    rng = make_rng(seed)
    k_star = task_kernel_matrix(hyp, task, grid.points, points)
    a = grid.task_solve(task, k_star)               # (M, n)
    cov = state.task_cov(task)
    factor, _ = _chol_with_jitter(cov)
    z = rng.standard_normal((n_draws, grid.n_inducing))
    g_m = state.task_mean(task) + z @ factor.T      # (n_draws, M)
    g_x = g_m @ a                                   # (n_draws, n)
    kind = state.task_type(task)
    if kind == "regression":
        return g_x
    if kind == "classification":
        return sigmoid(g_x)
    i_r, i_c, _ = state.task_counts
    k = task - i_r - i_c
    lam = rng.gamma(shape=gamma.alpha[k], scale=1.0 / gamma.beta[k], size=n_draws)
    return lam[:, None] * sigmoid(g_x)


def training_loglik(state, gamma, grid, hyp, dataset, rule):
    """Plug-in log-likelihood of the training data under the posterior means.

    Regression: sum log N(y | g-bar, sigma^2). Classification:
    sum log s(y g-bar). Point process: sum log(E[bound] s(g-bar)) minus the
    full-domain integral of that intensity.
    """
    total = 0.0
    for i in range(dataset.n_tasks):
        kind, k = dataset.task_index(i)
        mu, _ = predictive(state, grid, hyp, i, dataset.task_points(i))
        if kind == "regression":
            task = dataset.regression[k]
            s2 = hyp.noise_vars[k]
            total += float(np.sum(-0.5 * np.log(2 * np.pi * s2)
                                  - (task.outputs - mu) ** 2 / (2 * s2)))
        elif kind == "classification":
            total += float(np.sum(log_sigmoid(dataset.classification[k].labels * mu)))
        else:
            lam_mean = float(gamma.mean()[k])
            total += float(np.sum(np.log(lam_mean) + log_sigmoid(mu)))
            mu_nodes, _ = predictive(state, grid, hyp, i, rule.nodes)
            total -= lam_mean * float(rule.weights @ sigmoid(mu_nodes))
    return total


def restricted_elbo(state, dataset, grid, hyp, cache):
    """Closed-form bound restricted to regression and classification terms.

    Sum of the expected Gaussian log-likelihood, the expected augmented
    classification log-likelihood plus the augmentation-variable KL, minus
    the inducing-value KL. Point-process terms are omitted (their entropy is
    only available through quadrature); with only regression and
    classification tasks this is the exact bound the sweeps ascend.
    """
    from . import hyperopt as _hyperopt
    from .special import log_cosh

    total = _hyperopt.expected_regression_loglik(state, dataset, grid, hyp)
    for k in range(dataset.n_classification):
        i = dataset.n_regression + k
        task = dataset.classification[k]
        # moments under the *current* latent posterior; only the tilt
        # parameters (which define q(omega)) come from the cache
        mu, var = predictive(state, grid, hyp, i, task.inputs)
        gsq = mu**2 + var
        c = cache.tilt_cls[k]
        e_omega = pg_mean(1.0, c)
        total += float(np.sum(
            task.labels * mu / 2.0 - gsq * e_omega / 2.0 - np.log(2.0)
            - log_cosh(c / 2.0) + c**2 * e_omega / 2.0
        ))
    total -= _hyperopt.kl_inducing(hyp, grid, state)
    return total


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def hyperparams_to_dict(hyp: LmcHyperparams) -> dict:
    return {
        "kernels": [[k.variance, k.precision] for k in hyp.kernels],
        "weights": hyp.weights.tolist(),
        "noise_vars": hyp.noise_vars.tolist(),
    }


def hyperparams_from_dict(obj: dict) -> LmcHyperparams:
    return LmcHyperparams(
        kernels=[RbfParams(variance=v, precision=p) for v, p in obj["kernels"]],
        weights=np.asarray(obj["weights"], float),
        noise_vars=np.asarray(obj.get("noise_vars", []), float),
    )


def canonicalize_weights(weights, tol=1e-12):
    """Flip mixing-weight columns so the first non-negligible entry of each
    basis column is positive; the covariance is invariant to column sign."""
    weights = np.array(weights, float)
    for q in range(weights.shape[1]):
        col = weights[:, q]
        nz = np.nonzero(np.abs(col) > tol)[0]
        if nz.size and col[nz[0]] < 0:
            weights[:, q] = -col
    return weights


def save_checkpoint(path, result: FitResult, domain: Domain, config: FitConfig,
                    metadata=None):
    hyp = result.hyperparams
    canon = LmcHyperparams(
        kernels=hyp.kernels,
        weights=canonicalize_weights(hyp.weights),
        noise_vars=hyp.noise_vars,
    )
    obj = {
        "format": CHECKPOINT_FORMAT,
        "domain": {"lower": domain.lower.tolist(), "upper": domain.upper.tolist()},
        "task_counts": list(result.state.task_counts),
        "hyperparams": hyperparams_to_dict(canon),
        "inducing_points": result.grid.points.tolist(),
        "m": result.state.mean.tolist(),
        "sigma": result.state.cov.ravel().tolist(),
        "gamma": {"alpha": result.gamma.alpha.tolist(), "beta": result.gamma.beta.tolist()},
        "config": config.echo(),
        "metadata": dict(metadata or {}),
    }
    obj["metadata"].setdefault("tool_version", __version__)
    obj["metadata"].setdefault("rng", RNG_ID)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path):
    """Rebuild (state, gamma, hyperparams, grid, domain, config echo, metadata)."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    fmt = obj.get("format")
    if fmt != CHECKPOINT_FORMAT:
        raise ValueError(f"checkpoint format {fmt!r} does not match {CHECKPOINT_FORMAT!r}")
    domain = Domain(lower=obj["domain"]["lower"], upper=obj["domain"]["upper"])
    hyp = hyperparams_from_dict(obj["hyperparams"])
    points = np.asarray(obj["inducing_points"], float)
    grid = grid_from_points(points, hyp)
    counts = tuple(int(c) for c in obj["task_counts"])
    mean = np.asarray(obj["m"], float)
    n = mean.size
    sigma = np.asarray(obj["sigma"], float)
    if sigma.size != n * n or n != grid.n_inducing * sum(counts):
        raise ValueError("checkpoint arrays are inconsistent with its task layout")
    state = LatentPosterior(
        mean=mean,
        cov=sigma.reshape(n, n),
        n_inducing=grid.n_inducing,
        task_counts=counts,
    )
    gamma = GammaPosterior(
        alpha=np.asarray(obj["gamma"]["alpha"], float),
        beta=np.asarray(obj["gamma"]["beta"], float),
    )
    return {
        "state": state,
        "gamma": gamma,
        "hyperparams": hyp,
        "grid": grid,
        "domain": domain,
        "config": obj.get("config", {}),
        "metadata": obj.get("metadata", {}),
    }
