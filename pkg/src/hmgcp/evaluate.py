"""Estimation-error and test log-likelihood metrics.

Estimation error is the RMSE between the posterior-mean reported function
and the ground truth on the simulator's dense grid. Test log-likelihood is
the plug-in likelihood of held-out records under the posterior means; for
point-process tasks the intensity integral runs either over the full domain
or over a supplied box (the masked-gap region), selected per call.
"""

import warnings

import numpy as np

from .data import MaskSpec
from .inference import posterior_functions, predictive
from .quadrature import gauss_legendre
from .special import log_sigmoid, sigmoid

__all__ = [
    "EvaluationError",
    "estimation_error",
    "estimation_errors",
    "test_loglik",
    "evaluate_metrics",
]


class EvaluationError(ValueError):
    pass


def estimation_error(estimate, truth) -> float:
    """RMSE between two same-shaped grids of values."""
    estimate = np.asarray(estimate, float)
    truth = np.asarray(truth, float)
    if estimate.shape != truth.shape:
        raise EvaluationError(
            f"grid mismatch: estimate has shape {estimate.shape}, truth {truth.shape}"
        )
    return float(np.sqrt(np.mean((estimate - truth) ** 2)))


def estimation_errors(state, gamma, grid, hyp, truth) -> list:
    """Per-task RMSE of the reported function against a GroundTruth object."""
    out = []
    for i in range(state.n_tasks):
        summary = posterior_functions(state, gamma, grid, hyp, i, truth.grid)
        out.append(estimation_error(summary["reported"], truth.reported[i]))
    return out


def _cox_rule(domain, region, quad_counts):
    if region is None or region == "domain":
        return gauss_legendre(domain, quad_counts)
    if isinstance(region, MaskSpec):
        box = region
    else:
        lo, hi = region
        box = MaskSpec(lower=lo, upper=hi)
    from .data import Domain

    return gauss_legendre(Domain(lower=box.lower, upper=box.upper), quad_counts)


def test_loglik(state, gamma, grid, hyp, test_dataset, task, region=None,
                quad_counts=100) -> float:
    """Plug-in log-likelihood of one task's held-out records.

    Regression: sum log N(y | g-bar, sigma^2); classification:
    sum log s(y g-bar); point process: sum log(E[bound] s(g-bar)) minus the
    intensity integral over `region` (None or "domain" for the full domain,
    or a MaskSpec / (lower, upper) box for masked-gap evaluation).

    Empty regression/classification test sets raise; an empty point-process
    test set returns 0.0 with a warning.
    """
    kind, k = test_dataset.task_index(task)
    if kind == "regression":
        t = test_dataset.regression[k]
        if len(t) == 0:
            raise EvaluationError("empty regression test set")
        mu, _ = predictive(state, grid, hyp, task, t.inputs)
        s2 = hyp.noise_vars[k]
        return float(np.sum(-0.5 * np.log(2 * np.pi * s2)
                            - (t.outputs - mu) ** 2 / (2 * s2)))
    if kind == "classification":
        t = test_dataset.classification[k]
        if len(t) == 0:
            raise EvaluationError("empty classification test set")
        mu, _ = predictive(state, grid, hyp, task, t.inputs)
        return float(np.sum(log_sigmoid(t.labels * mu)))

    t = test_dataset.point_process[k]
    if len(t) == 0:
        warnings.warn(f"point-process task {k}: empty test set, returning 0.0",
                      RuntimeWarning)
        return 0.0
    lam_mean = float(gamma.mean()[k])
    mu_ev, _ = predictive(state, grid, hyp, task, t.events)
    total = float(np.sum(np.log(lam_mean) + log_sigmoid(mu_ev)))
    rule = _cox_rule(test_dataset.domain, region, quad_counts)
    mu_nodes, _ = predictive(state, grid, hyp, task, rule.nodes)
    total -= lam_mean * float(rule.weights @ sigmoid(mu_nodes))
    return total


def evaluate_metrics(state, gamma, grid, hyp, test_dataset=None, truth=None,
                     regions=None, quad_counts=100, n_train=None) -> dict:
    """Per-task metrics dict ready for JSON emission.

    Includes EE when `truth` is given and TLL when `test_dataset` is given.
    `regions` optionally supplies one integration region per task for
    point-process TLL (None entries mean full domain).
    """
    n_tasks = state.n_tasks
    types = ["regression"] * state.task_counts[0] + \
            ["classification"] * state.task_counts[1] + \
            ["point_process"] * state.task_counts[2]
    ees = estimation_errors(state, gamma, grid, hyp, truth) if truth is not None else None
    tasks = []
    for i in range(n_tasks):
        entry = {"task": i, "type": types[i]}
        if ees is not None:
            entry["ee"] = ees[i]
        if test_dataset is not None:
            region = regions[i] if regions is not None else None
            entry["tll"] = test_loglik(state, gamma, grid, hyp, test_dataset, i,
                                       region=region, quad_counts=quad_counts)
            entry["n_test"] = len(test_dataset.task_points(i))
        if n_train is not None:
            entry["n_train"] = n_train[i]
        tasks.append(entry)
    return {"tasks": tasks}
