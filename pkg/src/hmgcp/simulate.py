"""Synthetic data generation: basis GP draws on a dense grid, linear mixing
into task functions, and observation sampling (Gaussian outputs, Bernoulli
labels, thinned point processes).

Stream layout, all Philox via SeedSequence: the ground-truth draw uses
[seed, 0] (one spawned child per basis function); observation draws use
[seed, stream, global_task_index] with stream 1 for training data and
2 for independent test data.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import __version__
from .data import (
    ClassificationTask,
    Domain,
    HeterogeneousDataset,
    PointProcessTask,
    RegressionTask,
)
from .inference import hyperparams_from_dict, hyperparams_to_dict
from .kernels import LmcHyperparams, RbfParams, _chol_with_jitter, lattice_points, rbf_matrix
from .rng import RNG_ID, make_rng, seed_seq
from .special import sigmoid

__all__ = [
    "GroundTruth",
    "SimulationConfig",
    "sample_basis_functions",
    "draw_ground_truth",
    "sample_observations",
    "simulate_dataset",
    "save_ground_truth",
    "load_ground_truth",
    "preset",
    "PRESET_NAMES",
]

STREAM_TRAIN = 1
STREAM_TEST = 2

DEFAULT_GRID_1D = (500,)
DEFAULT_GRID_2D = (100, 50)
DEFAULT_EVENT_TARGET = 100


@dataclass(frozen=True)
class GroundTruth:
    """True task functions on a dense lattice, plus the generating setup.

    `latent` holds the raw mixed GP draws g_i; `reported` the observable
    transforms (g for regression, sigmoid(g) for classification,
    bound * sigmoid(g) for point processes).
    """

    domain: Domain
    grid: np.ndarray          # (G, D) dense lattice, endpoint inclusive
    grid_counts: tuple
    latent: np.ndarray        # (I, G)
    reported: np.ndarray      # (I, G)
    lambda_bars: np.ndarray   # (I_p,)
    task_types: tuple
    hyperparams: LmcHyperparams
    seed: object = None

    def latent_at(self, i, points) -> np.ndarray:
        """Linearly interpolated latent function g_i off the dense grid."""
        return _interpolate(self.domain, self.grid_counts, self.latent[i], points)

    def reported_at(self, i, points) -> np.ndarray:
        kind = self.task_types[i]
        g = self.latent_at(i, points)
        if kind == "regression":
            return g
        if kind == "classification":
            return sigmoid(g)
        k = i - self.task_types.index("point_process")
        return float(self.lambda_bars[k]) * sigmoid(g)


def _interpolate(domain, grid_counts, values, points):
    points = np.atleast_2d(np.asarray(points, float))
    if domain.dims == 1:
        axis = np.linspace(domain.lower[0], domain.upper[0], grid_counts[0])
        return np.interp(points[:, 0], axis, values)
    from scipy.interpolate import RegularGridInterpolator

    axes = [np.linspace(domain.lower[d], domain.upper[d], grid_counts[d])
            for d in range(domain.dims)]
    interp = RegularGridInterpolator(
        axes, values.reshape(grid_counts), method="linear", bounds_error=False,
        fill_value=None,
    )
    return interp(points)


@dataclass(frozen=True)
class SimulationConfig:
    """Task mix, generating hyperparameters and sample sizes for a synthetic
    dataset. `lambda_bars=None` picks 2 * event_target / |X| per
    point-process task so expected counts land near `event_target`."""

    domain: Domain
    hyperparams: LmcHyperparams
    n_regression: int = 1
    n_classification: int = 1
    n_point_process: int = 1
    n_samples_regression: tuple = (100,)
    n_samples_classification: tuple = (100,)
    lambda_bars: tuple = None
    grid_counts: tuple = None
    event_target: int = DEFAULT_EVENT_TARGET

    def __post_init__(self):
        total = self.n_regression + self.n_classification + self.n_point_process
        if self.hyperparams.n_tasks != total:
            raise ValueError("hyperparameter weight rows must match the task count")
        if len(self.n_samples_regression) != self.n_regression:
            raise ValueError("need one regression sample count per task")
        if len(self.n_samples_classification) != self.n_classification:
            raise ValueError("need one classification sample count per task")
        if self.grid_counts is None:
            default = DEFAULT_GRID_1D if self.domain.dims == 1 else DEFAULT_GRID_2D
            object.__setattr__(self, "grid_counts", default)
        if self.lambda_bars is None:
            lam = 2.0 * self.event_target / self.domain.volume()
            object.__setattr__(self, "lambda_bars", (lam,) * self.n_point_process)
        if len(self.lambda_bars) != self.n_point_process:
            raise ValueError("need one intensity bound per point-process task")

    @property
    def task_types(self):
        return (("regression",) * self.n_regression
                + ("classification",) * self.n_classification
                + ("point_process",) * self.n_point_process)

    def to_dict(self):
        return {
            "domain": {"lower": self.domain.lower.tolist(),
                       "upper": self.domain.upper.tolist()},
            "hyperparams": hyperparams_to_dict(self.hyperparams),
            "n_regression": self.n_regression,
            "n_classification": self.n_classification,
            "n_point_process": self.n_point_process,
            "n_samples_regression": list(self.n_samples_regression),
            "n_samples_classification": list(self.n_samples_classification),
            "lambda_bars": list(self.lambda_bars),
            "grid_counts": list(self.grid_counts),
            "event_target": self.event_target,
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(
            domain=Domain(lower=obj["domain"]["lower"], upper=obj["domain"]["upper"]),
            hyperparams=hyperparams_from_dict(obj["hyperparams"]),
            n_regression=int(obj.get("n_regression", 1)),
            n_classification=int(obj.get("n_classification", 1)),
            n_point_process=int(obj.get("n_point_process", 1)),
            n_samples_regression=tuple(obj.get("n_samples_regression", (100,))),
            n_samples_classification=tuple(obj.get("n_samples_classification", (100,))),
            lambda_bars=tuple(obj["lambda_bars"]) if obj.get("lambda_bars") else None,
            grid_counts=tuple(obj["grid_counts"]) if obj.get("grid_counts") else None,
            event_target=int(obj.get("event_target", DEFAULT_EVENT_TARGET)),
        )


def sample_basis_functions(domain, grid_counts, kernels, seed):
    """Draw one zero-mean GP path per base kernel on a dense lattice.

    Returns (grid (G, D), values (Q, G)); each path is L z with L the
    jittered Cholesky factor of the kernel matrix on the lattice.
    """
    grid = lattice_points(domain, grid_counts)
    children = seed_seq(seed).spawn(len(kernels))
    values = np.empty((len(kernels), grid.shape[0]))
    for q, kern in enumerate(kernels):
        factor, _ = _chol_with_jitter(rbf_matrix(kern, grid, grid))
        z = make_rng(children[q]).standard_normal(grid.shape[0])
        values[q] = factor @ z
    return grid, values


def draw_ground_truth(config: SimulationConfig, seed) -> GroundTruth:
    """Sample the basis functions and mix them into per-task truths."""
    grid, basis = sample_basis_functions(
        config.domain, config.grid_counts, config.hyperparams.kernels,
        np.random.SeedSequence([_entropy(seed), 0]),
    )
    latent = np.asarray(config.hyperparams.weights, float) @ basis  # (I, G)
    types = config.task_types
    lam = np.asarray(config.lambda_bars, float)
    reported = np.empty_like(latent)
    p = 0
    for i, kind in enumerate(types):
        if kind == "regression":
            reported[i] = latent[i]
        elif kind == "classification":
            reported[i] = sigmoid(latent[i])
        else:
            reported[i] = lam[p] * sigmoid(latent[i])
            p += 1
    return GroundTruth(
        domain=config.domain,
        grid=grid,
        grid_counts=tuple(config.grid_counts),
        latent=latent,
        reported=reported,
        lambda_bars=lam,
        task_types=types,
        hyperparams=config.hyperparams,
        seed=_entropy(seed),
    )


def _entropy(seed):
    if isinstance(seed, np.random.SeedSequence):
        raise TypeError("pass an integer seed at this level")
    return int(seed)


def _uniform_points(rng, domain, n):
    u = rng.random((n, domain.dims))
    return domain.lower + u * (domain.upper - domain.lower)


def sample_observations(config: SimulationConfig, truth: GroundTruth, seed,
                        stream=STREAM_TRAIN) -> HeterogeneousDataset:
    """Draw one dataset from a fixed ground truth.

    Regression and classification inputs are uniform on the domain; events
    come from thinning a homogeneous process at the intensity bound, keeping
    each candidate with probability sigmoid(g). The bound is exact for the
    sigmoid-link intensity, so thinning is exact.
    """
    base = _entropy(seed)
    reg, cla, pp = [], [], []
    for i, kind in enumerate(config.task_types):
        rng = make_rng(np.random.SeedSequence([base, stream, i]))
        if kind == "regression":
            k = len(reg)
            n = config.n_samples_regression[k]
            x = _uniform_points(rng, config.domain, n)
            g = truth.latent_at(i, x)
            y = g + np.sqrt(config.hyperparams.noise_vars[k]) * rng.standard_normal(n)
            reg.append(RegressionTask(inputs=x, outputs=y))
        elif kind == "classification":
            n = config.n_samples_classification[len(cla)]
            x = _uniform_points(rng, config.domain, n)
            p = sigmoid(truth.latent_at(i, x))
            labels = np.where(rng.random(n) < p, 1.0, -1.0)
            cla.append(ClassificationTask(inputs=x, labels=labels))
        else:
            lam = float(truth.lambda_bars[len(pp)])
            n_cand = rng.poisson(lam * config.domain.volume())
            cand = _uniform_points(rng, config.domain, n_cand)
            keep = rng.random(n_cand) < sigmoid(truth.latent_at(i, cand))
            pp.append(PointProcessTask(events=cand[keep]))
    return HeterogeneousDataset(
        domain=config.domain, regression=reg, classification=cla, point_process=pp
    )


def simulate_dataset(config: SimulationConfig, seed):
    """Ground truth plus one training dataset drawn from it."""
    truth = draw_ground_truth(config, seed)
    dataset = sample_observations(config, truth, seed, stream=STREAM_TRAIN)
    return dataset, truth


# ---------------------------------------------------------------------------
# Ground-truth serialization
# ---------------------------------------------------------------------------


def save_ground_truth(truth: GroundTruth, path, metadata=None):
    obj = {
        "domain": {"lower": truth.domain.lower.tolist(),
                   "upper": truth.domain.upper.tolist()},
        "grid_counts": list(truth.grid_counts),
        "latent": truth.latent.tolist(),
        "reported": truth.reported.tolist(),
        "lambda_bars": truth.lambda_bars.tolist(),
        "task_types": list(truth.task_types),
        "hyperparams": hyperparams_to_dict(truth.hyperparams),
        "seed": truth.seed,
        "metadata": dict(metadata or {}),
    }
    obj["metadata"].setdefault("tool_version", __version__)
    obj["metadata"].setdefault("rng", RNG_ID)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True)
        fh.write("\n")


def load_ground_truth(path) -> GroundTruth:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    domain = Domain(lower=obj["domain"]["lower"], upper=obj["domain"]["upper"])
    grid_counts = tuple(int(c) for c in obj["grid_counts"])
    return GroundTruth(
        domain=domain,
        grid=lattice_points(domain, grid_counts),
        grid_counts=grid_counts,
        latent=np.asarray(obj["latent"], float),
        reported=np.asarray(obj["reported"], float),
        lambda_bars=np.asarray(obj["lambda_bars"], float),
        task_types=tuple(obj["task_types"]),
        hyperparams=hyperparams_from_dict(obj["hyperparams"]),
        seed=obj.get("seed"),
    )


# ---------------------------------------------------------------------------
# Benchmark presets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Preset:
    name: str
    simulation: SimulationConfig
    n_inducing: object
    n_quad: object


def _preset_config(kernels, weights, n_pp, lambda_bars):
    domain = Domain(lower=[0.0], upper=[100.0])
    hyp = LmcHyperparams(
        kernels=[RbfParams(*k) for k in kernels],
        weights=np.asarray(weights, float),
        noise_vars=[0.1],
    )
    return SimulationConfig(
        domain=domain,
        hyperparams=hyp,
        n_regression=1,
        n_classification=1,
        n_point_process=n_pp,
        n_samples_regression=(100,),
        n_samples_classification=(100,),
        lambda_bars=lambda_bars,
    )


_W_THREE_TASKS = [[0.9, 0.1], [0.5, 0.5], [0.1, 0.9]]
_W_FOUR_TASKS = [[0.9, 0.1], [0.1, 0.9], [0.3, 0.5], [1.0, 1.0]]

_PRESETS = {
    "paper-5.1-d1": Preset(
        name="paper-5.1-d1",
        simulation=_preset_config([(1.0, 0.001), (1.0, 0.001)], _W_THREE_TASKS, 1, (2.0,)),
        n_inducing=30,
        n_quad=100,
    ),
    "paper-5.1-d2": Preset(
        name="paper-5.1-d2",
        simulation=_preset_config([(1.0, 0.02), (2.0, 0.001)], _W_THREE_TASKS, 1, (2.0,)),
        n_inducing=30,
        n_quad=100,
    ),
    "paper-5.1-d3": Preset(
        name="paper-5.1-d3",
        simulation=_preset_config([(1.0, 0.1), (2.0, 0.1)], _W_THREE_TASKS, 1, (2.0,)),
        n_inducing=30,
        n_quad=100,
    ),
    "paper-5.2": Preset(
        name="paper-5.2",
        simulation=_preset_config([(1.0, 0.02), (2.0, 0.001)], _W_FOUR_TASKS, 2, (2.0, 2.0)),
        n_inducing=10,
        n_quad=100,
    ),
}

PRESET_NAMES = tuple(sorted(_PRESETS))


def preset(name: str) -> Preset:
    try:
        return _PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"
        ) from None
