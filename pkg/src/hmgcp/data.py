"""Dataset model for heterogeneous task collections.

A dataset bundles regression, binary classification and point-process tasks
that share one hyper-rectangular domain. The global task index runs over
regression tasks first, then classification, then point process; every
block-structured object downstream (kernel matrices, posteriors) uses this
order.

Datasets are plain values: all arrays are stored read-only, so instances are
safe to share across threads.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .rng import make_rng

__all__ = [
    "Domain",
    "RegressionTask",
    "ClassificationTask",
    "PointProcessTask",
    "HeterogeneousDataset",
    "MaskSpec",
    "DatasetError",
    "load_dataset",
    "save_dataset",
    "dataset_to_dict",
    "dataset_from_dict",
    "apply_mask",
    "random_masks",
]


class DatasetError(ValueError):
    """Raised for schema violations and invariant breaches in dataset files."""


def _readonly(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box [lower_d, upper_d] in R^D, D >= 1."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, float))
        upper = np.atleast_1d(np.asarray(self.upper, float))
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size < 1:
            raise DatasetError("domain lower/upper must be equal-length vectors")
        if np.any(upper <= lower):
            raise DatasetError("domain upper bounds must exceed lower bounds")
        object.__setattr__(self, "lower", _readonly(lower))
        object.__setattr__(self, "upper", _readonly(upper))

    @property
    def dims(self) -> int:
        return self.lower.size

    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def contains(self, points) -> np.ndarray:
        """Boolean mask of rows of `points` (N, D) inside the closed box."""
        points = np.atleast_2d(np.asarray(points, float))
        return np.all((points >= self.lower) & (points <= self.upper), axis=1)


def _check_points(points, domain, task_label):
    points = np.asarray(points, float)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if points.ndim != 2 or (points.size and points.shape[1] != domain.dims):
        raise DatasetError(f"{task_label}: inputs must be {domain.dims}-dimensional points")
    if points.size == 0:
        return points.reshape(0, domain.dims)
    inside = domain.contains(points)
    if not np.all(inside):
        bad = int(np.argmin(inside))
        raise DatasetError(f"{task_label}: point at record {bad} lies outside the domain")
    return points


@dataclass(frozen=True)
class RegressionTask:
    inputs: np.ndarray   # (N, D)
    outputs: np.ndarray  # (N,)

    def __post_init__(self):
        inputs = np.asarray(self.inputs, float)
        outputs = np.asarray(self.outputs, float).reshape(-1)
        if inputs.ndim == 1:
            inputs = inputs.reshape(-1, 1)
        if inputs.shape[0] != outputs.shape[0]:
            raise DatasetError("regression task: inputs and outputs differ in length")
        object.__setattr__(self, "inputs", _readonly(inputs))
        object.__setattr__(self, "outputs", _readonly(outputs))

    def __len__(self):
        return self.outputs.shape[0]


@dataclass(frozen=True)
class ClassificationTask:
    inputs: np.ndarray  # (N, D)
    labels: np.ndarray  # (N,) values in {-1, +1}

    def __post_init__(self):
        inputs = np.asarray(self.inputs, float)
        labels = np.asarray(self.labels, float).reshape(-1)
        if inputs.ndim == 1:
            inputs = inputs.reshape(-1, 1)
        if inputs.shape[0] != labels.shape[0]:
            raise DatasetError("classification task: inputs and labels differ in length")
        bad = np.nonzero(~np.isin(labels, (-1.0, 1.0)))[0]
        if bad.size:
            raise DatasetError(
                f"classification task: label at record {int(bad[0])} is not -1 or +1"
            )
        object.__setattr__(self, "inputs", _readonly(inputs))
        object.__setattr__(self, "labels", _readonly(labels))

    def __len__(self):
        return self.labels.shape[0]


@dataclass(frozen=True)
class PointProcessTask:
    events: np.ndarray  # (N, D), unordered, duplicates allowed, may be empty

    def __post_init__(self):
        events = np.asarray(self.events, float)
        if events.size == 0:
            events = events.reshape(0, events.shape[1] if events.ndim == 2 else 1)
        elif events.ndim == 1:
            events = events.reshape(-1, 1)
        object.__setattr__(self, "events", _readonly(events))

    def __len__(self):
        return self.events.shape[0]


@dataclass(frozen=True)
class HeterogeneousDataset:
    domain: Domain
    regression: tuple = field(default=())
    classification: tuple = field(default=())
    point_process: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "regression", tuple(self.regression))
        object.__setattr__(self, "classification", tuple(self.classification))
        object.__setattr__(self, "point_process", tuple(self.point_process))
        if self.n_tasks == 0:
            raise DatasetError("dataset must contain at least one task")
        for k, task in enumerate(self.regression):
            _check_points(task.inputs, self.domain, f"regression task {k}")
        for k, task in enumerate(self.classification):
            _check_points(task.inputs, self.domain, f"classification task {k}")
        for k, task in enumerate(self.point_process):
            _check_points(task.events, self.domain, f"point_process task {k}")

    @property
    def n_regression(self) -> int:
        return len(self.regression)

    @property
    def n_classification(self) -> int:
        return len(self.classification)

    @property
    def n_point_process(self) -> int:
        return len(self.point_process)

    @property
    def n_tasks(self) -> int:
        return self.n_regression + self.n_classification + self.n_point_process

    @property
    def task_types(self) -> tuple:
        """Per global task index: 'regression' | 'classification' | 'point_process'."""
        return (
            ("regression",) * self.n_regression
            + ("classification",) * self.n_classification
            + ("point_process",) * self.n_point_process
        )

    def task_points(self, i) -> np.ndarray:
        """Observation locations of global task i (events for point processes)."""
        kind, k = self.task_index(i)
        if kind == "regression":
            return self.regression[k].inputs
        if kind == "classification":
            return self.classification[k].inputs
        return self.point_process[k].events

    def task_index(self, i):
        """Map a global task index to ("kind", within-kind index)."""
        if not 0 <= i < self.n_tasks:
            raise IndexError(f"task index {i} out of range for {self.n_tasks} tasks")
        if i < self.n_regression:
            return "regression", i
        i -= self.n_regression
        if i < self.n_classification:
            return "classification", i
        return "point_process", i - self.n_classification


@dataclass(frozen=True)
class MaskSpec:
    """Axis-aligned box marking records held out from one task (closed bounds)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, float))
        upper = np.atleast_1d(np.asarray(self.upper, float))
        if lower.shape != upper.shape or np.any(upper <= lower):
            raise DatasetError("mask upper bounds must exceed lower bounds")
        object.__setattr__(self, "lower", _readonly(lower))
        object.__setattr__(self, "upper", _readonly(upper))

    def contains(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, float))
        return np.all((points >= self.lower) & (points <= self.upper), axis=1)

    def inside(self, domain: Domain) -> bool:
        return bool(np.all(self.lower >= domain.lower) and np.all(self.upper <= domain.upper))

    def overlaps(self, other) -> bool:
        return bool(np.all(self.upper > other.lower) and np.all(other.upper > self.lower))

    def to_dict(self):
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


# ---------------------------------------------------------------------------
# JSON serialization
#
# {
#   "domain": {"lower": [..], "upper": [..]},
#   "tasks": [
#     {"type": "regression", "inputs": [[..],..], "outputs": [..]},
#     {"type": "classification", "inputs": [[..],..], "labels": [..]},
#     {"type": "point_process", "events": [[..],..]}
#   ]
# }
#
# Task order in the file is the global task order (regression, then
# classification, then point process).
# ---------------------------------------------------------------------------


def dataset_to_dict(dataset: HeterogeneousDataset) -> dict:
    tasks = []
    for t in dataset.regression:
        tasks.append(
            {"type": "regression", "inputs": t.inputs.tolist(), "outputs": t.outputs.tolist()}
        )
    for t in dataset.classification:
        tasks.append(
            {"type": "classification", "inputs": t.inputs.tolist(), "labels": t.labels.tolist()}
        )
    for t in dataset.point_process:
        tasks.append({"type": "point_process", "events": t.events.tolist()})
    return {
        "domain": {"lower": dataset.domain.lower.tolist(), "upper": dataset.domain.upper.tolist()},
        "tasks": tasks,
    }


def dataset_from_dict(obj: dict) -> HeterogeneousDataset:
    try:
        domain = Domain(lower=obj["domain"]["lower"], upper=obj["domain"]["upper"])
        raw_tasks = obj["tasks"]
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"dataset schema violation: missing field {exc}") from exc
    dims = domain.dims
    reg, cla, pp = [], [], []
    seen_kind = 0  # enforce regression < classification < point_process ordering
    kind_rank = {"regression": 0, "classification": 1, "point_process": 2}
    for idx, t in enumerate(raw_tasks):
        kind = t.get("type")
        if kind not in kind_rank:
            raise DatasetError(f"task {idx}: unknown task type {kind!r}")
        if kind_rank[kind] < seen_kind:
            raise DatasetError(
                f"task {idx}: tasks must be ordered regression, classification, point_process"
            )
        seen_kind = kind_rank[kind]
        try:
            if kind == "regression":
                reg.append(RegressionTask(inputs=_coerce(t["inputs"], dims, idx),
                                          outputs=t["outputs"]))
            elif kind == "classification":
                cla.append(ClassificationTask(inputs=_coerce(t["inputs"], dims, idx),
                                              labels=t["labels"]))
            else:
                pp.append(PointProcessTask(events=_coerce(t.get("events", []), dims, idx)))
        except KeyError as exc:
            raise DatasetError(f"task {idx}: missing field {exc}") from exc
        except DatasetError as exc:
            raise DatasetError(f"task {idx}: {exc}") from exc
    try:
        return HeterogeneousDataset(
            domain=domain, regression=reg, classification=cla, point_process=pp
        )
    except DatasetError as exc:
        raise DatasetError(str(exc)) from exc


def _coerce(rows, dims, idx):
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, dims)
    if arr.ndim != 2 or arr.shape[1] != dims:
        raise DatasetError(f"task {idx}: inputs must be arrays of {dims} reals")
    return arr


def load_dataset(path) -> HeterogeneousDataset:
    """Read a dataset JSON file, validating every invariant.

    Errors carry the offending task and record index.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}: not valid JSON ({exc})") from exc
    return dataset_from_dict(obj)


def save_dataset(dataset: HeterogeneousDataset, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataset_to_dict(dataset), fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Masking for missing-gap experiments
# ---------------------------------------------------------------------------


def apply_mask(dataset: HeterogeneousDataset, masks):
    """Split a dataset into (train, test) by per-task mask boxes.

    `masks` holds one MaskSpec or None per global task. Train keeps the
    records outside each task's box, test the records inside; both keep the
    full domain. Together they partition the original records exactly.
    """
    masks = list(masks)
    if len(masks) != dataset.n_tasks:
        raise DatasetError(f"expected {dataset.n_tasks} masks (or None), got {len(masks)}")
    for mask in masks:
        if mask is not None and not mask.inside(dataset.domain):
            raise DatasetError("mask box extends outside the domain")

    def split(points, mask):
        if mask is None or len(points) == 0:
            inside = np.zeros(len(points), bool)
        else:
            inside = mask.contains(points)
        return inside, ~inside

    train_r, test_r, train_c, test_c, train_p, test_p = [], [], [], [], [], []
    gi = 0
    for t in dataset.regression:
        inside, outside = split(t.inputs, masks[gi]); gi += 1
        train_r.append(RegressionTask(t.inputs[outside], t.outputs[outside]))
        test_r.append(RegressionTask(t.inputs[inside], t.outputs[inside]))
    for t in dataset.classification:
        inside, outside = split(t.inputs, masks[gi]); gi += 1
        train_c.append(ClassificationTask(t.inputs[outside], t.labels[outside]))
        test_c.append(ClassificationTask(t.inputs[inside], t.labels[inside]))
    for t in dataset.point_process:
        inside, outside = split(t.events, masks[gi]); gi += 1
        train_p.append(PointProcessTask(t.events[outside]))
        test_p.append(PointProcessTask(t.events[inside]))
    train = HeterogeneousDataset(dataset.domain, train_r, train_c, train_p)
    test = HeterogeneousDataset(dataset.domain, test_r, test_c, test_p)
    return train, test


def random_masks(dataset: HeterogeneousDataset, width, count, seed):
    """Draw `count` pairwise disjoint mask cells from the even width-partition
    of the domain and assign one per task (task order, after shuffling cells).

    Returns a list with one MaskSpec or None per global task; the first
    `count` tasks receive a mask.
    """
    domain = dataset.domain
    width = np.broadcast_to(np.asarray(width, float), (domain.dims,))
    if np.any(width <= 0):
        raise DatasetError("mask width must be positive")
    cells_per_dim = np.floor((domain.upper - domain.lower) / width + 1e-9).astype(int)
    n_cells = int(np.prod(cells_per_dim))
    if count > n_cells:
        raise DatasetError(f"cannot place {count} masks in {n_cells} disjoint cells")
    if count > dataset.n_tasks:
        raise DatasetError(f"cannot assign {count} masks to {dataset.n_tasks} tasks")
    rng = make_rng(seed)
    chosen = rng.choice(n_cells, size=count, replace=False)
    masks = []
    for flat in chosen:
        idx = np.unravel_index(int(flat), cells_per_dim)
        lo = domain.lower + np.asarray(idx) * width
        masks.append(MaskSpec(lower=lo, upper=lo + width))
    masks += [None] * (dataset.n_tasks - count)
    return masks
