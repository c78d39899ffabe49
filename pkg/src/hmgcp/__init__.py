"""Joint Gaussian-process inference for heterogeneous task collections:
regression, binary classification and point-process tasks sharing a
linear-coregionalization multi-output GP prior, fit by conjugate mean-field
coordinate ascent with sigmoid data augmentation."""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    ClassificationTask,
    Domain,
    HeterogeneousDataset,
    MaskSpec,
    PointProcessTask,
    RegressionTask,
    apply_mask,
    load_dataset,
    random_masks,
    save_dataset,
)
from .kernels import InducingGrid, LmcHyperparams, RbfParams, build_inducing_grid  # noqa: E402
from .quadrature import QuadratureRule, gauss_legendre, integrate  # noqa: E402
from .inference import (  # noqa: E402
    FitConfig,
    FitReport,
    FitResult,
    GammaPosterior,
    LatentPosterior,
    fit,
    load_checkpoint,
    posterior_functions,
    predictive,
    save_checkpoint,
)
from .model import HMGCP  # noqa: E402

__all__ = [
    "__version__",
    "Domain",
    "RegressionTask",
    "ClassificationTask",
    "PointProcessTask",
    "HeterogeneousDataset",
    "MaskSpec",
    "load_dataset",
    "save_dataset",
    "apply_mask",
    "random_masks",
    "RbfParams",
    "LmcHyperparams",
    "InducingGrid",
    "build_inducing_grid",
    "QuadratureRule",
    "gauss_legendre",
    "integrate",
    "LatentPosterior",
    "GammaPosterior",
    "FitConfig",
    "FitReport",
    "FitResult",
    "fit",
    "predictive",
    "posterior_functions",
    "save_checkpoint",
    "load_checkpoint",
    "HMGCP",
]
