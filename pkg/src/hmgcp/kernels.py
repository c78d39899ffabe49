"""RBF base kernels, linear-coregionalization cross-covariance, and the
shared inducing-point grid with its Cholesky machinery.

The multi-task covariance over M shared inducing inputs is assembled in
Kronecker form, K = sum_q (w_q w_q^T) kron K_q, giving an (M*I, M*I) matrix
whose (i, j) block is the cross-covariance sum_q w_iq w_jq K_q. All solves
against it (and against its per-task diagonal blocks) go through cached
Cholesky factors of the jittered matrices.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky

from .data import Domain

__all__ = [
    "RbfParams",
    "LmcHyperparams",
    "InducingGrid",
    "rbf",
    "rbf_matrix",
    "cross_cov",
    "task_kernel_matrix",
    "lattice_points",
    "build_inducing_grid",
    "grid_from_points",
    "assemble_kronecker",
    "chol_solve",
    "CholeskyError",
]

# Jitter escalation: start at JITTER_START * mean(diag), multiply by 10 until
# Cholesky succeeds or JITTER_MAX * mean(diag) is exceeded.
JITTER_START = 1e-6
JITTER_MAX = 1e-2
# Accept a factor only while the squared Cholesky-diagonal ratio (a cheap
# condition-number bound) stays below this; beyond it solve noise would
# poison the coordinate updates.
COND_ACCEPT = 1e6


class CholeskyError(np.linalg.LinAlgError):
    """Covariance factorization failed even at the maximum jitter level."""


@dataclass(frozen=True)
class RbfParams:
    """Squared-exponential kernel k(x, x') = variance * exp(-precision/2 ||x-x'||^2).

    `precision` is the inverse squared lengthscale; both parameters are
    strictly positive.
    """

    variance: float
    precision: float

    def __post_init__(self):
        if not (self.variance > 0 and self.precision > 0):
            raise ValueError("RBF parameters must be strictly positive")


@dataclass(frozen=True)
class LmcHyperparams:
    """Mixing-model hyperparameters: Q base kernels, an (I, Q) weight matrix
    (rows in global task order), and one noise variance per regression task."""

    kernels: tuple
    weights: np.ndarray
    noise_vars: np.ndarray

    def __post_init__(self):
        kernels = tuple(self.kernels)
        if len(kernels) < 1:
            raise ValueError("at least one base kernel is required")
        weights = np.atleast_2d(np.asarray(self.weights, float))
        if weights.shape[1] != len(kernels):
            raise ValueError("weights must have one column per base kernel")
        noise = np.asarray(self.noise_vars, float).reshape(-1)
        if np.any(noise <= 0):
            raise ValueError("noise variances must be strictly positive")
        weights = weights.copy()
        weights.setflags(write=False)
        noise = noise.copy()
        noise.setflags(write=False)
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "noise_vars", noise)

    @property
    def n_basis(self) -> int:
        return len(self.kernels)

    @property
    def n_tasks(self) -> int:
        return self.weights.shape[0]

    def task_variance(self, i) -> float:
        """Prior marginal variance of task i: sum_q w_iq^2 * variance_q."""
        return float(sum(self.weights[i, q] ** 2 * k.variance
                         for q, k in enumerate(self.kernels)))


def rbf(params: RbfParams, x, x_prime) -> float:
    """Scalar kernel evaluation between two points of equal dimension."""
    x = np.atleast_1d(np.asarray(x, float))
    x_prime = np.atleast_1d(np.asarray(x_prime, float))
    if x.shape != x_prime.shape:
        raise ValueError("points must have the same dimension")
    sq = float(np.sum((x - x_prime) ** 2))
    return params.variance * float(np.exp(-0.5 * params.precision * sq))


def rbf_matrix(params: RbfParams, x1, x2) -> np.ndarray:
    """Kernel matrix between row-stacked point sets (N1, D) and (N2, D)."""
    x1 = np.atleast_2d(np.asarray(x1, float))
    x2 = np.atleast_2d(np.asarray(x2, float))
    sq = np.sum((x1[:, None, :] - x2[None, :, :]) ** 2, axis=2)
    return params.variance * np.exp(-0.5 * params.precision * sq)


def cross_cov(hyp: LmcHyperparams, i, j, x, x_prime) -> float:
    """Cross-covariance between tasks i and j: sum_q w_iq w_jq k_q(x, x')."""
    ntasks = hyp.n_tasks
    if not (0 <= i < ntasks and 0 <= j < ntasks):
        raise IndexError(f"task index out of range for {ntasks} tasks")
    return float(sum(hyp.weights[i, q] * hyp.weights[j, q] * rbf(k, x, x_prime)
                     for q, k in enumerate(hyp.kernels)))


def task_kernel_matrix(hyp: LmcHyperparams, i, x1, x2) -> np.ndarray:
    """Within-task kernel matrix for task i: sum_q w_iq^2 K_q(x1, x2)."""
    if not 0 <= i < hyp.n_tasks:
        raise IndexError(f"task index out of range for {hyp.n_tasks} tasks")
    out = None
    for q, k in enumerate(hyp.kernels):
        block = hyp.weights[i, q] ** 2 * rbf_matrix(k, x1, x2)
        out = block if out is None else out + block
    return out


def lattice_points(domain: Domain, counts) -> np.ndarray:
    """Endpoint-inclusive uniform lattice over the domain, (prod(counts), D)."""
    if np.isscalar(counts):
        counts = [int(counts)] * domain.dims
    counts = [int(c) for c in counts]
    if len(counts) != domain.dims:
        raise ValueError(f"expected {domain.dims} lattice counts, got {len(counts)}")
    if any(c < 2 for c in counts):
        raise ValueError("lattice needs at least 2 points per dimension")
    axes = [np.linspace(domain.lower[d], domain.upper[d], counts[d])
            for d in range(domain.dims)]
    if domain.dims == 1:
        return axes[0].reshape(-1, 1)
    grids = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g.ravel() for g in grids])


def _well_conditioned(factor):
    d = np.diag(factor)
    return (d.min() / d.max()) ** 2 * COND_ACCEPT >= 1.0


def _chol_with_jitter(mat):
    """Lower Cholesky of mat + jitter*I.

    A zero-jitter factorization is kept when the matrix is well conditioned
    (so exact-arithmetic identities survive); otherwise the jitter escalates
    from JITTER_START * mean(diag) by factors of 10 until the factor passes
    the conditioning gate or the ceiling is reached, in which case the best
    successful factor is used. Returns (factor, jitter). Raises
    CholeskyError if nothing factorizes below the ceiling.
    """
    scale = float(np.mean(np.diag(mat)))
    if not np.isfinite(scale) or scale <= 0:
        raise CholeskyError("covariance diagonal is not positive")
    best = None
    try:
        factor = cholesky(mat, lower=True)
        if _well_conditioned(factor):
            return factor, 0.0
        best = (factor, 0.0)
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_START * scale
    eye = np.eye(mat.shape[0])
    while jitter <= JITTER_MAX * scale * (1 + 1e-12):
        try:
            factor = cholesky(mat + jitter * eye, lower=True)
            best = (factor, jitter)
            if _well_conditioned(factor):
                return best
        except np.linalg.LinAlgError:
            pass
        jitter *= 10.0
    if best is not None:
        return best
    raise CholeskyError(
        f"Cholesky failed up to jitter {JITTER_MAX:g} * mean(diag) = {JITTER_MAX * scale:g}"
    )


@dataclass(frozen=True)
class InducingGrid:
    """Shared inducing inputs with the assembled block covariance.

    Attributes
    ----------
    points : (M, D) lattice locations shared by all tasks (fixed, not optimized).
    k_mm : (M*I, M*I) block covariance in Kronecker form.
    chol : lower Cholesky factor of k_mm + jitter * I.
    jitter : absolute jitter added to the full matrix.
    task_chols : per-task lower factors of the (M, M) diagonal blocks.
    task_jitters : absolute jitter per task block.
    """

    points: np.ndarray
    k_mm: np.ndarray
    chol: np.ndarray
    jitter: float
    task_chols: tuple
    task_jitters: tuple

    @property
    def n_inducing(self) -> int:
        return self.points.shape[0]

    @property
    def n_tasks(self) -> int:
        return self.k_mm.shape[0] // self.n_inducing

    def solve(self, b) -> np.ndarray:
        """(K_mm + jitter I)^{-1} b via the cached factor."""
        b = np.asarray(b, float)
        if b.shape[0] != self.k_mm.shape[0]:
            raise ValueError(
                f"expected leading dimension {self.k_mm.shape[0]}, got {b.shape[0]}"
            )
        return cho_solve((self.chol, True), b)

    def task_solve(self, i, b) -> np.ndarray:
        """(K^i_mm + jitter_i I)^{-1} b for the task-i diagonal block."""
        b = np.asarray(b, float)
        if b.shape[0] != self.n_inducing:
            raise ValueError(f"expected leading dimension {self.n_inducing}, got {b.shape[0]}")
        return cho_solve((self.task_chols[i], True), b)

    def task_block(self, i) -> np.ndarray:
        """View of the (M, M) diagonal block of task i."""
        m = self.n_inducing
        return self.k_mm[i * m:(i + 1) * m, i * m:(i + 1) * m]

    def log_det(self) -> float:
        """log det of the jittered full covariance."""
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def prior_cov(self) -> np.ndarray:
        """The jittered covariance K_mm + jitter I actually used in solves."""
        return self.k_mm + self.jitter * np.eye(self.k_mm.shape[0])


def build_inducing_grid(domain: Domain, counts, hyp: LmcHyperparams) -> InducingGrid:
    """Place an endpoint-inclusive uniform lattice and assemble its covariance.

    The full covariance is built as sum_q (w_q w_q^T) kron K_q and factored
    with escalating jitter; each task's diagonal block gets its own factor.
    """
    return grid_from_points(lattice_points(domain, counts), hyp)


def grid_from_points(points, hyp: LmcHyperparams) -> InducingGrid:
    """Assemble and factor the block covariance over explicit inducing points."""
    points = np.atleast_2d(np.asarray(points, float))
    k_mm = assemble_kronecker(hyp, points)
    chol, jitter = _chol_with_jitter(k_mm)
    task_chols, task_jitters = [], []
    m = points.shape[0]
    for i in range(hyp.n_tasks):
        block = k_mm[i * m:(i + 1) * m, i * m:(i + 1) * m]
        f, j = _chol_with_jitter(block)
        task_chols.append(f)
        task_jitters.append(j)
    points = points.copy()
    points.setflags(write=False)
    k_mm.setflags(write=False)
    return InducingGrid(
        points=points,
        k_mm=k_mm,
        chol=chol,
        jitter=jitter,
        task_chols=tuple(task_chols),
        task_jitters=tuple(task_jitters),
    )


def assemble_kronecker(hyp: LmcHyperparams, points) -> np.ndarray:
    """sum_q (w_q w_q^T) kron K_q(points, points), task-major block layout."""
    points = np.atleast_2d(np.asarray(points, float))
    m = points.shape[0]
    out = np.zeros((m * hyp.n_tasks, m * hyp.n_tasks))
    for q, k in enumerate(hyp.kernels):
        w_q = hyp.weights[:, q]
        out += np.kron(np.outer(w_q, w_q), rbf_matrix(k, points, points))
    return out


def chol_solve(grid: InducingGrid, b) -> np.ndarray:
    """Solve (K_mm + jitter I) X = B against the full block covariance."""
    return grid.solve(b)
