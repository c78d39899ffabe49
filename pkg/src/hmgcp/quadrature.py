"""Gauss-Legendre quadrature over hyper-rectangular domains (1D and 2D)."""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .data import Domain

__all__ = ["QuadratureRule", "gauss_legendre", "integrate"]


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes (S, D) and positive weights (S,); weights sum to the domain volume."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", _readonly(np.atleast_2d(np.asarray(self.nodes, float))))
        object.__setattr__(self, "weights", _readonly(np.asarray(self.weights, float)))
        if self.nodes.shape[0] != self.weights.shape[0]:
            raise ValueError("node/weight count mismatch")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")

    @property
    def size(self):
        return self.nodes.shape[0]


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def gauss_legendre(domain: Domain, counts) -> QuadratureRule:
    """Tensor-product Gauss-Legendre rule on the domain.

    `counts` is the node count per dimension (int or sequence). A rule with n
    nodes per dimension integrates polynomials up to degree 2n-1 exactly in
    that dimension.
    """
    counts = _counts_per_dim(counts, domain.dims)
    if domain.dims > 2:
        raise ValueError("only 1D and 2D domains are supported")
    axes_nodes, axes_weights = [], []
    for d in range(domain.dims):
        p, w = leggauss(counts[d])
        a, b = domain.lower[d], domain.upper[d]
        axes_nodes.append((a + b + (b - a) * p) / 2.0)
        axes_weights.append(w * (b - a) / 2.0)
    if domain.dims == 1:
        nodes = axes_nodes[0].reshape(-1, 1)
        weights = axes_weights[0]
    else:
        g0, g1 = np.meshgrid(axes_nodes[0], axes_nodes[1], indexing="ij")
        nodes = np.column_stack([g0.ravel(), g1.ravel()])
        weights = np.outer(axes_weights[0], axes_weights[1]).ravel()
    return QuadratureRule(nodes=nodes, weights=weights)


def integrate(rule: QuadratureRule, f) -> float:
    """Sum_s w_s f(x_s). `f` is called once with the (S, D) node array and must
    return one value per node."""
    values = np.asarray(f(rule.nodes), dtype=float).reshape(-1)
    if values.shape[0] != rule.size:
        raise ValueError("integrand returned wrong number of values")
    return float(rule.weights @ values)


def _counts_per_dim(counts, dims):
    if np.isscalar(counts):
        counts = [int(counts)] * dims
    counts = [int(c) for c in counts]
    if len(counts) != dims:
        raise ValueError(f"expected {dims} quadrature counts, got {len(counts)}")
    if any(c < 1 for c in counts):
        raise ValueError("quadrature counts must be >= 1")
    return counts
