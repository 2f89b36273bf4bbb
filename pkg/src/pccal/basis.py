"""Tensorized Legendre basis over [-1, 1]^m with graded-lexicographic ordering.

The basis is built from unnormalized Legendre polynomials P_n (P_n(1) = 1)
via the three-term recurrence; orthogonality holds under the uniform
probability density 2^-m on the cube, giving squared norms

    <psi_k, psi_k> = prod_i 1 / (2 alpha_i + 1)

for the multi-index alpha of term k. Term 0 is the constant with norm 1.
Norms are carried explicitly rather than folded into the polynomials, since
projection, variance and sensitivity formulas all reference them.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import CapacityError, DomainError, ShapeError

__all__ = ["PCBasis", "build_basis", "total_degree_indices", "legendre_table"]

# Guard against constructions that could not be stored, let alone fit.
_MAX_TERMS = 5_000_000


def total_degree_indices(dim: int, order: int) -> np.ndarray:
    """All multi-indices with total degree <= order, graded then lexicographic.

    Within each total-degree band the indices are sorted ascending as plain
    tuples; the ordering is deterministic and identical across runs.
    """
    bands = []
    for degree in range(order + 1):
        block = []

        def fill(prefix, remaining, slots):
            if slots == 1:
                block.append(prefix + [remaining])
                return
            for d in range(remaining + 1):
                fill(prefix + [d], remaining - d, slots - 1)

        fill([], degree, dim)
        block.sort()
        bands.extend(block)
    return np.array(bands, dtype=np.int64)


def legendre_table(x: np.ndarray, max_degree: int) -> np.ndarray:
    """P_0..P_max_degree evaluated at each x; shape (max_degree+1, len(x)).

    Three-term recurrence (n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}; stable
    far beyond the degrees used here.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((max_degree + 1,) + x.shape)
    out[0] = 1.0
    if max_degree >= 1:
        out[1] = x
    for n in range(1, max_degree):
        out[n + 1] = ((2 * n + 1) * x * out[n] - n * out[n - 1]) / (n + 1)
    return out


@dataclass(frozen=True)
class PCBasis:
    """Truncated total-degree basis: indices, squared norms, dimensions."""

    dim: int
    order: int
    indices: np.ndarray   # (n_terms, dim) int64
    norms_sq: np.ndarray  # (n_terms,)

    @property
    def n_terms(self) -> int:
        return self.indices.shape[0]

    @property
    def total_degrees(self) -> np.ndarray:
        return self.indices.sum(axis=1)

    def norm_sq(self, k: int) -> float:
        """Squared norm <psi_k, psi_k> of term k."""
        if not 0 <= k < self.n_terms:
            raise DomainError(f"term index {k} outside [0, {self.n_terms - 1}]")
        return float(self.norms_sq[k])

    def eval_at(self, xi) -> np.ndarray:
        """Evaluate all basis functions at one point xi; returns (n_terms,)."""
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.dim,):
            raise ShapeError(f"expected point of shape ({self.dim},), got {xi.shape}")
        table = legendre_table(xi, self.order)            # (order+1, dim)
        return np.prod(table[self.indices, np.arange(self.dim)], axis=1)

    def eval_many(self, nodes) -> np.ndarray:
        """Evaluate all basis functions at each row of nodes; returns (N, n_terms)."""
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != self.dim:
            raise ShapeError(f"expected nodes of shape (N, {self.dim}), got {nodes.shape}")
        if not np.isfinite(nodes).all():
            raise DomainError("nodes contain non-finite coordinates")
        tables = legendre_table(nodes.T, self.order)  # (order+1, dim, N)
        vals = np.ones((nodes.shape[0], self.n_terms))
        for i in range(self.dim):
            vals *= tables[self.indices[:, i], i, :].T
        return vals


def build_basis(dim: int, order: int) -> PCBasis:
    """Construct the total-degree basis of given dimension and max order.

    The number of terms is comb(dim + order, order); the zero index comes
    first and ordering is graded-lexicographic.
    """
    if dim < 1:
        raise DomainError(f"dimension must be >= 1, got {dim}")
    if order < 0:
        raise DomainError(f"order must be >= 0, got {order}")
    n_terms = comb(dim + order, order)
    if n_terms > _MAX_TERMS:
        raise CapacityError(
            f"basis would have {n_terms} terms (limit {_MAX_TERMS}); "
            "reduce dimension or order"
        )
    indices = total_degree_indices(dim, order)
    norms_sq = np.prod(1.0 / (2.0 * indices + 1.0), axis=1)
    basis = PCBasis(dim=dim, order=order, indices=indices, norms_sq=norms_sq)
    basis.indices.setflags(write=False)
    basis.norms_sq.setflags(write=False)
    return basis
