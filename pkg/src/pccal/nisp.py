"""Spectral projection of quadrature ensembles onto the polynomial basis.

Coefficients come from the discretized Galerkin projection

    e_k = sum_q P[k, q] E(xi_q),   P[k, q] = psi_k(xi_q) w_q / <psi_k, psi_k>,

which is exact for integrands within the quadrature's polynomial exactness.
It is deliberately restricted to quadrature designs: on noisy data the
projection has no smoothing mechanism and the high-degree coefficients
absorb the noise instead of decaying, which the spectrum helper makes
visible. Noise-tolerant fitting lives in the bpdn module.
"""

from __future__ import annotations

import numpy as np

from .basis import PCBasis
from .ensemble import DesignEnsemble
from .errors import DomainError, ShapeError
from .quadrature import SparseGrid

__all__ = ["projection_matrix", "nisp_coefficients", "spectrum", "degree_band_means"]


def projection_matrix(basis: PCBasis, grid: SparseGrid) -> np.ndarray:
    """Precomputed projection matrix, shape (n_terms, n_nodes)."""
    if basis.dim != grid.dim:
        raise ShapeError(
            f"basis dimension {basis.dim} does not match grid dimension {grid.dim}"
        )
    psi = basis.eval_many(grid.nodes)          # (Q, n_terms)
    return (psi * grid.weights[:, None]).T / basis.norms_sq[:, None]


def nisp_coefficients(basis: PCBasis, ensemble: DesignEnsemble) -> np.ndarray:
    """Project ensemble values onto the basis; requires quadrature weights.

    Summation is a single matrix-vector product; with one BLAS thread the
    result is bitwise reproducible run to run.
    """
    if ensemble.weights is None:
        raise DomainError(
            "spectral projection requires a quadrature design with weights; "
            "fit non-quadrature ensembles with the bpdn module instead"
        )
    if ensemble.dim != basis.dim:
        raise ShapeError(
            f"ensemble dimension {ensemble.dim} does not match basis dimension {basis.dim}"
        )
    psi = basis.eval_many(ensemble.nodes)      # (N, n_terms)
    weighted = ensemble.values * ensemble.weights
    return (psi.T @ weighted) / basis.norms_sq


def spectrum(basis: PCBasis, coeffs: np.ndarray) -> np.ndarray:
    """Normalized absolute spectrum: rows of (term index, total degree, |e_k/e_0|)."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (basis.n_terms,):
        raise ShapeError(
            f"coefficient vector has shape {coeffs.shape}, expected ({basis.n_terms},)"
        )
    if coeffs[0] == 0.0:
        raise DomainError("cannot normalize spectrum: constant coefficient e_0 is zero")
    ratios = np.abs(coeffs / coeffs[0])
    return np.column_stack([
        np.arange(basis.n_terms, dtype=float),
        basis.total_degrees.astype(float),
        ratios,
    ])


def degree_band_means(basis: PCBasis, coeffs: np.ndarray) -> np.ndarray:
    """Mean |e_k / e_0| per total-degree band, degrees 0..order."""
    spec = spectrum(basis, coeffs)
    degrees = spec[:, 1].astype(int)
    return np.array([
        spec[degrees == d, 2].mean() for d in range(basis.order + 1)
    ])
