"""PC surrogate object and derived analytics: moments, sensitivities, error.

With unnormalized Legendre terms and explicit squared norms the statistics
of the surrogate under the uniform density are closed-form:

    mean     = e_0
    variance = sum_{k>=1} e_k^2 <psi_k, psi_k>
    T_i      = sum over terms involving dimension i of e_k^2 <psi_k, psi_k>,
               divided by the variance  (total sensitivity)

and the normalized relative error against an ensemble is
||E_obs - E_pc||_2 / ||E_obs||_2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .basis import PCBasis, build_basis
from .ensemble import DesignEnsemble
from .errors import ConfigError, DomainError, NumericalError, ShapeError

__all__ = ["PCExpansion", "write_coefficients", "read_coefficients"]

_EVAL_CHUNK = 65536  # rows per basis-evaluation block when sampling

BASIS_FAMILY = "legendre-graded-lex"


@dataclass(frozen=True)
class PCExpansion:
    """Truncated PC surrogate: basis, coefficients and fit provenance."""

    basis: PCBasis
    coefficients: np.ndarray
    fit_method: str = "unspecified"
    fit_metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=float)
        if coeffs.shape != (self.basis.n_terms,):
            raise ShapeError(
                f"coefficient vector has shape {coeffs.shape}, "
                f"expected ({self.basis.n_terms},)"
            )
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def dim(self) -> int:
        return self.basis.dim

    def eval(self, xi) -> float | np.ndarray:
        """Evaluate the expansion at one point (m,) or a stack (N, m)."""
        xi = np.asarray(xi, dtype=float)
        if xi.ndim == 1:
            return float(self.basis.eval_at(xi) @ self.coefficients)
        if xi.shape[0] <= _EVAL_CHUNK:
            return self.basis.eval_many(xi) @ self.coefficients
        out = np.empty(xi.shape[0])
        for start in range(0, xi.shape[0], _EVAL_CHUNK):
            block = xi[start:start + _EVAL_CHUNK]
            out[start:start + _EVAL_CHUNK] = self.basis.eval_many(block) @ self.coefficients
        return out

    def mean(self) -> float:
        return float(self.coefficients[0])

    def variance(self) -> float:
        e = self.coefficients[1:]
        return float(np.sum(e * e * self.basis.norms_sq[1:]))

    def std(self) -> float:
        return float(np.sqrt(self.variance()))

    def total_sensitivity(self) -> np.ndarray:
        """Total Sobol index per input dimension; requires positive variance."""
        var = self.variance()
        if var <= 0.0:
            raise NumericalError("total sensitivity undefined for zero-variance surrogate")
        contrib = self.coefficients ** 2 * self.basis.norms_sq
        T = np.empty(self.dim)
        for i in range(self.dim):
            involved = self.basis.indices[:, i] > 0
            T[i] = contrib[involved].sum() / var
        return T

    def nre(self, ensemble: DesignEnsemble) -> float:
        """Normalized relative error against observed ensemble values."""
        if ensemble.dim != self.dim:
            raise ShapeError(
                f"ensemble dimension {ensemble.dim} does not match surrogate {self.dim}"
            )
        obs_norm = float(np.linalg.norm(ensemble.values))
        if obs_norm == 0.0:
            raise DomainError("cannot normalize: observed values have zero norm")
        pred = self.eval(ensemble.nodes)
        return float(np.linalg.norm(ensemble.values - pred)) / obs_norm

    def sample_values(self, n_samples: int, seed: int) -> np.ndarray:
        """Surrogate values at seeded uniform samples of [-1, 1]^m."""
        rng = np.random.default_rng(seed)
        out = np.empty(n_samples)
        done = 0
        while done < n_samples:
            take = min(_EVAL_CHUNK, n_samples - done)
            xi = rng.uniform(-1.0, 1.0, size=(take, self.dim))
            out[done:done + take] = self.basis.eval_many(xi) @ self.coefficients
            done += take
        return out

    def sample_pdf(self, n_samples: int = 1_000_000, seed: int = 0,
                   n_grid: int = 512, bandwidth: Optional[float] = None):
        """KDE of the surrogate's output distribution under the uniform prior."""
        from .calibrate import kde_marginal
        if n_samples < 1000:
            raise DomainError(f"sample_pdf needs n_samples >= 1000, got {n_samples}")
        values = self.sample_values(n_samples, seed)
        return kde_marginal(values, n_grid=n_grid, bandwidth=bandwidth)

    def response_slice(self, axis: int, fixed=None, n_points: int = 201) -> np.ndarray:
        """1D sweep along one canonical axis, other coordinates held fixed.

        Returns rows of (xi_axis, E). The fixed point defaults to the
        center 0 of the canonical cube.
        """
        if not 0 <= axis < self.dim:
            raise DomainError(f"axis {axis} outside [0, {self.dim - 1}]")
        fixed = np.zeros(self.dim) if fixed is None else np.asarray(fixed, dtype=float)
        if fixed.shape != (self.dim,):
            raise ShapeError(f"fixed point has shape {fixed.shape}, expected ({self.dim},)")
        sweep = np.linspace(-1.0, 1.0, n_points)
        pts = np.tile(fixed, (n_points, 1))
        pts[:, axis] = sweep
        return np.column_stack([sweep, self.eval(pts)])

    def response_surface(self, axis_i: int, axis_j: int, fixed=None,
                         n_points: int = 51) -> np.ndarray:
        """2D sweep over two axes; rows of (xi_i, xi_j, E)."""
        if axis_i == axis_j:
            raise DomainError("response surface needs two distinct axes")
        for ax in (axis_i, axis_j):
            if not 0 <= ax < self.dim:
                raise DomainError(f"axis {ax} outside [0, {self.dim - 1}]")
        fixed = np.zeros(self.dim) if fixed is None else np.asarray(fixed, dtype=float)
        if fixed.shape != (self.dim,):
            raise ShapeError(f"fixed point has shape {fixed.shape}, expected ({self.dim},)")
        sweep = np.linspace(-1.0, 1.0, n_points)
        gi, gj = np.meshgrid(sweep, sweep, indexing="ij")
        pts = np.tile(fixed, (n_points * n_points, 1))
        pts[:, axis_i] = gi.ravel()
        pts[:, axis_j] = gj.ravel()
        return np.column_stack([gi.ravel(), gj.ravel(), self.eval(pts)])


# -- coefficient file: self-describing text, one term per row ----------------

def write_coefficients(path, surrogate: PCExpansion) -> None:
    """Header (dim, order, family, fit provenance) then term rows."""
    basis = surrogate.basis
    with open(path, "w") as fh:
        fh.write("# pccal coefficients\n")
        fh.write(f"# dim = {basis.dim}\n")
        fh.write(f"# order = {basis.order}\n")
        fh.write(f"# basis = {BASIS_FAMILY}\n")
        fh.write(f"# fit_method = {surrogate.fit_method}\n")
        for key in sorted(surrogate.fit_metadata):
            fh.write(f"# meta.{key} = {surrogate.fit_metadata[key]}\n")
        fh.write("# columns = term multi_index*dim coefficient\n")
        for k in range(basis.n_terms):
            alpha = " ".join(str(d) for d in basis.indices[k])
            fh.write(f"{k} {alpha} {surrogate.coefficients[k]:.16e}\n")


def read_coefficients(path) -> PCExpansion:
    """Read a coefficient file written by write_coefficients."""
    header: dict[str, str] = {}
    meta: dict[str, str] = {}
    rows: list[list[str]] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    key = key.strip()
                    if key.startswith("meta."):
                        meta[key[5:]] = value.strip()
                    else:
                        header[key] = value.strip()
                continue
            rows.append(line.split())
    try:
        dim = int(header["dim"])
        order = int(header["order"])
    except KeyError as exc:
        raise ConfigError(f"coefficient file {path} missing dim/order header") from exc
    family = header.get("basis", BASIS_FAMILY)
    if family != BASIS_FAMILY:
        raise ConfigError(
            f"coefficient file {path} uses basis family {family!r}; "
            f"this build supports {BASIS_FAMILY!r}"
        )
    basis = build_basis(dim, order)
    if len(rows) != basis.n_terms:
        raise ConfigError(
            f"coefficient file {path} has {len(rows)} terms, expected {basis.n_terms}"
        )
    coeffs = np.empty(basis.n_terms)
    for fields in rows:
        if len(fields) != 2 + dim:
            raise ConfigError(f"coefficient file {path}: malformed row {' '.join(fields)!r}")
        k = int(fields[0])
        alpha = tuple(int(f) for f in fields[1:1 + dim])
        if not 0 <= k < basis.n_terms or alpha != tuple(basis.indices[k]):
            raise ConfigError(
                f"coefficient file {path}: row {k} multi-index {alpha} does not "
                "match the graded-lexicographic ordering"
            )
        coeffs[k] = float(fields[1 + dim])
    return PCExpansion(
        basis=basis,
        coefficients=coeffs,
        fit_method=header.get("fit_method", "unspecified"),
        fit_metadata=meta,
    )
