"""Uncertain-parameter vector: uniform box priors and the canonical map.

Physical parameters p live in per-axis intervals [a_i, b_i]; the canonical
coordinates used by the polynomial basis live in [-1, 1]. The affine map is

    xi_i = (2 p_i - (a_i + b_i)) / (a_i - b_i)

Note the descending sign convention: p = a maps to xi = +1 and p = b to
xi = -1. All downstream code (basis evaluation, surrogate analytics,
calibration) shares this convention, so it must not be "fixed" locally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError, ShapeError

__all__ = ["ParameterSpec", "ParameterSpace"]


@dataclass(frozen=True)
class ParameterSpec:
    """One uncertain parameter with a uniform prior on [lower, upper]."""

    name: str
    lower: float
    upper: float
    default: Optional[float] = None

    def __post_init__(self):
        if not self.name or any(c.isspace() for c in self.name):
            raise DomainError(f"parameter name {self.name!r} must be a non-empty token")
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise DomainError(f"parameter {self.name!r}: bounds must be finite")
        if not self.lower < self.upper:
            raise DomainError(
                f"parameter {self.name!r}: lower bound {self.lower} must be "
                f"strictly below upper bound {self.upper}"
            )
        if self.default is not None and not (self.lower <= self.default <= self.upper):
            raise DomainError(
                f"parameter {self.name!r}: default {self.default} outside "
                f"[{self.lower}, {self.upper}]"
            )

    @property
    def width(self) -> float:
        return self.upper - self.lower


class ParameterSpace:
    """Ordered collection of ParameterSpec; immutable once built."""

    def __init__(self, params: Sequence[ParameterSpec]):
        params = tuple(params)
        if len(params) == 0:
            raise DomainError("parameter space needs at least one parameter")
        names = [s.name for s in params]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DomainError(f"duplicate parameter names: {', '.join(dupes)}")
        self._params = params
        self._lower = np.array([s.lower for s in params], dtype=float)
        self._upper = np.array([s.upper for s in params], dtype=float)
        self._log_prior_const = -float(np.sum(np.log(self._upper - self._lower)))

    @property
    def params(self) -> tuple[ParameterSpec, ...]:
        return self._params

    @property
    def names(self) -> list[str]:
        return [s.name for s in self._params]

    @property
    def dim(self) -> int:
        return len(self._params)

    @property
    def lower(self) -> np.ndarray:
        return self._lower.copy()

    @property
    def upper(self) -> np.ndarray:
        return self._upper.copy()

    def defaults(self) -> np.ndarray:
        """Nominal point: per-axis default where given, else the midpoint."""
        return np.array(
            [s.default if s.default is not None else 0.5 * (s.lower + s.upper)
             for s in self._params]
        )

    def __len__(self) -> int:
        return len(self._params)

    def __eq__(self, other) -> bool:
        return isinstance(other, ParameterSpace) and self._params == other._params

    def _check_shape(self, x: np.ndarray, what: str) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ShapeError(
                f"{what} has trailing dimension {x.shape[-1]}, expected {self.dim}"
            )
        return x

    def to_canonical(self, p) -> np.ndarray:
        """Map physical p in the box to canonical xi in [-1, 1]^m.

        Accepts a single point (m,) or a stack (..., m). Raises DomainError
        naming the offending parameter when a component is out of bounds.
        """
        p = self._check_shape(p, "parameter vector")
        below = p < self._lower
        above = p > self._upper
        if below.any() or above.any():
            bad = int(np.argmax((below | above).reshape(-1, self.dim).any(axis=0)))
            spec = self._params[bad]
            raise DomainError(
                f"parameter {spec.name!r} outside prior bounds "
                f"[{spec.lower}, {spec.upper}]"
            )
        return (2.0 * p - (self._lower + self._upper)) / (self._lower - self._upper)

    def from_canonical(self, xi) -> np.ndarray:
        """Inverse of to_canonical; xi components must lie in [-1, 1]."""
        xi = self._check_shape(xi, "canonical vector")
        if (np.abs(xi) > 1.0).any():
            bad = int(np.argmax((np.abs(xi) > 1.0).reshape(-1, self.dim).any(axis=0)))
            raise DomainError(
                f"canonical component for parameter {self._params[bad].name!r} "
                "outside [-1, 1]"
            )
        return 0.5 * ((self._lower - self._upper) * xi + (self._lower + self._upper))

    def log_prior(self, p) -> float:
        """Log density of the uniform box prior; -inf outside the box."""
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,):
            raise ShapeError(f"expected shape ({self.dim},), got {p.shape}")
        if (p < self._lower).any() or (p > self._upper).any():
            return -math.inf
        return self._log_prior_const

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool((p >= self._lower).all() and (p <= self._upper).all())

    # -- human-editable config block: one "name = lower upper [default]" line each

    def to_block(self) -> str:
        lines = []
        for s in self._params:
            fields = [f"{s.lower:.17g}", f"{s.upper:.17g}"]
            if s.default is not None:
                fields.append(f"{s.default:.17g}")
            lines.append(f"{s.name} = {' '.join(fields)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_items(cls, items: Sequence[tuple[str, str]]) -> "ParameterSpace":
        """Build from (name, "lower upper [default]") pairs as parsed from config."""
        specs = []
        for name, value in items:
            fields = value.split()
            if len(fields) not in (2, 3):
                raise ConfigError(
                    f"parameter {name!r}: expected 'lower upper [default]', "
                    f"got {value!r}"
                )
            try:
                nums = [float(f) for f in fields]
            except ValueError as exc:
                raise ConfigError(f"parameter {name!r}: non-numeric field in {value!r}") from exc
            default = nums[2] if len(nums) == 3 else None
            specs.append(ParameterSpec(name, nums[0], nums[1], default))
        return cls(specs)
