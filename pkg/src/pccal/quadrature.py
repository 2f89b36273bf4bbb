"""Nested Smolyak sparse quadrature on [-1, 1]^m for the uniform density.

The 1D family is the delayed Gauss-Patterson sequence: at level l the rule
is the smallest member of the nested Gauss-Legendre/Patterson chain
(1, 3, 7 points) whose polynomial exactness reaches 2l + 1. That delay
gives per-level sizes 1, 3, 3, 7, 7, 7 for levels 0..5 and reproduces the
5D sparse-grid sizes 11, 51, 151, 391, 903 at levels 1..5, with total-degree
exactness 2L + 1 for the level-L grid.

Node/weight tables are stored to full double precision so that nesting is
bit-exact; weights are normalized to sum to 1 (integration against the
uniform probability density 1/2 per axis).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import ConfigError, DomainError, NumericalError

__all__ = [
    "QuadratureRule1D",
    "SparseGrid",
    "build_1d_rule",
    "build_smolyak",
    "subset_levels",
    "uniform_random_design",
    "write_design",
    "read_design",
    "DesignFile",
]

MAX_LEVEL = 5

# Gauss-Patterson chain for weight 1 on [-1, 1] (weights sum to 2).
# 3-point rule = Gauss-Legendre; 7-point = its Patterson extension.
_X1 = 0.7745966692414834    # sqrt(3/5), shared by the 3- and 7-point rules
_X2 = 0.43424374934680254
_X3 = 0.9604912687080203

_GP_NODES = {
    1: (0.0,),
    3: (-_X1, 0.0, _X1),
    7: (-_X3, -_X1, -_X2, 0.0, _X2, _X1, _X3),
}
_GP_WEIGHTS = {
    1: (2.0,),
    3: (0.5555555555555556, 0.8888888888888888, 0.5555555555555556),
    7: (0.10465622602646726, 0.26848808986833345, 0.40139741477596225,
        0.45091653865847414, 0.40139741477596225, 0.26848808986833345,
        0.10465622602646726),
}

# Rule size per level: smallest chain member with exactness >= 2*level + 1.
_LEVEL_SIZES = (1, 3, 3, 7, 7, 7)


@dataclass(frozen=True)
class QuadratureRule1D:
    """One level of the nested 1D family; weights sum to 1."""

    level: int
    nodes: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class SparseGrid:
    """Smolyak grid: dim, level, nodes (Q, m) and signed weights (Q,)."""

    dim: int
    level: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]


def build_1d_rule(level: int) -> QuadratureRule1D:
    """The delayed Gauss-Patterson rule at the given level (0..5)."""
    if not 0 <= level <= MAX_LEVEL:
        raise DomainError(f"1D quadrature level {level} outside supported range 0..{MAX_LEVEL}")
    size = _LEVEL_SIZES[level]
    nodes = np.array(_GP_NODES[size])
    weights = np.array(_GP_WEIGHTS[size]) / 2.0
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule1D(level=level, nodes=nodes, weights=weights)


def _coord_key(x: float) -> str:
    # 14 significant digits; table values differ well beyond this.
    return f"{x:.13e}"


def _compositions(total: int, parts: int):
    """All nonnegative integer vectors of given length summing to total."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, parts - 1):
            yield (head,) + tail


def build_smolyak(dim: int, level: int) -> SparseGrid:
    """Smolyak combination of the delayed 1D family, deduplicated and sorted.

    Uses the combination formula over level multi-indices l with
    max(0, L - m + 1) <= |l| <= L and coefficient
    (-1)^(L - |l|) * C(m - 1, L - |l|). Weights of coincident nodes are
    summed exactly; nodes are ordered lexicographically by coordinates.
    """
    if dim < 1:
        raise DomainError(f"dimension must be >= 1, got {dim}")
    if not 0 <= level <= MAX_LEVEL:
        raise DomainError(f"Smolyak level {level} outside supported range 0..{MAX_LEVEL}")

    rules = [build_1d_rule(l) for l in range(level + 1)]
    acc: dict[tuple, list] = {}
    lo = max(0, level - dim + 1)
    for s in range(lo, level + 1):
        coeff = (-1) ** (level - s) * comb(dim - 1, level - s)
        for ell in _compositions(s, dim):
            pairs = [list(zip(rules[l].nodes, rules[l].weights)) for l in ell]
            for combo in itertools.product(*pairs):
                key = tuple(_coord_key(x) for x, _ in combo)
                w = coeff
                for _, wi in combo:
                    w = w * wi
                entry = acc.get(key)
                if entry is None:
                    acc[key] = [tuple(x for x, _ in combo), w]
                else:
                    entry[1] += w
    items = sorted(acc.values(), key=lambda e: e[0])
    nodes = np.array([e[0] for e in items])
    weights = np.array([e[1] for e in items])
    total = float(weights.sum())
    if abs(total - 1.0) > 1e-12:
        raise NumericalError(f"Smolyak weights sum to {total!r}, expected 1")
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return SparseGrid(dim=dim, level=level, nodes=nodes, weights=weights)


def subset_levels(grid: SparseGrid, lower_level: int) -> SparseGrid:
    """The nested grid at a lower level; its nodes all appear in `grid`."""
    if lower_level > grid.level:
        raise DomainError(
            f"subset level {lower_level} exceeds grid level {grid.level}"
        )
    return build_smolyak(grid.dim, lower_level)


def uniform_random_design(dim: int, n: int, seed: int) -> np.ndarray:
    """Seeded uniform random design on [-1, 1]^m with unique rows."""
    if dim < 1 or n < 1:
        raise DomainError("random design needs dim >= 1 and n >= 1")
    rng = np.random.default_rng(seed)
    nodes = rng.uniform(-1.0, 1.0, size=(n, dim))
    # Collisions are measure-zero; regenerate defensively if they occur.
    while np.unique(nodes, axis=0).shape[0] != n:
        nodes = rng.uniform(-1.0, 1.0, size=(n, dim))
    return nodes


# -- design file: one row per node, coordinates at 17 significant digits ----

@dataclass(frozen=True)
class DesignFile:
    """Parsed design file: node matrix plus provenance header fields."""

    kind: str                      # "smolyak" or "random"
    dim: int
    nodes: np.ndarray              # (N, dim)
    weights: np.ndarray | None     # present iff kind == "smolyak"
    level: int | None = None
    seed: int | None = None


def write_design(path, grid_or_nodes, *, kind: str | None = None,
                 level: int | None = None, seed: int | None = None) -> None:
    """Write a design file for a SparseGrid or a plain node matrix."""
    if isinstance(grid_or_nodes, SparseGrid):
        grid = grid_or_nodes
        nodes, weights = grid.nodes, grid.weights
        kind = "smolyak"
        level = grid.level
    else:
        nodes = np.asarray(grid_or_nodes, dtype=float)
        weights = None
        kind = kind or "random"
    with open(path, "w") as fh:
        fh.write("# pccal design\n")
        fh.write(f"# kind = {kind}\n")
        fh.write(f"# dim = {nodes.shape[1]}\n")
        fh.write(f"# n = {nodes.shape[0]}\n")
        if level is not None:
            fh.write(f"# level = {level}\n")
        if seed is not None:
            fh.write(f"# seed = {seed}\n")
        cols = "index xi*dim" + (" weight" if weights is not None else "")
        fh.write(f"# columns = {cols}\n")
        for q in range(nodes.shape[0]):
            row = [str(q)] + [f"{x:.16e}" for x in nodes[q]]
            if weights is not None:
                row.append(f"{weights[q]:.16e}")
            fh.write(" ".join(row) + "\n")


def _parse_header(path) -> tuple[dict, list[str]]:
    header: dict[str, str] = {}
    rows: list[str] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    header[key.strip()] = value.strip()
                continue
            rows.append(line)
    return header, rows


def read_design(path) -> DesignFile:
    """Read a design file written by write_design."""
    header, rows = _parse_header(path)
    if not rows:
        raise ConfigError(f"design file {path} contains no nodes")
    kind = header.get("kind", "random")
    try:
        dim = int(header["dim"])
    except KeyError as exc:
        raise ConfigError(f"design file {path} missing 'dim' header") from exc
    has_weights = kind == "smolyak"
    nodes = np.empty((len(rows), dim))
    weights = np.empty(len(rows)) if has_weights else None
    expected = 1 + dim + (1 if has_weights else 0)
    for i, line in enumerate(rows):
        fields = line.split()
        if len(fields) != expected:
            raise ConfigError(
                f"design file {path}: row {i} has {len(fields)} fields, expected {expected}"
            )
        nodes[i] = [float(f) for f in fields[1:1 + dim]]
        if has_weights:
            weights[i] = float(fields[1 + dim])
    level = int(header["level"]) if "level" in header else None
    seed = int(header["seed"]) if "seed" in header else None
    return DesignFile(kind=kind, dim=dim, nodes=nodes, weights=weights,
                      level=level, seed=seed)
