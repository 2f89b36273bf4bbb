"""Evaluated design ensembles: nodes, observed cost values, provenance.

An ensemble pairs canonical design nodes with the scalar cost statistic
observed at each node. Quadrature ensembles additionally carry the Smolyak
weights (required by spectral projection); random ensembles do not.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError, ShapeError

__all__ = ["DesignEnsemble", "write_ensemble", "read_ensemble"]


@dataclass(frozen=True)
class DesignEnsemble:
    """Design nodes with observed values and per-row provenance tags."""

    nodes: np.ndarray                 # (N, m) canonical coordinates
    values: np.ndarray                # (N,)
    weights: Optional[np.ndarray] = None  # (N,), present iff quadrature design
    tags: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 2:
            raise ShapeError(f"nodes must be 2D, got shape {nodes.shape}")
        if values.shape != (nodes.shape[0],):
            raise ShapeError(
                f"values shape {values.shape} does not match {nodes.shape[0]} nodes"
            )
        if nodes.shape[0] < 1:
            raise DomainError("ensemble must contain at least one row")
        if not np.isfinite(values).all():
            raise DomainError("ensemble values must be finite")
        if np.unique(nodes, axis=0).shape[0] != nodes.shape[0]:
            raise DomainError("ensemble nodes contain duplicate rows")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        if self.weights is not None:
            weights = np.asarray(self.weights, dtype=float)
            if weights.shape != (nodes.shape[0],):
                raise ShapeError(
                    f"weights shape {weights.shape} does not match {nodes.shape[0]} nodes"
                )
            object.__setattr__(self, "weights", weights)
        if self.tags and len(self.tags) != nodes.shape[0]:
            raise ShapeError("tags, when given, must have one entry per row")

    @property
    def n_rows(self) -> int:
        return self.nodes.shape[0]

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def subset(self, rows: Sequence[int]) -> "DesignEnsemble":
        rows = np.asarray(rows, dtype=int)
        return DesignEnsemble(
            nodes=self.nodes[rows],
            values=self.values[rows],
            weights=None if self.weights is None else self.weights[rows],
            tags=tuple(self.tags[i] for i in rows) if self.tags else (),
        )


def write_ensemble(path, ensemble: DesignEnsemble, *, kind: str = "") -> None:
    """Write rows of index, coordinates, value, [weight], [tag]."""
    has_w = ensemble.weights is not None
    with open(path, "w") as fh:
        fh.write("# pccal ensemble\n")
        if kind:
            fh.write(f"# kind = {kind}\n")
        fh.write(f"# dim = {ensemble.dim}\n")
        fh.write(f"# n = {ensemble.n_rows}\n")
        fh.write(f"# weights = {'yes' if has_w else 'no'}\n")
        fh.write(f"# tags = {'yes' if ensemble.tags else 'no'}\n")
        for i in range(ensemble.n_rows):
            row = [str(i)] + [f"{x:.16e}" for x in ensemble.nodes[i]]
            row.append(f"{ensemble.values[i]:.16e}")
            if has_w:
                row.append(f"{ensemble.weights[i]:.16e}")
            if ensemble.tags:
                row.append(ensemble.tags[i])
            fh.write(" ".join(row) + "\n")


def read_ensemble(path) -> DesignEnsemble:
    """Read an ensemble file written by write_ensemble."""
    header: dict[str, str] = {}
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
                    header[key.strip()] = value.strip()
                continue
            rows.append(line.split())
    if not rows:
        raise ConfigError(f"ensemble file {path} contains no rows")
    try:
        dim = int(header["dim"])
    except KeyError as exc:
        raise ConfigError(f"ensemble file {path} missing 'dim' header") from exc
    has_w = header.get("weights", "no") == "yes"
    has_tags = header.get("tags", "no") == "yes"
    expected = 1 + dim + 1 + (1 if has_w else 0) + (1 if has_tags else 0)
    nodes = np.empty((len(rows), dim))
    values = np.empty(len(rows))
    weights = np.empty(len(rows)) if has_w else None
    tags: list[str] = []
    for i, fields in enumerate(rows):
        if len(fields) != expected:
            raise ConfigError(
                f"ensemble file {path}: row {i} has {len(fields)} fields, expected {expected}"
            )
        nodes[i] = [float(f) for f in fields[1:1 + dim]]
        values[i] = float(fields[1 + dim])
        pos = 2 + dim
        if has_w:
            weights[i] = float(fields[pos])
            pos += 1
        if has_tags:
            tags.append(fields[pos])
    return DesignEnsemble(nodes=nodes, values=values, weights=weights,
                          tags=tuple(tags))
