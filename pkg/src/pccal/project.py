"""Project config file: strict, sectioned, line-numbered error reporting.

The format is deliberately small: `[section]` headers, `key = value` lines,
`#` comments. Unknown sections, unknown keys and duplicate keys are hard
errors carrying the offending line number, because a silently ignored typo
in a long calibration run is the costliest failure mode this tool has.

Sections:

    [parameters]   one `name = lower upper [default]` line per parameter
    [design]       kind = smolyak|random; level; n; seed
    [model]        kind = synthetic|external and the per-kind keys
    [fit]          method = nisp|bpdn; order; bpdn solver/CV settings
    [calibration]  alpha beta ke iterations burn_in proposal_scale seed tune
    [paths]        work_dir, output_dir
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .bpdn import BpdnConfig
from .errors import ConfigError
from .harness import ExternalModelSpec, OutputParser, SyntheticModel, smooth_model
from .parameters import ParameterSpace

__all__ = ["ProjectConfig", "parse_config_text", "load_config"]

_KNOWN_KEYS = {
    "design": {"kind", "level", "n", "seed"},
    "model": {"kind", "model", "noise_sigma", "noise_seed", "command",
              "input_template_file", "output_kind", "output_key",
              "output_column", "output_file", "timeout"},
    "fit": {"method", "order", "delta", "cv_folds", "delta_grid",
            "max_iters", "opt_tol", "seed"},
    "calibration": {"alpha", "beta", "ke", "iterations", "burn_in",
                    "proposal_scale", "seed", "tune"},
    "paths": {"work_dir", "output_dir"},
}
_KNOWN_SECTIONS = {"parameters"} | set(_KNOWN_KEYS)


def parse_config_text(text: str, origin: str = "<config>") -> dict[str, list[tuple[int, str, str]]]:
    """Parse into {section: [(line_no, key, value), ...]}, strictly."""
    sections: dict[str, list[tuple[int, str, str]]] = {}
    current: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _KNOWN_SECTIONS:
                raise ConfigError(f"{origin}:{lineno}: unknown section [{name}]")
            if name in sections:
                raise ConfigError(f"{origin}:{lineno}: duplicate section [{name}]")
            sections[name] = []
            current = name
            continue
        if current is None:
            raise ConfigError(f"{origin}:{lineno}: content before any [section]")
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {line!r}")
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if current != "parameters":
            if key not in _KNOWN_KEYS[current]:
                raise ConfigError(
                    f"{origin}:{lineno}: unknown key {key!r} in section [{current}]"
                )
        if any(k == key for _, k, _ in sections[current]):
            raise ConfigError(
                f"{origin}:{lineno}: duplicate key {key!r} in section [{current}]"
            )
        sections[current].append((lineno, key, value))
    return sections


def _typed(section, items, key, cast, default=None, required=False, origin=""):
    for lineno, k, v in items:
        if k == key:
            try:
                return cast(v)
            except ValueError as exc:
                raise ConfigError(
                    f"{origin}:{lineno}: key {key!r} in [{section}]: "
                    f"cannot parse {v!r}"
                ) from exc
    if required:
        raise ConfigError(f"{origin}: section [{section}] is missing key {key!r}")
    return default


def _parse_bool(v: str) -> bool:
    low = v.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(v)


def _parse_float_list(v: str) -> np.ndarray:
    return np.array([float(f) for f in v.replace(",", " ").split()])


@dataclass
class ProjectConfig:
    """Typed view of a parsed project config."""

    origin: str
    space: ParameterSpace
    design_kind: str = "smolyak"
    design_level: int = 5
    design_n: int = 0
    design_seed: int = 0
    model_kind: Optional[str] = None
    synthetic: Optional[SyntheticModel] = None
    external_keys: dict = field(default_factory=dict)
    fit_method: str = "bpdn"
    fit_order: int = 5
    bpdn: BpdnConfig = field(default_factory=BpdnConfig)
    calib_alpha: float = 18.18
    calib_beta: float = 72.02
    calib_ke: float = 17.0
    calib_iterations: int = 1_000_000
    calib_burn_in: Optional[int] = None
    calib_proposal_scale: np.ndarray = None
    calib_seed: int = 0
    calib_tune: bool = True
    work_dir: Path = Path("work")
    output_dir: Path = Path("out")

    def external_spec(self) -> ExternalModelSpec:
        if self.model_kind != "external":
            raise ConfigError(f"{self.origin}: [model] kind is not 'external'")
        k = self.external_keys
        parser = OutputParser(
            kind=k.get("output_kind", "key"),
            key=k.get("output_key", "E"),
            column=int(k.get("output_column", 0)),
            filename=k.get("output_file", "output.txt"),
        )
        template = None
        if k.get("input_template_file"):
            template = Path(k["input_template_file"]).read_text()
        return ExternalModelSpec(
            work_dir=self.work_dir,
            parser=parser,
            input_template=template,
            command=k.get("command"),
            timeout=float(k.get("timeout", 3600.0)),
        )


def load_config(path) -> ProjectConfig:
    """Read and validate a project config file."""
    origin = str(path)
    text = Path(path).read_text()
    sections = parse_config_text(text, origin=origin)

    if "parameters" not in sections or not sections["parameters"]:
        raise ConfigError(f"{origin}: missing or empty [parameters] section")
    space = ParameterSpace.from_items(
        [(k, v) for _, k, v in sections["parameters"]]
    )

    cfg = ProjectConfig(origin=origin, space=space)

    design = sections.get("design", [])
    cfg.design_kind = _typed("design", design, "kind", str, "smolyak", origin=origin)
    if cfg.design_kind not in ("smolyak", "random"):
        raise ConfigError(f"{origin}: [design] kind must be smolyak or random")
    cfg.design_level = _typed("design", design, "level", int, 5, origin=origin)
    cfg.design_n = _typed("design", design, "n", int, 0, origin=origin)
    cfg.design_seed = _typed("design", design, "seed", int, 0, origin=origin)
    if cfg.design_kind == "random" and cfg.design_n < 1:
        raise ConfigError(f"{origin}: [design] kind=random requires n >= 1")

    model = sections.get("model")
    if model is not None:
        cfg.model_kind = _typed("model", model, "kind", str, required=True, origin=origin)
        if cfg.model_kind == "synthetic":
            name = _typed("model", model, "model", str, "smooth", origin=origin)
            if name != "smooth":
                raise ConfigError(
                    f"{origin}: [model] synthetic model {name!r} unknown (only 'smooth')"
                )
            sigma = _typed("model", model, "noise_sigma", float, None, origin=origin)
            seed = _typed("model", model, "noise_seed", int, 0, origin=origin)
            cfg.synthetic = smooth_model(seed=seed) if sigma is None \
                else smooth_model(noise_sigma=sigma, seed=seed)
        elif cfg.model_kind == "external":
            cfg.external_keys = {k: v for _, k, v in model if k != "kind"}
        else:
            raise ConfigError(
                f"{origin}: [model] kind must be synthetic or external, got {cfg.model_kind!r}"
            )

    fit = sections.get("fit", [])
    cfg.fit_method = _typed("fit", fit, "method", str, "bpdn", origin=origin)
    if cfg.fit_method not in ("nisp", "bpdn"):
        raise ConfigError(f"{origin}: [fit] method must be nisp or bpdn")
    cfg.fit_order = _typed("fit", fit, "order", int, 5, origin=origin)
    grid = _typed("fit", fit, "delta_grid", _parse_float_list, None, origin=origin)
    kwargs = dict(
        delta=_typed("fit", fit, "delta", float, None, origin=origin),
        cv_folds=_typed("fit", fit, "cv_folds", int, 4, origin=origin),
        max_iters=_typed("fit", fit, "max_iters", int, 4000, origin=origin),
        opt_tol=_typed("fit", fit, "opt_tol", float, 1e-5, origin=origin),
        seed=_typed("fit", fit, "seed", int, 0, origin=origin),
    )
    if grid is not None:
        kwargs["delta_grid"] = grid
    cfg.bpdn = BpdnConfig(**kwargs)

    calib = sections.get("calibration", [])
    cfg.calib_alpha = _typed("calibration", calib, "alpha", float, 18.18, origin=origin)
    cfg.calib_beta = _typed("calibration", calib, "beta", float, 72.02, origin=origin)
    cfg.calib_ke = _typed("calibration", calib, "ke", float, 17.0, origin=origin)
    cfg.calib_iterations = _typed("calibration", calib, "iterations", int, 1_000_000, origin=origin)
    cfg.calib_burn_in = _typed("calibration", calib, "burn_in", int, None, origin=origin)
    cfg.calib_proposal_scale = _typed(
        "calibration", calib, "proposal_scale", _parse_float_list,
        np.array([0.1]), origin=origin,
    )
    cfg.calib_seed = _typed("calibration", calib, "seed", int, 0, origin=origin)
    cfg.calib_tune = _typed("calibration", calib, "tune", _parse_bool, True, origin=origin)

    paths = sections.get("paths", [])
    cfg.work_dir = Path(_typed("paths", paths, "work_dir", str, "work", origin=origin))
    cfg.output_dir = Path(_typed("paths", paths, "output_dir", str, "out", origin=origin))
    return cfg
