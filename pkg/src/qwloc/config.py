"""
Experiment configuration files (YAML).

Every section and key is optional; missing values take the defaults listed
on the dataclasses below. Unknown keys are rejected. Angles may be written
as numbers or as multiples of pi ("pi/6", "0.25*pi", "pi").
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, get_origin, get_type_hints

import yaml

from .core import WalkConfig
from .detect import ALL_METHODS, MANUAL_METHODS
from .observables import PeakConfig
from .randomness import MODEL_KINDS

__all__ = [
    "ConfigError",
    "ModelSection",
    "SimulateSection",
    "SweepSection",
    "MlSection",
    "ScalingSection",
    "ExperimentConfig",
    "parse_angle",
    "load_config",
    "loads_config",
    "dump_config",
    "config_hash",
]

_ANGLE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$")


class ConfigError(ValueError):
    """Invalid configuration; ``where`` names the field and, when known, the line."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


def parse_angle(value: Any) -> float:
    if isinstance(value, bool):
        raise ValueError(f"not an angle: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _ANGLE.match(value)
        if m:
            coef = float(m.group(1)) if m.group(1) else 1.0
            denom = float(m.group(2)) if m.group(2) else 1.0
            return coef * math.pi / denom
        return float(value)
    raise ValueError(f"not an angle: {value!r}")


@dataclass
class ModelSection:
    """Disorder model: kind is none, discrete_angle, continuous_angle or random_translation."""

    kind: str = "discrete_angle"
    magnitude: float = 0.0


@dataclass
class SimulateSection:
    realizations: int = 1
    plot_times: list[int] = field(default_factory=list)
    full_ipr: bool = False


@dataclass
class SweepSection:
    """Magnitude grid; param_max defaults to theta0, 2*theta0 or 0.5 by model kind."""

    n_points: int = 50
    spacing: str = "log"
    param_min: float | None = None
    param_max: float | None = None
    refine_factor: int = 5
    replicates: int = 1
    methods: list[str] = field(default_factory=lambda: list(MANUAL_METHODS))


@dataclass
class MlSection:
    classifiers: list[str] = field(default_factory=lambda: ["svm", "mlp"])
    n_samples: int = 1800
    band_width: float | None = None
    param_lo: float | None = None
    param_hi: float | None = None
    holdout_fraction: float = 0.2
    svm_epochs: int = 50
    svm_eta0: float = 0.01
    svm_l2_penalty: float = 1e-4
    svm_normalize: bool = False
    mlp_hidden: list[int] = field(default_factory=lambda: [400, 200, 100, 50])
    mlp_alpha: float = 0.001
    mlp_batch_size: int = 64
    mlp_learning_rate: float = 0.001
    mlp_patience: int = 10
    mlp_max_epochs: int = 300
    mlp_normalize: bool = True
    scan_points: int = 50
    scan_realizations: int = 1
    sizes: list[int] = field(default_factory=lambda: [200, 600, 1000, 1400, 1800])
    repetitions: int = 10
    regions: list[int] = field(default_factory=lambda: [1, 2, 3])
    model_dir: str | None = None


@dataclass
class ScalingSection:
    n_values: list[int] = field(default_factory=lambda: [50, 100, 150, 210, 300, 400])
    model_kinds: list[str] = field(default_factory=lambda: ["discrete_angle"])
    methods: list[str] = field(default_factory=lambda: list(ALL_METHODS))
    replicates: int = 5
    unreliable_fraction: float = 0.25


@dataclass
class ExperimentConfig:
    """
    Top-level configuration.

    n_max defaults to n_t. ``peaks`` holds the peak-classifier thresholds.
    """

    seed: int = 0
    theta0: float = math.pi / 6
    coin_phis: list[float] = field(default_factory=lambda: [math.pi / 2, math.pi / 2])
    n_t: int = 100
    n_max: int | None = None
    model: ModelSection = field(default_factory=ModelSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    ml: MlSection = field(default_factory=MlSection)
    scaling: ScalingSection = field(default_factory=ScalingSection)
    peaks: PeakConfig = field(default_factory=PeakConfig)

    def walk_config(self, n_t: int | None = None) -> WalkConfig:
        n_t = self.n_t if n_t is None else n_t
        n_max = self.n_max if self.n_max is not None else n_t
        return WalkConfig(n_max, n_t, self.theta0, tuple(self.coin_phis), self.seed)


_ANGLE_FIELDS = {"theta0", "coin_phis", "magnitude", "param_min", "param_max", "band_width", "param_lo", "param_hi"}


def _line_map(text: str) -> dict[tuple[str, ...], int]:
    """1-based line of every mapping key, by key path."""
    lines: dict[tuple[str, ...], int] = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = path + (str(k.value),)
                lines[key] = k.start_mark.line + 1
                walk(v, key)

    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return lines
    if root is not None:
        walk(root, ())
    return lines


def _type_name(hint: Any) -> str:
    if get_origin(hint) is None and isinstance(hint, type):
        return hint.__name__
    return str(hint)


def _coerce(value: Any, hint: Any, name: str):
    text = _type_name(hint)
    if value is None:
        if "None" in text:
            return None
        raise ValueError("must not be empty")
    if text.startswith("list"):
        if not isinstance(value, list):
            raise ValueError(f"expected a list, got {value!r}")
        inner = text[len("list["):-1]
        return [_coerce(v, inner, name) for v in value]
    base = text.replace(" | None", "")
    if name in _ANGLE_FIELDS and base in ("float", "list[float]"):
        return parse_angle(value)
    if base == "bool":
        if not isinstance(value, bool):
            raise ValueError(f"expected true or false, got {value!r}")
        return value
    if base == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"expected an integer, got {value!r}")
        return value
    if base == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"expected a number, got {value!r}")
        return float(value)
    if base == "str":
        if not isinstance(value, str):
            raise ValueError(f"expected a string, got {value!r}")
        return value
    raise TypeError(f"unsupported field type {hint}")


def _build(cls, data: Any, path: tuple[str, ...], lines: dict):
    where = ".".join(path) or "<root>"
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", _at(where, path, lines))
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(map(str, data)) - names)
    if unknown:
        key = path + (unknown[0],)
        raise ConfigError(f"unknown key {unknown[0]!r} (allowed: {', '.join(sorted(names))})", _at(".".join(key), key, lines))
    kwargs = {}
    for name, value in data.items():
        key = path + (name,)
        hint = hints[name]
        if dataclasses.is_dataclass(hint):
            kwargs[name] = _build(hint, value, key, lines)
            continue
        try:
            kwargs[name] = _coerce(value, hint, name)
        except ValueError as exc:
            raise ConfigError(str(exc), _at(".".join(key), key, lines)) from None
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), _at(where, path, lines)) from None


def _at(where: str, path: tuple[str, ...], lines: dict) -> str:
    line = lines.get(path)
    return f"{where} (line {line})" if line else where


def _validate(cfg: ExperimentConfig, lines: dict) -> ExperimentConfig:
    def fail(msg, *path):
        raise ConfigError(msg, _at(".".join(path), tuple(path), lines))

    if not 0 <= cfg.seed < 2**64:
        fail("seed must be an unsigned 64-bit integer", "seed")
    if len(cfg.coin_phis) != 2:
        fail("coin_phis needs exactly two angles", "coin_phis")
    if not (math.isfinite(cfg.theta0) and 0 < cfg.theta0 < math.pi / 2):
        fail("theta0 must lie in (0, pi/2)", "theta0")
    if cfg.n_t < 1:
        fail("n_t must be >= 1", "n_t")
    if cfg.n_max is not None and cfg.n_max < cfg.n_t:
        fail("n_max must be >= n_t (the walker must never reach the edge)", "n_max")
    try:
        cfg.walk_config()
    except ValueError as exc:
        fail(str(exc), "coin_phis")
    if cfg.model.kind not in MODEL_KINDS:
        fail(f"unknown kind {cfg.model.kind!r}; choose from {sorted(MODEL_KINDS)}", "model", "kind")
    for kind in cfg.scaling.model_kinds:
        if kind not in MODEL_KINDS:
            fail(f"unknown kind {kind!r}", "scaling", "model_kinds")
    if cfg.sweep.spacing not in ("log", "linear"):
        fail("spacing must be log or linear", "sweep", "spacing")
    if cfg.sweep.n_points < 1:
        fail("n_points must be >= 1", "sweep", "n_points")
    if cfg.sweep.replicates < 1:
        fail("replicates must be >= 1", "sweep", "replicates")
    if cfg.scaling.replicates < 1:
        fail("replicates must be >= 1", "scaling", "replicates")
    if cfg.simulate.realizations < 1:
        fail("realizations must be >= 1", "simulate", "realizations")
    for section, methods, allowed in (
        ("sweep", cfg.sweep.methods, MANUAL_METHODS),
        ("scaling", cfg.scaling.methods, ALL_METHODS),
    ):
        bad = [m for m in methods if m not in allowed]
        if bad:
            fail(f"unknown methods {bad}; choose from {list(allowed)}", section, "methods")
    bad = [c for c in cfg.ml.classifiers if c not in ("svm", "mlp")]
    if bad:
        fail(f"unknown classifiers {bad}", "ml", "classifiers")
    if cfg.ml.n_samples < 2 or cfg.ml.n_samples % 2:
        fail("n_samples must be even and >= 2", "ml", "n_samples")
    if any(r not in (1, 2, 3) for r in cfg.ml.regions):
        fail("regions must be 1, 2 or 3", "ml", "regions")
    if not 0 <= cfg.ml.holdout_fraction < 1:
        fail("holdout_fraction must lie in [0, 1)", "ml", "holdout_fraction")
    return cfg


def loads_config(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark else ""
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", where) from None
    lines = _line_map(text)
    return _validate(_build(ExperimentConfig, data, (), lines), lines)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return loads_config(text)


def to_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False, default_flow_style=None)


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
