"""
Versioned JSON model files.

Floats are written with Python's shortest round-trip repr, so loading a file
reproduces every weight bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .mlp import MlpClassifier
from .svm import LinearClassifier

__all__ = ["FORMAT", "VERSION", "ModelFormatError", "to_dict", "from_dict", "save_model", "load_model"]

FORMAT = "qwloc-classifier"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def _floats(arr) -> list:
    return np.asarray(arr, dtype=np.float64).tolist()


def to_dict(model) -> dict:
    common = {
        "format": FORMAT,
        "version": VERSION,
        "kind": model.kind,
        "normalization": model.normalization,
        "hyperparameters": model.hyperparameters,
        "data_fingerprint": model.data_fingerprint,
        "holdout_accuracy": model.holdout_accuracy,
        "warning": model.warning,
    }
    if isinstance(model, LinearClassifier):
        common.update(weights=_floats(model.weights), bias=float(model.bias))
    elif isinstance(model, MlpClassifier):
        common.update(
            layer_sizes=list(model.layer_sizes),
            l2_alpha=model.l2_alpha,
            weights=[_floats(W) for W in model.weights],
            biases=[_floats(b) for b in model.biases],
        )
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return common


def from_dict(data: dict):
    if data.get("format") != FORMAT:
        raise ModelFormatError(f"not a {FORMAT} file")
    if data.get("version") != VERSION:
        raise ModelFormatError(f"unsupported model file version {data.get('version')!r}")
    meta = dict(
        normalization=data["normalization"],
        hyperparameters=data.get("hyperparameters", {}),
        data_fingerprint=data.get("data_fingerprint", ""),
        holdout_accuracy=data.get("holdout_accuracy"),
        warning=data.get("warning"),
    )
    kind = data.get("kind")
    if kind == "svm":
        return LinearClassifier(np.array(data["weights"], dtype=np.float64), float(data["bias"]), **meta)
    if kind == "mlp":
        return MlpClassifier(
            layer_sizes=tuple(data["layer_sizes"]),
            weights=[np.array(W, dtype=np.float64) for W in data["weights"]],
            biases=[np.array(b, dtype=np.float64) for b in data["biases"]],
            l2_alpha=float(data["l2_alpha"]),
            **meta,
        )
    raise ModelFormatError(f"unknown classifier kind {kind!r}")


def save_model(model, path: str | Path) -> Path:
    arrays = [model.weights] if isinstance(model, LinearClassifier) else [*model.weights, *model.biases]
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise ModelFormatError("refusing to save non-finite weights")
    path = Path(path)
    path.write_text(json.dumps(to_dict(model), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_model(path: str | Path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None
    return from_dict(data)
