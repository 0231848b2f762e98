"""Supervised detectors of the localization transition."""

from .confusion import (
    ConfusionCurve,
    NoTransitionError,
    confusion_curve,
    confusion_scan,
    crossing_rule,
    first_below_rule,
    sample_size_study,
)
from .data import (
    DegenerateSampleError,
    InvalidBandError,
    Sample,
    generate_training_set,
    max_normalize,
    region_split,
    training_bands,
)
from .io import load_model, save_model
from .mlp import MlpClassifier, grid_search_mlp, loss_and_grads, train_mlp
from .svm import LinearClassifier, TrainingFailedError, modified_huber_loss, train_svm

__all__ = [
    "ConfusionCurve",
    "NoTransitionError",
    "confusion_curve",
    "confusion_scan",
    "crossing_rule",
    "first_below_rule",
    "sample_size_study",
    "DegenerateSampleError",
    "InvalidBandError",
    "Sample",
    "generate_training_set",
    "max_normalize",
    "region_split",
    "training_bands",
    "load_model",
    "save_model",
    "MlpClassifier",
    "grid_search_mlp",
    "loss_and_grads",
    "train_mlp",
    "LinearClassifier",
    "TrainingFailedError",
    "modified_huber_loss",
    "train_svm",
]
