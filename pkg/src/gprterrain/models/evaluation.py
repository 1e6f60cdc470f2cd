from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..simulate import N_CLASSES, TerrainClass
from .clustering import best_cluster_mapping
from .networks import ClusterVae, Model

CLASS_COLUMNS = tuple(c.name.lower() for c in TerrainClass)  # asphalt, grass, sand, sidewalk


@dataclass
class EvalReport:
    overall: float
    per_class: tuple[float, ...]
    confusion: np.ndarray  # rows: true class, cols: predicted class
    trials: int = 1
    trial_overall: tuple[float, ...] = field(default=())

    @property
    def support(self) -> np.ndarray:
        return self.confusion.sum(axis=1)

    def row(self) -> list[float]:
        return [self.overall, *self.per_class]


def report_from_predictions(predicted, labels) -> EvalReport:
    y = np.asarray(labels, dtype=np.int64)
    p = np.asarray(predicted, dtype=np.int64)
    if len(y) == 0:
        raise ValueError("cannot evaluate on an empty test set")
    if p.shape != y.shape:
        raise ValueError(f"predictions shape {p.shape} does not match labels shape {y.shape}")
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(confusion, (y, p), 1)
    support = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(support > 0, np.diag(confusion) / np.maximum(support, 1), np.nan)
    overall = float(np.trace(confusion) / len(y))
    return EvalReport(overall, tuple(float(v) for v in per_class), confusion, 1, (overall,))


def evaluate(model: Model, x: np.ndarray, y: np.ndarray,
             cluster_mapping: dict[int, int] | None = None) -> EvalReport:
    """Argmax evaluation of a trained model on prepared test inputs.

    For a ClusterVae the cluster ids are mapped to classes with
    ``cluster_mapping``, or with the best bijection on ``y`` when omitted.
    """
    if len(y) == 0:
        raise ValueError("cannot evaluate on an empty test set")
    predicted = model.predict(x)
    if isinstance(model, ClusterVae):
        if cluster_mapping is None:
            _, cluster_mapping = best_cluster_mapping(predicted, y)
        predicted = np.array([cluster_mapping.get(int(a), int(a)) for a in predicted])
    return report_from_predictions(predicted, y)


def aggregate(reports: Sequence[EvalReport]) -> EvalReport:
    """Average accuracies over trials; confusion matrices are summed."""
    if not reports:
        raise ValueError("no reports to aggregate")
    overall = [r.overall for r in reports]
    per_class = np.mean([r.per_class for r in reports], axis=0)
    confusion = np.sum([r.confusion for r in reports], axis=0)
    trial_overall = tuple(v for r in reports for v in r.trial_overall)
    return EvalReport(float(np.mean(overall)), tuple(float(v) for v in per_class), confusion,
                      sum(r.trials for r in reports), trial_overall)
