import logging
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from emoformer.errors import ArgumentError, ShapeError
from emoformer.model import EmoFormer
from emoformer.training.dataset import Dataset
from emoformer.training.emotions import EmotionSet

log = logging.getLogger(__name__)

AVERAGING = 'macro'


@dataclass(frozen=True, eq=False)
class Metrics:
    """
    Classification metrics. Confusion rows are true labels, columns predictions. The
    headline precision, recall and F1 are unweighted means over all classes.
    """

    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    confusion: np.ndarray

    @property
    def num_classes(self) -> int:
        return len(self.support)

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def macro_precision(self) -> float:
        return float(np.mean(self.precision))

    @property
    def macro_recall(self) -> float:
        return float(np.mean(self.recall))

    @property
    def macro_f1(self) -> float:
        return float(np.mean(self.f1))

    def to_dict(self, emotions: EmotionSet | None = None) -> dict[str, Any]:
        names = list(emotions) if emotions is not None else list(map(str, range(self.num_classes)))
        return {
            'accuracy': float(self.accuracy),
            'averaging': AVERAGING,
            'precision': self.macro_precision,
            'recall': self.macro_recall,
            'f1': self.macro_f1,
            'per_class': {
                name: {
                    'precision': float(self.precision[i]),
                    'recall': float(self.recall[i]),
                    'f1': float(self.f1[i]),
                    'support': int(self.support[i]),
                }
                for i, name in enumerate(names)
            },
            'confusion': self.confusion.tolist(),
            'total': self.total,
        }


def compute_metrics(
    y_true: Sequence[int] | np.ndarray, y_pred: Sequence[int] | np.ndarray, num_classes: int
) -> Metrics:
    """
    :raises ArgumentError: If there is nothing to evaluate.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ShapeError('Predictions', y_true.shape, y_pred.shape)
    if len(y_true) == 0:
        raise ArgumentError('Cannot evaluate an empty test set')

    labels = np.arange(num_classes)
    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, average=None, zero_division=0
    )
    confusion = confusion_matrix(y_true, y_pred, labels=labels)
    return Metrics(
        accuracy=float(np.trace(confusion) / confusion.sum()),
        precision=np.asarray(precision, dtype=np.float64),
        recall=np.asarray(recall, dtype=np.float64),
        f1=np.asarray(f1, dtype=np.float64),
        support=np.asarray(support, dtype=np.int64),
        confusion=np.asarray(confusion, dtype=np.int64),
    )


def aggregate_by_clip(
    probabilities: np.ndarray, parent_ids: Sequence[str], labels: np.ndarray
) -> tuple[list[str], np.ndarray, np.ndarray]:
    """
    Averages segment probabilities per parent clip. Clips keep the order of their first
    segment; the label of a clip is the label of its segments.
    """
    if len(parent_ids) == 0:
        raise ArgumentError('Cannot aggregate an empty prediction set')
    order: dict[str, list[int]] = {}
    for i, parent in enumerate(parent_ids):
        order.setdefault(parent, []).append(i)
    clips = list(order)
    clip_probs = np.stack([probabilities[rows].mean(axis=0) for rows in order.values()])
    clip_labels = np.array([labels[rows[0]] for rows in order.values()], dtype=np.int64)
    return clips, clip_probs, clip_labels


def evaluate(model: EmoFormer, data: Dataset, emotions: EmotionSet) -> Metrics:
    """Segment-level metrics of inference-mode predictions."""
    if len(data) == 0:
        raise ArgumentError('Cannot evaluate an empty test set')
    probabilities = model.predict(data.inputs, data.extra)
    return compute_metrics(data.labels, probabilities.argmax(axis=1), len(emotions))


def evaluate_clips(probabilities: np.ndarray, data: Dataset, emotions: EmotionSet) -> Metrics:
    """Clip-level metrics from segment probabilities averaged per parent clip."""
    _, clip_probs, clip_labels = aggregate_by_clip(probabilities, data.parent_ids, data.labels)
    return compute_metrics(clip_labels, clip_probs.argmax(axis=1), len(emotions))
