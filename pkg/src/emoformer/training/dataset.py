from dataclasses import dataclass, replace
from typing import Sequence, Self

import numpy as np

from emoformer.errors import ArgumentError, ShapeError
from emoformer.features import FeatureSample
from emoformer.training.labels import one_hot


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Stacked model inputs [N, H, W] with integer labels. `parent_ids` name the clip each
    sample was cut from; `extra` holds fused x-vectors [N, 512] when present.
    """

    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    parent_ids: tuple[str, ...]
    extra: np.ndarray | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'parent_ids', tuple(self.parent_ids))
        n = len(self.inputs)
        if self.inputs.ndim != 3:
            raise ShapeError('Dataset inputs', ('N', 'H', 'W'), self.inputs.shape)
        if labels.shape != (n,) or len(self.parent_ids) != n:
            raise ShapeError('Dataset labels', (n,), (labels.shape, len(self.parent_ids)))
        if self.extra is not None and len(self.extra) != n:
            raise ShapeError('Dataset extra vectors', n, len(self.extra))

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def one_hot(self) -> np.ndarray:
        return one_hot(self.labels, self.num_classes)

    def subset(self, indices: Sequence[int] | np.ndarray) -> Self:
        indices = np.asarray(indices, dtype=np.int64)
        return replace(
            self,
            inputs=self.inputs[indices],
            labels=self.labels[indices],
            parent_ids=tuple(self.parent_ids[i] for i in indices),
            extra=None if self.extra is None else self.extra[indices],
        )


def dataset_from_samples(
    samples: Sequence[FeatureSample], labels: Sequence[int], num_classes: int
) -> Dataset:
    """Stacks feature samples; `labels` holds one code per sample."""
    if not samples:
        raise ArgumentError('No feature samples to stack')
    extras = [s.extra for s in samples]
    if any(e is None for e in extras) and not all(e is None for e in extras):
        raise ArgumentError('Either all or no feature samples must carry an extra vector')
    return Dataset(
        inputs=np.stack([s.data for s in samples]),
        labels=np.asarray(labels, dtype=np.int64),
        num_classes=num_classes,
        parent_ids=tuple(s.parent_id for s in samples),
        extra=None if extras[0] is None else np.stack(extras),
    )
