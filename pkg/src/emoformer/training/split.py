import logging

import numpy as np

from emoformer.errors import ArgumentError, StratificationError
from emoformer.training.manifest import Manifest, Partition

log = logging.getLogger(__name__)

MINIMUM_CLASS_SIZE = 2

# Absorbs rounding noise in ratio · count before flooring.
FLOOR_TOLERANCE = 1e-9


def allocate(counts: np.ndarray, ratio: float) -> np.ndarray:
    """
    Number of items per class that go to the first part of a split. Each class keeps at
    least one item on either side.
    """
    exact = ratio * counts
    first = np.clip(np.floor(exact + FLOOR_TOLERANCE).astype(int), 1, counts - 1)
    total = int(np.floor(ratio * counts.sum() + FLOOR_TOLERANCE))
    total = min(max(total, len(counts)), int(counts.sum()) - len(counts))

    remainder = exact - first
    # Stable sorts break ties between equal fractional parts by class order.
    while first.sum() < total:
        open_classes = np.flatnonzero(first < counts - 1)
        chosen = open_classes[np.argsort(-remainder[open_classes], kind='stable')[0]]
        first[chosen] += 1
        remainder[chosen] -= 1
    while first.sum() > total:
        open_classes = np.flatnonzero(first > 1)
        chosen = open_classes[np.argsort(remainder[open_classes], kind='stable')[0]]
        first[chosen] -= 1
        remainder[chosen] += 1
    return first


def stratified_indices(
    labels: list[str], ratio: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """
    Sorted indices of a stratified two-way split. The first part holds ⌊ratio · N⌋ items;
    per class, counts are floored and the remainder goes to the largest fractional parts.
    Members of a class are assigned after a seeded permutation.

    :raises StratificationError: If a class has fewer than two members.
    """
    if not 0 < ratio < 1:
        raise ArgumentError(f'Split ratio must lie in (0, 1), got {ratio}')
    if not labels:
        raise ArgumentError('Cannot split an empty manifest')

    classes, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    too_small = [str(c) for c, n in zip(classes, counts) if n < MINIMUM_CLASS_SIZE]
    if too_small:
        raise StratificationError(
            'Every class needs at least two samples to be split, too few for: '
            + ', '.join(too_small)
        )

    rng = np.random.default_rng(seed % 2**32)
    first, second = [], []
    for code, take in enumerate(allocate(counts, ratio)):
        members = rng.permutation(np.flatnonzero(inverse == code))
        first.append(members[:take])
        second.append(members[take:])
    return np.sort(np.concatenate(first)), np.sort(np.concatenate(second))


def split(manifest: Manifest, ratio: float = 0.7, seed: int = 0) -> tuple[Manifest, Manifest]:
    """
    Stratified, seeded split into a training and a test partition. Only the training
    partition may be augmented afterwards.
    """
    train_idx, test_idx = stratified_indices(manifest.labels, ratio, seed)
    train = manifest.subset(train_idx, Partition.TRAIN)
    test = manifest.subset(test_idx, Partition.TEST)
    log.info(
        'Split %d clips into %d for training and %d for testing',
        len(manifest),
        len(train),
        len(test),
    )
    return train, test


def split_validation(train: Manifest, fraction: float, seed: int) -> tuple[Manifest, Manifest]:
    """
    Carves a stratified validation partition out of a training partition, used for early
    stopping instead of the test partition.
    """
    keep_idx, validation_idx = stratified_indices(train.labels, 1.0 - fraction, seed + 1)
    return (
        train.subset(keep_idx, Partition.TRAIN),
        train.subset(validation_idx, Partition.VALIDATION),
    )
