from typing import Iterable, Sequence

import numpy as np

from emoformer.errors import ArgumentError
from emoformer.training.emotions import EmotionSet


def label_encode(labels: Iterable[str], emotions: EmotionSet) -> tuple[np.ndarray, np.ndarray]:
    """
    Integer codes (index in the emotion set) and the matching one-hot matrix.

    :raises UnknownLabelError: If a label is not part of the emotion set.
    """
    codes = np.array([emotions.index(label) for label in labels], dtype=np.int64)
    return codes, one_hot(codes, len(emotions))


def one_hot(codes: np.ndarray, num_classes: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    if codes.size and (codes.min() < 0 or codes.max() >= num_classes):
        raise ArgumentError(f'Class codes must lie in [0, {num_classes})')
    return np.eye(num_classes, dtype=np.float32)[codes]


def label_decode(codes: Sequence[int] | np.ndarray, emotions: EmotionSet) -> list[str]:
    decoded = []
    for code in codes:
        if not 0 <= int(code) < len(emotions):
            raise ArgumentError(f'Class code {code} out of range for {len(emotions)} emotions')
        decoded.append(emotions.labels[int(code)])
    return decoded
