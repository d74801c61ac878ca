from dataclasses import dataclass
from typing import Any, Self

import numpy as np
from sklearn.preprocessing import StandardScaler

from emoformer.errors import ArgumentError, ShapeError

SCALE_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class Scaler:
    """
    Per-feature mean and standard deviation. `axis` is the feature axis of the stacked
    inputs: 1 for the coefficient rows of [N, H, W] MFCC maps, 2 for the dimensions of
    [N, 1, 512] x-vector maps and 1 for plain [N, D] vectors.
    """

    mean: np.ndarray
    scale: np.ndarray
    axis: int = 1

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        scale = np.maximum(np.asarray(self.scale, dtype=np.float64), SCALE_FLOOR)
        if mean.ndim != 1 or mean.shape != scale.shape:
            raise ShapeError('Scaler statistics', mean.shape, scale.shape)
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'scale', scale)

    def to_dict(self) -> dict[str, Any]:
        return {'mean': self.mean.tolist(), 'scale': self.scale.tolist(), 'axis': self.axis}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        return cls(mean=np.array(data['mean']), scale=np.array(data['scale']), axis=data['axis'])


def _as_rows(features: np.ndarray, axis: int) -> np.ndarray:
    if not 0 < axis < features.ndim:
        raise ArgumentError(f'Feature axis {axis} is invalid for shape {features.shape}')
    moved = np.moveaxis(features, axis, -1)
    return moved.reshape(-1, moved.shape[-1])


def standardize_fit(features: np.ndarray, axis: int = 1) -> Scaler:
    """
    Fits mean and standard deviation per feature (per MFCC coefficient row by default)
    over all training samples and frames. Deviations are floored at 1e-8.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] == 0:
        raise ArgumentError('Cannot fit a scaler without training samples')
    fitted = StandardScaler().fit(_as_rows(features, axis))
    return Scaler(mean=fitted.mean_, scale=np.sqrt(fitted.var_), axis=axis)


def standardize_apply(scaler: Scaler, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if not 0 < scaler.axis < features.ndim or features.shape[scaler.axis] != len(scaler.mean):
        raise ShapeError('Standardized features', len(scaler.mean), features.shape)
    shape = [1] * features.ndim
    shape[scaler.axis] = len(scaler.mean)
    return (features - scaler.mean.reshape(shape)) / scaler.scale.reshape(shape)
