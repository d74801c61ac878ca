import logging
from fractions import Fraction
from math import gcd

import numpy as np
from scipy.signal import resample_poly

from emoformer.audio.clip import AudioClip
from emoformer.errors import ArgumentError
from emoformer.utils import round_half_up

log = logging.getLogger(__name__)

# Kaiser beta of the anti-aliasing windowed-sinc filter.
KAISER_BETA = 5.0

# Largest denominator used when approximating irrational ratios (pitch shifting).
MAX_RATIO_DENOMINATOR = 512


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """
    Band-limited resampling to target_rate with a Kaiser windowed-sinc polyphase filter.

    The output holds exactly round(len * target_rate / sample_rate) samples.
    Resampling to the current rate returns the clip unchanged.

    :raises ArgumentError: If target_rate is not a positive integer.
    """
    if int(target_rate) != target_rate or target_rate <= 0:
        raise ArgumentError(f'Target sample rate must be a positive integer, got {target_rate}')
    target_rate = int(target_rate)
    if target_rate == clip.sample_rate:
        return clip

    divisor = gcd(target_rate, clip.sample_rate)
    up, down = target_rate // divisor, clip.sample_rate // divisor
    log.debug('Resampling %s from %d Hz to %d Hz', clip.source_id, clip.sample_rate, target_rate)
    return clip.with_samples(resample_samples(clip.samples, up, down), sample_rate=target_rate)


def resample_samples(samples: np.ndarray, up: int, down: int) -> np.ndarray:
    """Resamples by the rational factor up/down, returning round(len * up / down) samples."""
    expected = round_half_up(len(samples) * up / down)
    if expected == 0 or len(samples) == 0:
        return np.zeros(expected, dtype=np.float32)

    resampled = resample_poly(
        np.asarray(samples, dtype=np.float64),
        up,
        down,
        window=('kaiser', KAISER_BETA),
    )
    if len(resampled) < expected:
        resampled = np.pad(resampled, (0, expected - len(resampled)))
    return resampled[:expected].astype(np.float32)


def resample_by_ratio(samples: np.ndarray, ratio: float) -> np.ndarray:
    """
    Changes the number of samples by an arbitrary positive ratio (output length ≈ len * ratio),
    approximating the ratio by a fraction with a bounded denominator.
    """
    if not ratio > 0:
        raise ArgumentError(f'Resampling ratio must be positive, got {ratio}')
    fraction = Fraction(ratio).limit_denominator(MAX_RATIO_DENOMINATOR)
    if fraction == 1:
        return np.asarray(samples, dtype=np.float32)
    return resample_samples(samples, fraction.numerator, fraction.denominator)
