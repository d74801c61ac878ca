import logging
import math

import numpy as np

from emoformer.audio import AudioClip, resample, resample_by_ratio
from emoformer.augmentation.plan import AugmentPlan
from emoformer.augmentation.vocoder import istft, phase_vocoder, stft
from emoformer.errors import ArgumentError
from emoformer.utils import round_half_up

log = logging.getLogger(__name__)


def time_stretch(clip: AudioClip, factor: float) -> AudioClip:
    """
    Changes the duration by 1/factor without altering the pitch (phase vocoder).
    A factor above 1 speeds the clip up.

    :raises ArgumentError: If factor is not positive.
    """
    if not factor > 0 or not math.isfinite(factor):
        raise ArgumentError(f'Stretch factor must be positive, got {factor}')
    return clip.with_samples(_stretch_samples(clip.samples, factor))


def _stretch_samples(samples: np.ndarray, factor: float) -> np.ndarray:
    length = round_half_up(len(samples) / factor)
    if len(samples) == 0 or length == 0:
        return np.zeros(length, dtype=np.float32)
    stretched = phase_vocoder(stft(samples), factor)
    return istft(stretched, length).astype(np.float32)


def pitch_shift(clip: AudioClip, semitones: float) -> AudioClip:
    """
    Shifts the pitch by the given number of semitones while keeping the duration.

    The clip is resampled by r = 2^(semitones/12), which scales every frequency by r and
    the duration by 1/r, and then time-stretched by 1/r to restore the duration.
    """
    if not math.isfinite(semitones):
        raise ArgumentError(f'Pitch shift must be finite, got {semitones}')
    if semitones == 0:
        return clip

    ratio = 2.0 ** (semitones / 12.0)
    compressed = resample_by_ratio(clip.samples, 1.0 / ratio)
    restored = _stretch_samples(compressed, 1.0 / ratio)
    return clip.with_samples(restored)


def fix_length(clip: AudioClip, target_seconds: float) -> AudioClip:
    """
    Zero-pads at the end or truncates at the end to exactly
    round(target_seconds * sample_rate) samples.
    """
    if not target_seconds > 0:
        raise ArgumentError(f'Target length must be positive, got {target_seconds}')
    target = round_half_up(target_seconds * clip.sample_rate)
    if target == len(clip):
        return clip
    if target < len(clip):
        return clip.with_samples(clip.samples[:target])
    return clip.with_samples(np.pad(clip.samples, (0, target - len(clip))))


def augment_set(clip: AudioClip, plan: AugmentPlan) -> list[AudioClip]:
    """
    Produces all variants of a clip described by the plan, in the order
    original, stretches, pitch shifts. Each variant is normalized with fix_length and
    records its transform in source_id.
    """
    if plan.sample_rate is not None:
        clip = resample(clip, plan.sample_rate)

    variants: list[AudioClip] = []
    if plan.include_original:
        variants.append(fix_length(clip, plan.target_seconds).tagged('original'))
    for factor in plan.stretch_factors:
        stretched = fix_length(time_stretch(clip, factor), plan.target_seconds)
        variants.append(stretched.tagged(f'stretch={factor:g}'))
    for semitones in plan.pitch_semitones:
        shifted = fix_length(pitch_shift(clip, semitones), plan.target_seconds)
        variants.append(shifted.tagged(f'pitch={semitones:+g}'))

    log.debug('Augmented %s into %d variant(s)', clip.source_id, len(variants))
    return variants
