import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Self

import numpy as np

from emoformer.audio import AudioClip, load_wav, resample
from emoformer.augmentation import fix_length
from emoformer.errors import ConfigMismatchError
from emoformer.features import (
    FeatureContext,
    FeatureKind,
    MfccConfig,
    default_xvector_model,
    extract_features,
    load_xvector_model,
)
from emoformer.model import EmoFormer, load_model
from emoformer.training.dataset import dataset_from_samples
from emoformer.training.emotions import EmotionSet
from emoformer.training.scaler import Scaler, standardize_apply

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Prediction:
    emotions: EmotionSet
    probabilities: np.ndarray
    segments: int
    latency_seconds: float

    @property
    def label(self) -> str:
        return self.emotions.labels[int(np.argmax(self.probabilities))]

    def to_dict(self) -> dict[str, Any]:
        return {
            'emotions': list(self.emotions),
            'probabilities': {
                name: float(p) for name, p in zip(self.emotions, self.probabilities)
            },
            'label': self.label,
            'segments': self.segments,
            'latency_seconds': self.latency_seconds,
        }


@dataclass(frozen=True, eq=False)
class Predictor:
    """A trained model with the preprocessing it was trained with."""

    model: EmoFormer
    emotions: EmotionSet
    context: FeatureContext
    scaler: Scaler
    extra_scaler: Scaler | None
    sample_rate: int
    target_seconds: float

    @property
    def feature_kind(self) -> FeatureKind:
        return self.model.config.input_kind

    @classmethod
    def load(cls, path: str | Path) -> Self:
        """
        :raises ConfigMismatchError: If the file lacks the preprocessing metadata written
        with experiment reports.
        """
        model, metadata = load_model(path)
        try:
            mfcc = MfccConfig.from_dict(metadata['mfcc'])
            xvector_model = None
            if model.config.input_kind != FeatureKind.MFCC:
                if metadata.get('xvector_weights'):
                    xvector_model = load_xvector_model(metadata['xvector_weights'], mfcc.n_coeffs)
                else:
                    xvector_model = default_xvector_model(mfcc.n_coeffs, metadata['xvector_seed'])
            extra = metadata.get('extra_scaler')
            return cls(
                model=model,
                emotions=EmotionSet(tuple(metadata['emotions'])),
                context=FeatureContext(mfcc=mfcc, xvector_model=xvector_model),
                scaler=Scaler.from_dict(metadata['scaler']),
                extra_scaler=None if extra is None else Scaler.from_dict(extra),
                sample_rate=metadata['sample_rate'],
                target_seconds=metadata['target_seconds'],
            )
        except (KeyError, TypeError) as e:
            raise ConfigMismatchError(['metadata']) from e

    def predict_clip(self, clip: AudioClip) -> Prediction:
        """Class probabilities of a clip: the mean over its segments."""
        start = time.perf_counter()
        clip = fix_length(resample(clip, self.sample_rate), self.target_seconds)
        samples = extract_features(self.feature_kind, clip, self.context)
        data = dataset_from_samples(samples, [0] * len(samples), len(self.emotions))
        inputs = standardize_apply(self.scaler, data.inputs).astype(np.float32)
        extra = data.extra
        if extra is not None and self.extra_scaler is not None:
            extra = standardize_apply(self.extra_scaler, extra).astype(np.float32)
        probabilities = self.model.predict(inputs, extra).mean(axis=0)
        latency = time.perf_counter() - start
        log.debug('Predicted %s from %d segment(s) in %.3f s', clip.source_id, len(data), latency)
        return Prediction(self.emotions, probabilities, len(data), latency)


def infer(audio_path: str | Path, model_path: str | Path) -> Prediction:
    return Predictor.load(model_path).predict_clip(load_wav(audio_path))
