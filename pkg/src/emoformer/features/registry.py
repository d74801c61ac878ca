from dataclasses import dataclass
from enum import StrEnum
from typing import Callable

import numpy as np

from emoformer.audio import AudioClip
from emoformer.errors import ArgumentError
from emoformer.features.mfcc import MfccConfig, extract_mfcc, segment
from emoformer.features.xvector import XVectorModel, extract_xvector


class FeatureKind(StrEnum):
    MFCC = 'mfcc'
    XVECTOR = 'xvector'
    FUSION = 'fusion'


@dataclass(frozen=True, eq=False)
class FeatureSample:
    """
    One model input derived from a clip. `data` is the 2-D map fed to the convolutional
    stack; `extra` is the x-vector concatenated before the classifier in fusion mode.
    """

    data: np.ndarray
    parent_id: str
    index: int
    extra: np.ndarray | None = None


@dataclass(frozen=True)
class FeatureContext:
    mfcc: MfccConfig
    xvector_model: XVectorModel | None = None

    def require_xvector_model(self) -> XVectorModel:
        if self.xvector_model is None:
            raise ArgumentError('X-vector features need an x-vector extractor')
        return self.xvector_model


type FeatureFunction = Callable[[AudioClip, FeatureContext], list[FeatureSample]]

known_feature_kinds = dict[FeatureKind, FeatureFunction]()


def feature_kind(kind: FeatureKind):
    """
    Decorator used to register feature extraction functions.
    """

    def register(func: FeatureFunction) -> FeatureFunction:
        if kind in known_feature_kinds:
            raise ValueError(f'Another feature function for {kind} has already been registered')
        known_feature_kinds[kind] = func
        return func

    return register


def extract_features(
    kind: FeatureKind, clip: AudioClip, context: FeatureContext
) -> list[FeatureSample]:
    """
    Runs the extractor registered for a feature kind.

    :raise KeyError: If no extractor is registered for the kind.
    """
    return known_feature_kinds[FeatureKind(kind)](clip, context)


@feature_kind(FeatureKind.MFCC)
def mfcc_segments(clip: AudioClip, context: FeatureContext) -> list[FeatureSample]:
    config = context.mfcc
    matrix = extract_mfcc(clip, config)
    return [
        FeatureSample(data=s.data, parent_id=s.parent_id, index=s.index)
        for s in segment(matrix, config.segment_frames, config.overlap_frames)
    ]


@feature_kind(FeatureKind.XVECTOR)
def xvector_map(clip: AudioClip, context: FeatureContext) -> list[FeatureSample]:
    vector = extract_xvector(extract_mfcc(clip, context.mfcc), context.require_xvector_model())
    return [FeatureSample(data=vector.values[None, :], parent_id=clip.source_id, index=0)]


@feature_kind(FeatureKind.FUSION)
def mfcc_segments_with_xvector(clip: AudioClip, context: FeatureContext) -> list[FeatureSample]:
    config = context.mfcc
    matrix = extract_mfcc(clip, config)
    vector = extract_xvector(matrix, context.require_xvector_model())
    return [
        FeatureSample(data=s.data, parent_id=s.parent_id, index=s.index, extra=vector.values)
        for s in segment(matrix, config.segment_frames, config.overlap_frames)
    ]
