"""
End-to-end experiment: select, split, load, augment, extract features, standardize,
build, train and evaluate. Augmentation runs after splitting and only on the training
partition, so augmented copies of a clip always share its partition.
"""

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from enum import StrEnum
from typing import Any, Callable, Iterator, Self

import numpy as np

from emoformer.audio import AudioClip, load_wav, resample
from emoformer.augmentation import AugmentPlan, augment_set, fix_length
from emoformer.configuration import Configuration
from emoformer.errors import StageFailed
from emoformer.features import (
    FeatureContext,
    FeatureKind,
    MfccConfig,
    XVectorModel,
    default_xvector_model,
    extract_features,
    load_xvector_model,
)
from emoformer.features.xvector import DEFAULT_XVECTOR_SEED
from emoformer.model import (
    EmoFormer,
    EmoFormerConfig,
    MacReport,
    build,
    count_macs,
    mac_reports_by_sequence_mode,
)
from emoformer.training.dataset import Dataset, dataset_from_samples
from emoformer.training.emotions import EmotionSet
from emoformer.training.manifest import Manifest, ManifestEntry, require_augmentable
from emoformer.training.metrics import Metrics, compute_metrics, evaluate_clips
from emoformer.training.scaler import Scaler, standardize_apply, standardize_fit
from emoformer.training.split import split, split_validation
from emoformer.training.trainer import History, TrainConfig, train
from emoformer.utils import parallel_map

log = logging.getLogger(__name__)

type ClipLoader = Callable[[str], AudioClip]


class Stage(StrEnum):
    SELECT = 'select'
    SPLIT = 'split'
    LOAD = 'load'
    AUGMENT = 'augment'
    FEATURES = 'features'
    STANDARDIZE = 'standardize'
    BUILD = 'build'
    TRAIN = 'train'
    EVALUATE = 'evaluate'


@dataclass(frozen=True)
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    mfcc: MfccConfig = field(default_factory=MfccConfig)
    plan: AugmentPlan = field(default_factory=AugmentPlan)
    model: EmoFormerConfig = field(default_factory=EmoFormerConfig)
    sample_rate: int = 16000
    jobs: int = 1
    xvector_weights: str | None = None
    xvector_seed: int = DEFAULT_XVECTOR_SEED
    # Fully resolved configuration echoed into reports.
    resolved: dict[str, Any] = field(default_factory=dict, compare=False)

    @classmethod
    def from_configuration(cls, cfg: Configuration, kind: FeatureKind) -> Self:
        mfcc = MfccConfig.from_configuration(cfg)
        return cls(
            train=TrainConfig.from_configuration(cfg, kind),
            mfcc=mfcc,
            plan=AugmentPlan.from_configuration(cfg),
            model=EmoFormerConfig.from_configuration(cfg, num_classes=2, input_kind=kind),
            sample_rate=cfg.sample_rate,
            jobs=cfg.jobs or 1,
            xvector_weights=cfg.xvector_weights or None,
            xvector_seed=cfg.xvector_seed if cfg.xvector_seed is not None else DEFAULT_XVECTOR_SEED,
            resolved=cfg.to_sections(),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            'train': self.train.to_dict(),
            'mfcc': self.mfcc.to_dict(),
            'plan': self.plan.to_dict(),
            'model': self.model.to_dict(),
            'sample_rate': self.sample_rate,
            'xvector_weights': self.xvector_weights,
            'xvector_seed': self.xvector_seed,
            'resolved': self.resolved,
        }


@dataclass(eq=False)
class ExperimentReport:
    emotions: EmotionSet
    feature_kind: FeatureKind
    config: ExperimentConfig
    history: History
    segment_metrics: Metrics
    clip_metrics: Metrics
    mac_report: MacReport
    mac_reports: dict[str, MacReport]
    counts: dict[str, int]
    timings: dict[str, float]
    latency_seconds: float
    model: EmoFormer
    scaler: Scaler
    extra_scaler: Scaler | None = None

    def metrics_dict(self) -> dict[str, Any]:
        """Everything except wall-clock measurements; identical for runs with equal seeds."""
        return {
            'emotions': list(self.emotions),
            'feature_kind': self.feature_kind.value,
            'seed': self.config.train.seed,
            'config': self.config.to_dict(),
            'counts': self.counts,
            'history': self.history.to_dict(),
            'metrics': {
                'clip': self.clip_metrics.to_dict(self.emotions),
                'segment': self.segment_metrics.to_dict(self.emotions),
            },
            'macs': self.mac_report.total,
        }

    def to_dict(self) -> dict[str, Any]:
        return self.metrics_dict() | {
            'macs': self.mac_report.to_dict(),
            'macs_by_sequence_mode': {
                mode: report.to_dict() for mode, report in self.mac_reports.items()
            },
            'timings_seconds': self.timings,
            'latency_seconds_per_clip': self.latency_seconds,
        }

    def model_metadata(self) -> dict[str, Any]:
        """What inference needs next to the weights to process raw audio."""
        return {
            'emotions': list(self.emotions),
            'feature_kind': self.feature_kind.value,
            'sample_rate': self.config.sample_rate,
            'target_seconds': self.config.plan.target_seconds,
            'mfcc': self.config.mfcc.to_dict(),
            'scaler': self.scaler.to_dict(),
            'extra_scaler': None if self.extra_scaler is None else self.extra_scaler.to_dict(),
            'xvector_weights': self.config.xvector_weights,
            'xvector_seed': self.config.xvector_seed,
        }


@contextmanager
def _stage(stage: Stage, timings: dict[str, float]) -> Iterator[None]:
    start = time.perf_counter()
    log.info('Stage %s', stage)
    try:
        yield
    except StageFailed:
        raise
    except Exception as e:
        raise StageFailed(stage.value, e) from e
    finally:
        timings[stage.value] = time.perf_counter() - start


def xvector_extractor(config: ExperimentConfig) -> XVectorModel:
    if config.xvector_weights:
        return load_xvector_model(config.xvector_weights, config.mfcc.n_coeffs)
    return default_xvector_model(config.mfcc.n_coeffs, config.xvector_seed)


def feature_context(kind: FeatureKind, config: ExperimentConfig) -> FeatureContext:
    needs_xvectors = FeatureKind(kind) in {FeatureKind.XVECTOR, FeatureKind.FUSION}
    return FeatureContext(
        mfcc=config.mfcc,
        xvector_model=xvector_extractor(config) if needs_xvectors else None,
    )


def _features(
    clips: list[list[AudioClip]],
    codes: list[int],
    kind: FeatureKind,
    context: FeatureContext,
    num_classes: int,
    jobs: int,
) -> Dataset:
    variants = [(clip, code) for group, code in zip(clips, codes) for clip in group]
    extracted = parallel_map(lambda item: extract_features(kind, item[0], context), variants, jobs)
    samples, labels = [], []
    for (_, code), clip_samples in zip(variants, extracted):
        samples.extend(clip_samples)
        labels.extend([code] * len(clip_samples))
    return dataset_from_samples(samples, labels, num_classes)


def _standardize(data: Dataset, scaler: Scaler, extra_scaler: Scaler | None) -> Dataset:
    extra = data.extra
    if extra_scaler is not None and extra is not None:
        extra = standardize_apply(extra_scaler, extra).astype(np.float32)
    inputs = standardize_apply(scaler, data.inputs).astype(np.float32)
    return replace(data, inputs=inputs, extra=extra)


def run_experiment(
    manifest: Manifest,
    feature_kind: FeatureKind,
    emotions: EmotionSet,
    config: ExperimentConfig = ExperimentConfig(),
    load: ClipLoader = load_wav,
) -> ExperimentReport:
    """
    Runs the complete pipeline for one feature kind and emotion set.

    :raises StageFailed: Naming the stage that failed; the cause is chained.
    """
    kind = FeatureKind(feature_kind)
    cfg = config.train
    timings: dict[str, float] = {}

    with _stage(Stage.SELECT, timings):
        selected = manifest.select(emotions)
        selected.validate(emotions)

    with _stage(Stage.SPLIT, timings):
        train_manifest, test_manifest = split(selected, cfg.split_ratio, cfg.seed)
        val_manifest = None
        if cfg.validation_split is not None:
            train_manifest, val_manifest = split_validation(
                train_manifest, cfg.validation_split, cfg.seed
            )

    def load_entry(entry: ManifestEntry) -> AudioClip:
        clip = resample(load(entry.path), config.sample_rate)
        return replace(clip, source_id=entry.path)

    with _stage(Stage.LOAD, timings):
        train_clips = parallel_map(load_entry, train_manifest.entries, config.jobs)
        test_clips = parallel_map(load_entry, test_manifest.entries, config.jobs)
        val_clips = (
            parallel_map(load_entry, val_manifest.entries, config.jobs) if val_manifest else []
        )

    def unaugmented(clip: AudioClip) -> list[AudioClip]:
        return [fix_length(clip, config.plan.target_seconds)]

    with _stage(Stage.AUGMENT, timings):
        if cfg.augment:
            require_augmentable(train_manifest)
            plan = replace(config.plan, sample_rate=config.sample_rate)
            train_groups = parallel_map(lambda c: augment_set(c, plan), train_clips, config.jobs)
        else:
            train_groups = [unaugmented(clip) for clip in train_clips]
        test_groups = [unaugmented(clip) for clip in test_clips]
        val_groups = [unaugmented(clip) for clip in val_clips]
        log.info(
            'Training on %d clips from %d originals',
            sum(map(len, train_groups)),
            len(train_clips),
        )

    with _stage(Stage.FEATURES, timings):
        context = feature_context(kind, config)

        def dataset(groups: list[list[AudioClip]], part: Manifest) -> Dataset:
            codes = [emotions.index(label) for label in part.labels]
            return _features(groups, codes, kind, context, len(emotions), config.jobs)

        train_data = dataset(train_groups, train_manifest)
        test_data = dataset(test_groups, test_manifest)
        val_data = dataset(val_groups, val_manifest) if val_manifest else None

    with _stage(Stage.STANDARDIZE, timings):
        axis = 2 if kind == FeatureKind.XVECTOR else 1
        scaler = standardize_fit(train_data.inputs, axis=axis)
        extra_scaler = None
        if train_data.extra is not None:
            extra_scaler = standardize_fit(train_data.extra, axis=1)
        train_data = _standardize(train_data, scaler, extra_scaler)
        test_data = _standardize(test_data, scaler, extra_scaler)
        if val_data is not None:
            val_data = _standardize(val_data, scaler, extra_scaler)

    with _stage(Stage.BUILD, timings):
        model_config = replace(
            config.model,
            num_classes=len(emotions),
            input_kind=kind,
            n_coeffs=config.mfcc.n_coeffs,
            segment_frames=config.mfcc.segment_frames,
        )
        model = build(model_config)

    with _stage(Stage.TRAIN, timings):
        model, history = train(model, train_data, val_data or test_data, cfg)

    with _stage(Stage.EVALUATE, timings):
        start = time.perf_counter()
        probabilities = model.predict(test_data.inputs, test_data.extra)
        latency = (time.perf_counter() - start) / len(test_manifest)
        segment_metrics = compute_metrics(
            test_data.labels, probabilities.argmax(axis=1), len(emotions)
        )
        clip_metrics = evaluate_clips(probabilities, test_data, emotions)
        mac_report = count_macs(model)
        mac_reports = mac_reports_by_sequence_mode(model_config)

    log.info(
        'Clip accuracy %.4f, macro F1 %.4f (segments: %.4f / %.4f)',
        clip_metrics.accuracy,
        clip_metrics.macro_f1,
        segment_metrics.accuracy,
        segment_metrics.macro_f1,
    )
    counts = {
        'clips': len(selected),
        'train_clips': len(train_manifest),
        'validation_clips': len(val_manifest) if val_manifest else 0,
        'test_clips': len(test_manifest),
        'train_samples': len(train_data),
        'test_samples': len(test_data),
    }
    return ExperimentReport(
        emotions=emotions,
        feature_kind=kind,
        config=config,
        history=history,
        segment_metrics=segment_metrics,
        clip_metrics=clip_metrics,
        mac_report=mac_report,
        mac_reports=mac_reports,
        counts=counts,
        timings=timings,
        latency_seconds=latency,
        model=model,
        scaler=scaler,
        extra_scaler=extra_scaler,
    )
