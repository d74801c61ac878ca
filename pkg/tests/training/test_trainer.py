import unittest

import numpy as np

from emoformer.errors import ArgumentError, NumericFault, ShapeError
from emoformer.features import FeatureKind
from emoformer.model import EmoFormerConfig, build
from emoformer.training import Dataset, EarlyStopping, TrainConfig, batch_indices, train
from emoformer.training.trainer import accuracy

SMALL = EmoFormerConfig(num_classes=5, n_coeffs=8, segment_frames=16, heads=4, attn_dim=32)


def separable_dataset(per_class: int, num_classes: int = 5, seed: int = 0) -> Dataset:
    """One random template per class plus a little noise."""
    rng = np.random.default_rng(seed)
    templates = rng.standard_normal((num_classes, 8, 16))
    labels = np.repeat(np.arange(num_classes), per_class)
    inputs = templates[labels] + 0.1 * rng.standard_normal((len(labels), 8, 16))
    return Dataset(
        inputs=inputs.astype(np.float32),
        labels=labels,
        num_classes=num_classes,
        parent_ids=tuple(f'clip{i}' for i in range(len(labels))),
    )


class Snapshot:
    """Stands in for a model; its state records when it was taken."""

    def __init__(self):
        self.epoch = 0

    def state(self) -> dict[str, np.ndarray]:
        return {'epoch': np.array(self.epoch)}


class EarlyStoppingTest(unittest.TestCase):

    def test_plateau_stops_after_patience_epochs(self):
        stopping = EarlyStopping(patience=10)
        model = Snapshot()
        values = [0.2, 0.4, 0.6] + [0.6] * 20
        stopped_at = None
        for epoch, value in enumerate(values, start=1):
            model.epoch = epoch
            if stopping.update(epoch, value, model):
                stopped_at = epoch
                break

        self.assertEqual(stopped_at, 13)
        self.assertEqual(stopping.best_epoch, 3)
        self.assertEqual(int(stopping.best_state['epoch']), 3)

    def test_improvement_resets_the_wait(self):
        stopping = EarlyStopping(patience=2)
        model = Snapshot()
        self.assertFalse(stopping.update(1, 0.5, model))
        self.assertFalse(stopping.update(2, 0.4, model))
        self.assertFalse(stopping.update(3, 0.6, model))
        self.assertFalse(stopping.update(4, 0.6, model))
        self.assertTrue(stopping.update(5, 0.1, model))
        self.assertEqual(stopping.best_epoch, 3)


class BatchIndicesTest(unittest.TestCase):

    def test_consecutive_batches(self):
        batches = list(batch_indices(np.arange(10), 4))
        self.assertEqual([b.tolist() for b in batches], [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9]])

    def test_single_trailing_sample_is_merged(self):
        batches = list(batch_indices(np.arange(9), 4))
        self.assertEqual([len(b) for b in batches], [4, 5])

    def test_batch_larger_than_data(self):
        self.assertEqual([len(b) for b in batch_indices(np.arange(3), 64)], [3])


class TrainConfigTest(unittest.TestCase):

    def test_defaults_per_feature_kind(self):
        mfcc = TrainConfig.for_feature_kind(FeatureKind.MFCC)
        xvector = TrainConfig.for_feature_kind(FeatureKind.XVECTOR)
        self.assertEqual((mfcc.max_epochs, mfcc.patience), (50, 10))
        self.assertEqual((xvector.max_epochs, xvector.patience), (20, 5))
        self.assertEqual((mfcc.batch_size, mfcc.learning_rate), (64, 1e-3))

    def test_overrides(self):
        config = TrainConfig.for_feature_kind(FeatureKind.XVECTOR, max_epochs=8, patience=None)
        self.assertEqual((config.max_epochs, config.patience), (8, 5))

    def test_rejects_invalid_values(self):
        for values in (
            {'batch_size': 0},
            {'patience': 0},
            {'patience': 60},
            {'split_ratio': 1.0},
            {'validation_split': 0.0},
            {'monitor': 'val_loss'},
        ):
            with self.subTest(values=values), self.assertRaises(ArgumentError):
                TrainConfig(**values)


class TrainTest(unittest.TestCase):

    def test_overfits_a_small_dataset(self):
        data = separable_dataset(per_class=8)
        config = TrainConfig(
            batch_size=20, max_epochs=200, patience=200, learning_rate=3e-3, seed=0
        )
        model, history = train(build(SMALL), data, None, config)

        self.assertGreaterEqual(accuracy(model, data), 0.95)
        best = max(history.epochs, key=lambda record: record.val_accuracy)
        self.assertEqual(history.best_epoch, best.epoch)

    def test_is_deterministic(self):
        data = separable_dataset(per_class=4, seed=1)
        config = TrainConfig(batch_size=8, max_epochs=3, patience=3, seed=5)
        _, first = train(build(SMALL), data, data, config)
        _, second = train(build(SMALL), data, data, config)
        self.assertEqual(first.to_dict(), second.to_dict())

    def test_restores_the_best_epoch(self):
        data = separable_dataset(per_class=4, seed=2)
        config = TrainConfig(batch_size=8, max_epochs=6, patience=2, seed=0)
        model, history = train(build(SMALL), data, data, config)

        best = history.epochs[history.best_epoch - 1]
        self.assertAlmostEqual(accuracy(model, data), best.val_accuracy)
        self.assertLessEqual(len(history.epochs), 6)
        if len(history.epochs) < 6:
            self.assertTrue(history.stopped_early)

    def test_non_finite_values_name_epoch_and_batch(self):
        data = separable_dataset(per_class=4)
        huge = Dataset(
            inputs=np.full_like(data.inputs, np.finfo(np.float32).max),
            labels=data.labels,
            num_classes=5,
            parent_ids=data.parent_ids,
        )
        with self.assertRaises(NumericFault) as context:
            train(build(SMALL), huge, None, TrainConfig(batch_size=8, max_epochs=2, patience=1))
        self.assertEqual((context.exception.epoch, context.exception.batch), (1, 1))

    def test_class_count_must_match_the_model(self):
        data = separable_dataset(per_class=2, num_classes=3)
        with self.assertRaises(ShapeError):
            train(build(SMALL), data, None, TrainConfig(max_epochs=1, patience=1))

    def test_needs_two_samples(self):
        data = separable_dataset(per_class=2).subset([0])
        with self.assertRaises(ArgumentError):
            train(build(SMALL), data, None, TrainConfig(max_epochs=1, patience=1))
