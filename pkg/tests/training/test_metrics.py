import unittest

import numpy as np

from emoformer.errors import ArgumentError, ShapeError
from emoformer.training import (
    Dataset,
    EmotionSet,
    Scaler,
    aggregate_by_clip,
    compute_metrics,
    evaluate_clips,
    standardize_apply,
    standardize_fit,
)


def counting_oracle(y_true: list[int], y_pred: list[int], k: int) -> dict:
    confusion = [[0] * k for _ in range(k)]
    for t, p in zip(y_true, y_pred):
        confusion[t][p] += 1
    precision, recall, f1 = [], [], []
    for c in range(k):
        tp = confusion[c][c]
        fp = sum(confusion[r][c] for r in range(k)) - tp
        fn = sum(confusion[c]) - tp
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        precision.append(p)
        recall.append(r)
        f1.append(2 * p * r / (p + r) if p + r else 0.0)
    correct = sum(confusion[c][c] for c in range(k))
    return {
        'accuracy': correct / len(y_true),
        'precision': precision,
        'recall': recall,
        'f1': f1,
        'confusion': confusion,
    }


class ComputeMetricsTest(unittest.TestCase):

    def test_single_class_counts(self):
        # Class 0: three hits, one false alarm and two misses.
        metrics = compute_metrics([0, 0, 0, 0, 0, 1, 1], [0, 0, 0, 1, 1, 0, 1], 2)

        self.assertAlmostEqual(metrics.precision[0], 0.75)
        self.assertAlmostEqual(metrics.recall[0], 0.6)
        self.assertAlmostEqual(metrics.f1[0], 2 / 3)
        self.assertAlmostEqual(metrics.accuracy, 4 / 7)
        np.testing.assert_array_equal(metrics.confusion, [[3, 2], [1, 1]])

    def test_matches_counting_oracle(self):
        rng = np.random.default_rng(0)
        for k in (5, 7, 10, 23):
            for trial in range(50):
                y_true = rng.integers(0, k, size=60).tolist()
                y_pred = rng.integers(0, k, size=60).tolist()
                expected = counting_oracle(y_true, y_pred, k)
                metrics = compute_metrics(y_true, y_pred, k)
                with self.subTest(k=k, trial=trial):
                    self.assertAlmostEqual(metrics.accuracy, expected['accuracy'], places=12)
                    np.testing.assert_allclose(metrics.precision, expected['precision'], atol=1e-12)
                    np.testing.assert_allclose(metrics.recall, expected['recall'], atol=1e-12)
                    np.testing.assert_allclose(metrics.f1, expected['f1'], atol=1e-12)
                    np.testing.assert_array_equal(metrics.confusion, expected['confusion'])
                    self.assertAlmostEqual(metrics.macro_f1, np.mean(expected['f1']), places=12)

    def test_absent_classes_count_as_zero(self):
        metrics = compute_metrics([0, 0, 1], [0, 0, 1], 4)
        np.testing.assert_array_equal(metrics.precision, [1, 1, 0, 0])
        self.assertAlmostEqual(metrics.macro_precision, 0.5)
        np.testing.assert_array_equal(metrics.support, [2, 1, 0, 0])

    def test_macro_f1_is_invariant_under_relabeling(self):
        rng = np.random.default_rng(1)
        y_true, y_pred = rng.integers(0, 7, size=80), rng.integers(0, 7, size=80)
        permutation = rng.permutation(7)
        self.assertAlmostEqual(
            compute_metrics(y_true, y_pred, 7).macro_f1,
            compute_metrics(permutation[y_true], permutation[y_pred], 7).macro_f1,
            places=12,
        )

    def test_empty_input(self):
        with self.assertRaises(ArgumentError):
            compute_metrics([], [], 3)

    def test_length_mismatch(self):
        with self.assertRaises(ShapeError):
            compute_metrics([0, 1], [0], 2)

    def test_report_dictionary(self):
        emotions = EmotionSet(('anger', 'sadness'))
        report = compute_metrics([0, 1, 1], [0, 1, 0], 2).to_dict(emotions)

        self.assertEqual(report['averaging'], 'macro')
        self.assertEqual(report['per_class']['sadness']['support'], 2)
        self.assertEqual(report['confusion'], [[1, 0], [1, 1]])
        self.assertEqual(report['total'], 3)


class ClipAggregationTest(unittest.TestCase):

    def test_segment_probabilities_are_averaged(self):
        probabilities = np.array([[0.9, 0.1], [0.2, 0.8], [0.3, 0.7], [0.6, 0.4]])
        clips, clip_probs, labels = aggregate_by_clip(
            probabilities, ['a', 'a', 'b', 'a'], np.array([0, 0, 1, 0])
        )

        self.assertEqual(clips, ['a', 'b'])
        np.testing.assert_allclose(clip_probs, [[1.7 / 3, 1.3 / 3], [0.3, 0.7]])
        np.testing.assert_array_equal(labels, [0, 1])

    def test_clip_metrics(self):
        data = Dataset(
            inputs=np.zeros((4, 2, 3)),
            labels=[0, 0, 1, 1],
            num_classes=2,
            parent_ids=('a', 'a', 'b', 'b'),
        )
        # Clip a is right on average although its second segment is wrong.
        probabilities = np.array([[0.9, 0.1], [0.4, 0.6], [0.2, 0.8], [0.3, 0.7]])
        metrics = evaluate_clips(probabilities, data, EmotionSet(('x', 'y')))
        self.assertEqual(metrics.accuracy, 1.0)
        self.assertEqual(metrics.total, 2)


class ScalerTest(unittest.TestCase):

    def test_statistics_per_coefficient_row(self):
        rng = np.random.default_rng(0)
        features = rng.normal(loc=np.arange(13)[None, :, None], scale=2.0, size=(20, 13, 30))
        scaler = standardize_fit(features, axis=1)

        rows = features.transpose(1, 0, 2).reshape(13, -1)
        np.testing.assert_allclose(scaler.mean, rows.mean(axis=1))
        np.testing.assert_allclose(scaler.scale, rows.std(axis=1))

        standardized = standardize_apply(scaler, features).transpose(1, 0, 2).reshape(13, -1)
        np.testing.assert_allclose(standardized.mean(axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(standardized.std(axis=1), 1.0)

    def test_vector_dimensions(self):
        features = np.random.default_rng(1).standard_normal((10, 1, 512)) * 3 + 1
        scaler = standardize_fit(features, axis=2)
        self.assertEqual(scaler.mean.shape, (512,))
        self.assertEqual(standardize_apply(scaler, features).shape, (10, 1, 512))

    def test_test_data_does_not_influence_the_scaler(self):
        rng = np.random.default_rng(2)
        train = rng.standard_normal((8, 4, 5))
        scaler = standardize_fit(train)
        test = rng.standard_normal((3, 4, 5)) * 100
        standardize_apply(scaler, test)
        np.testing.assert_array_equal(scaler.mean, standardize_fit(train).mean)
        self.assertFalse(np.allclose(standardize_apply(scaler, test).std(), 1.0))

    def test_constant_features_are_floored(self):
        scaler = standardize_fit(np.ones((4, 2, 3)))
        np.testing.assert_array_equal(scaler.scale, [1e-8, 1e-8])
        np.testing.assert_array_equal(standardize_apply(scaler, np.ones((1, 2, 3))), 0.0)

    def test_round_trips_through_dict(self):
        scaler = Scaler(mean=np.array([1.0, 2.0]), scale=np.array([0.5, 3.0]), axis=2)
        restored = Scaler.from_dict(scaler.to_dict())
        np.testing.assert_array_equal(restored.mean, scaler.mean)
        self.assertEqual(restored.axis, 2)

    def test_wrong_feature_count(self):
        scaler = standardize_fit(np.ones((4, 2, 3)))
        with self.assertRaises(ShapeError):
            standardize_apply(scaler, np.ones((1, 3, 3)))

    def test_needs_training_samples(self):
        with self.assertRaises(ArgumentError):
            standardize_fit(np.ones((0, 2, 3)))
