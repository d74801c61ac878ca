import tempfile
import unittest
from dataclasses import replace
from pathlib import Path

import numpy as np

from emoformer.engine import Mode, Tensor
from emoformer.errors import ConfigMismatchError, IntegrityError
from emoformer.features import Archive, load_archive, save_archive
from emoformer.model import EmoFormerConfig, build, load_model, load_weights, save_weights

SMALL = EmoFormerConfig(num_classes=5, n_coeffs=8, segment_frames=16)


class WeightsTest(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = Path(self.directory.name) / 'model.emof'
        self.model = build(SMALL)
        # Move the batch statistics away from their initial values.
        inputs = np.random.default_rng(0).standard_normal((4, 8, 16)).astype(np.float32)
        self.model.forward(Tensor(inputs), Mode.TRAIN)
        self.inputs = inputs

    def tearDown(self):
        self.directory.cleanup()

    def test_loaded_model_predicts_identically(self):
        save_weights(self.model, self.path)
        loaded = load_weights(self.path, SMALL)
        np.testing.assert_array_equal(loaded.predict(self.inputs), self.model.predict(self.inputs))

    def test_buffers_are_stored(self):
        save_weights(self.model, self.path)
        loaded = load_weights(self.path)
        np.testing.assert_array_equal(
            loaded.state()['conv2.running_var'], self.model.state()['conv2.running_var']
        )

    def test_metadata_is_returned(self):
        save_weights(self.model, self.path, metadata={'emotions': ['a', 'b', 'c', 'd', 'e']})
        _, metadata = load_model(self.path)
        self.assertEqual(metadata, {'emotions': ['a', 'b', 'c', 'd', 'e']})

    def test_header_records_configuration(self):
        save_weights(self.model, self.path)
        header = load_archive(self.path).metadata
        self.assertEqual(header['kind'], 'emoformer')
        self.assertEqual(header['config'], SMALL.to_dict())
        self.assertEqual(header['batch_norm'], {'epsilon': 1e-3, 'momentum': 0.99})

    def test_other_configuration_is_rejected(self):
        save_weights(self.model, self.path)
        with self.assertRaises(ConfigMismatchError) as context:
            load_weights(self.path, replace(SMALL, num_classes=7))
        self.assertEqual(context.exception.fields, ('num_classes',))

    def test_seed_does_not_count_as_mismatch(self):
        save_weights(self.model, self.path)
        load_weights(self.path, replace(SMALL, seed=42))

    def test_missing_arrays_are_rejected(self):
        save_weights(self.model, self.path)
        archive = load_archive(self.path)
        del archive.arrays['output.bias']
        save_archive(self.path, archive)
        with self.assertRaises(ConfigMismatchError) as context:
            load_weights(self.path)
        self.assertEqual(context.exception.fields, ('output.bias',))

    def test_other_archive_kind(self):
        save_archive(self.path, Archive(metadata={'kind': 'xvector'}))
        with self.assertRaises(ConfigMismatchError):
            load_weights(self.path)

    def test_corrupted_file(self):
        save_weights(self.model, self.path)
        data = bytearray(self.path.read_bytes())
        data[100] ^= 0x01
        self.path.write_bytes(bytes(data))
        with self.assertRaises(IntegrityError):
            load_weights(self.path)
