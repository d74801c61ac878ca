import struct
import tempfile
import unittest
import zlib
from pathlib import Path

import numpy as np

from emoformer.errors import ArgumentError, IntegrityError
from emoformer.features import (
    Archive,
    decode_archive,
    decode_array,
    encode_archive,
    encode_array,
    list_features,
    load_array,
    save_array,
    save_feature,
)


class ArrayEncodingTest(unittest.TestCase):

    def test_layout(self):
        array = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], dtype=np.float32)
        data = encode_array(array)

        self.assertEqual(data[:4], b'EMOF')
        self.assertEqual(struct.unpack_from('<IIIII', data, 4), (1, 1, 2, 2, 3))
        self.assertEqual(len(data), 24 + 6 * 4)
        self.assertEqual(data[24:28], struct.pack('<f', 1.0))

    def test_decodes_dtype_and_shape(self):
        for dtype in (np.float32, np.float64):
            with self.subTest(dtype=dtype):
                array = np.arange(24, dtype=dtype).reshape(2, 3, 4)
                decoded = decode_array(encode_array(array))
                self.assertEqual(decoded.dtype, dtype)
                np.testing.assert_array_equal(decoded, array)

    def test_rejects_integer_arrays(self):
        with self.assertRaises(ArgumentError):
            encode_array(np.arange(3))

    def test_truncation(self):
        data = encode_array(np.ones((4, 4), dtype=np.float32))
        with self.assertRaises(IntegrityError):
            decode_array(data[:-1])

    def test_trailing_bytes(self):
        data = encode_array(np.ones(2, dtype=np.float32))
        with self.assertRaises(IntegrityError):
            decode_array(data + b'\x00')

    def test_wrong_magic(self):
        data = encode_array(np.ones(2, dtype=np.float32))
        with self.assertRaises(IntegrityError):
            decode_array(b'EMOX' + data[4:])

    def test_file_round_trip(self):
        array = np.linspace(0, 1, 13 * 469, dtype=np.float32).reshape(13, 469)
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / 'segment.emof'
            save_array(path, array)
            np.testing.assert_array_equal(load_array(path), array)


class ArchiveTest(unittest.TestCase):

    def archive(self) -> Archive:
        return Archive(
            arrays={
                'b.weight': np.ones((2, 3), dtype=np.float32),
                'a.bias': np.zeros(3, dtype=np.float64),
            },
            metadata={'heads': 4, 'emotions': ['angry', 'happy']},
        )

    def test_keeps_order_and_metadata(self):
        decoded = decode_archive(encode_archive(self.archive()))
        self.assertEqual(list(decoded.arrays), ['b.weight', 'a.bias'])
        self.assertEqual(decoded.metadata, {'heads': 4, 'emotions': ['angry', 'happy']})
        self.assertEqual(decoded['a.bias'].dtype, np.float64)

    def test_ends_with_crc32_of_everything_before(self):
        data = encode_archive(self.archive())
        self.assertEqual(struct.unpack('<I', data[-4:])[0], zlib.crc32(data[:-4]))

    def test_flipped_byte_fails_checksum(self):
        data = bytearray(encode_archive(self.archive()))
        data[len(data) // 2] ^= 0xFF
        with self.assertRaises(IntegrityError):
            decode_archive(bytes(data))

    def test_truncated_archive(self):
        data = encode_archive(self.archive())
        for length in (0, 10, len(data) - 1):
            with self.subTest(length=length), self.assertRaises(IntegrityError):
                decode_archive(data[:length])

    def test_single_array_is_not_an_archive(self):
        data = encode_array(np.ones(2, dtype=np.float32))
        data += struct.pack('<I', zlib.crc32(data))
        with self.assertRaises(IntegrityError):
            decode_archive(data)


class StoredFeatureTest(unittest.TestCase):

    def test_sidecar_index(self):
        with tempfile.TemporaryDirectory() as directory:
            root = Path(directory)
            save_feature(root / 'b_1.emof', np.ones((13, 4), np.float32), 'b.wav', 'sad', 1)
            save_feature(root / 'a_0.emof', np.zeros((13, 4), np.float32), 'a.wav', 'happy', 0)
            found = list_features(root)

            self.assertEqual([f.parent_id for f in found], ['a.wav', 'b.wav'])
            self.assertEqual(found[1].label, 'sad')
            self.assertEqual(found[1].segment_index, 1)
            np.testing.assert_array_equal(found[1].load(), np.ones((13, 4)))

    def test_missing_sidecar_is_skipped(self):
        with tempfile.TemporaryDirectory() as directory:
            root = Path(directory)
            save_array(root / 'orphan.emof', np.ones(2, np.float32))
            with self.assertLogs('emoformer.features.container', level='WARNING'):
                self.assertEqual(list_features(root), [])

    def test_broken_sidecar(self):
        with tempfile.TemporaryDirectory() as directory:
            root = Path(directory)
            stored = save_feature(root / 'x.emof', np.ones(2, np.float32), 'x.wav', 'sad', 0)
            stored.sidecar.write_text('{"label": "sad"}', encoding='utf-8')
            with self.assertRaises(IntegrityError):
                list_features(root)
