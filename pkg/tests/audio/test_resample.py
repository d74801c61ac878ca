import unittest

import numpy as np

from emoformer.audio import AudioClip, resample, resample_by_ratio
from emoformer.errors import ArgumentError


def sine(frequency: float, seconds: float, rate: int) -> AudioClip:
    t = np.arange(round(seconds * rate)) / rate
    return AudioClip(0.5 * np.sin(2 * np.pi * frequency * t), rate, source_id='sine')


def dominant_frequency(clip: AudioClip) -> float:
    spectrum = np.abs(np.fft.rfft(clip.samples * np.hanning(len(clip))))
    return float(np.argmax(spectrum) * clip.sample_rate / len(clip))


class ResampleTest(unittest.TestCase):

    def test_output_length(self):
        cases = [
            (44100, 16000, 44100, 16000),
            (48000, 16000, 48000 * 15, 240000),
            (8000, 16000, 12345, 24690),
            (22050, 16000, 1001, 726),
        ]
        for source, target, length, expected in cases:
            with self.subTest(source=source, target=target, length=length):
                clip = AudioClip(np.zeros(length), source)
                resampled = resample(clip, target)
                self.assertEqual(len(resampled), expected)
                self.assertEqual(resampled.sample_rate, target)

    def test_same_rate_is_identity(self):
        clip = sine(440, 0.1, 16000)
        self.assertIs(resample(clip, 16000), clip)

    def test_tone_keeps_its_frequency(self):
        resampled = resample(sine(1000, 1.0, 44100), 16000)
        self.assertAlmostEqual(dominant_frequency(resampled), 1000, delta=2)

    def test_content_above_nyquist_is_removed(self):
        # 7 kHz is above the 4 kHz Nyquist frequency of the target rate.
        resampled = resample(sine(7000, 1.0, 16000), 8000)
        self.assertLess(np.max(np.abs(resampled.samples[100:-100])), 0.05)

    def test_source_id_is_kept(self):
        self.assertEqual(resample(sine(440, 0.1, 16000), 8000).source_id, 'sine')

    def test_rejects_invalid_rate(self):
        clip = sine(440, 0.1, 16000)
        for rate in (0, -8000, 1.5):
            with self.subTest(rate=rate), self.assertRaises(ArgumentError):
                resample(clip, rate)

    def test_ratio_changes_length(self):
        samples = np.zeros(16000, dtype=np.float32)
        self.assertEqual(len(resample_by_ratio(samples, 0.5)), 8000)
        self.assertEqual(len(resample_by_ratio(samples, 1.0)), 16000)
        with self.assertRaises(ArgumentError):
            resample_by_ratio(samples, 0.0)
