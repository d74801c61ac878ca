import math
import unittest

import numpy as np

from emoformer.audio import AudioClip
from emoformer.errors import ArgumentError, TooShortError
from emoformer.features import (
    FeatureSegment,
    MfccConfig,
    WindowFunction,
    extract_mfcc,
    frame_and_window,
    hz_to_mel,
    mel_filterbank,
    mel_to_hz,
    power_spectrum,
    pre_emphasis,
    segment,
)

RATE = 16000


def noise(seconds: float, seed: int = 0) -> AudioClip:
    rng = np.random.default_rng(seed)
    return AudioClip(rng.uniform(-0.5, 0.5, round(seconds * RATE)), RATE, source_id='noise')


def brute_force_mfcc(samples: np.ndarray, config: MfccConfig) -> np.ndarray:
    """Textbook MFCC with explicit sums: direct DFT, triangles built bin by bin, naive DCT."""
    x = np.asarray(samples, dtype=np.float64)
    emphasized = [x[0]] + [x[n] - config.alpha * x[n - 1] for n in range(1, len(x))]
    emphasized = np.array(emphasized)

    length = round(RATE * config.frame_len_ms / 1000)
    hop = round(RATE * config.hop_ms / 1000)
    n = np.arange(length)
    hamming = 0.54 - 0.46 * np.cos(2 * np.pi * n / (length - 1))

    nfft, n_bins, n_mels = config.nfft, config.nfft // 2 + 1, config.n_mels
    mel_max = 2595 * math.log10(1 + (RATE / 2) / 700)
    edges = [700 * (10 ** (mel_max * i / (n_mels + 1) / 2595) - 1) for i in range(n_mels + 2)]
    filters = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        lower, peak, upper = edges[m], edges[m + 1], edges[m + 2]
        for k in range(n_bins):
            f = k * RATE / nfft
            if lower <= f <= peak:
                filters[m, k] = (f - lower) / (peak - lower)
            elif peak < f <= upper:
                filters[m, k] = (upper - f) / (upper - peak)

    dft = np.exp(-2j * np.pi * np.outer(np.arange(n_bins), np.arange(length)) / nfft)
    columns = []
    for start in range(0, len(emphasized) - length + 1, hop):
        frame = emphasized[start : start + length] * hamming
        power = np.abs(dft @ frame) ** 2
        log_energy = np.log(filters @ power + 1e-10)
        cepstrum = []
        for k in range(config.n_coeffs):
            scale = math.sqrt(1 / n_mels) if k == 0 else math.sqrt(2 / n_mels)
            total = sum(
                log_energy[m] * math.cos(math.pi * k * (2 * m + 1) / (2 * n_mels))
                for m in range(n_mels)
            )
            cepstrum.append(scale * total)
        columns.append(cepstrum)
    return np.array(columns).T


class MelScaleTest(unittest.TestCase):

    def test_known_points(self):
        self.assertEqual(hz_to_mel(0.0), 0.0)
        self.assertAlmostEqual(float(hz_to_mel(700.0)), 2595 * math.log10(2), places=9)

    def test_inverse(self):
        frequencies = np.array([0.0, 100.0, 1000.0, 4000.0, 8000.0])
        np.testing.assert_allclose(mel_to_hz(hz_to_mel(frequencies)), frequencies, atol=1e-9)

    def test_monotonic(self):
        self.assertTrue(np.all(np.diff(hz_to_mel(np.linspace(0, 8000, 100))) > 0))


class StagesTest(unittest.TestCase):

    def test_pre_emphasis(self):
        np.testing.assert_allclose(pre_emphasis(np.array([1.0, 2.0, 3.0]), 0.97), [1.0, 1.03, 1.06])

    def test_pre_emphasis_rejects_alpha_outside_range(self):
        for alpha in (0.9, 1.0, 0.5):
            with self.subTest(alpha=alpha), self.assertRaises(ArgumentError):
                pre_emphasis(np.ones(4), alpha)

    def test_frames_start_every_hop(self):
        signal = np.arange(1000, dtype=np.float64)
        config = MfccConfig(window=WindowFunction.RECTANGULAR)
        frames = frame_and_window(signal, config, RATE)

        self.assertEqual(frames.shape, (4, 400))
        np.testing.assert_array_equal(frames[:, 0], [0, 160, 320, 480])

    def test_signal_shorter_than_a_frame(self):
        with self.assertRaises(TooShortError) as context:
            frame_and_window(np.zeros(399), MfccConfig(), RATE)
        self.assertEqual(context.exception.required, 400)

    def test_power_spectrum_of_a_bin_centred_tone(self):
        n = np.arange(512)
        spectrum = power_spectrum(np.cos(2 * np.pi * 8 * n / 512)[None, :], 512)
        self.assertEqual(spectrum.shape, (1, 257))
        self.assertEqual(int(np.argmax(spectrum)), 8)
        self.assertAlmostEqual(spectrum[0, 8], 256.0**2, places=6)

    def test_power_spectrum_preserves_energy(self):
        frames = np.random.default_rng(3).standard_normal((6, 400))
        spectrum = power_spectrum(frames, 512)
        # Bins 1 to 255 stand for two conjugate bins of the full spectrum.
        full = spectrum[:, 0] + spectrum[:, -1] + 2 * spectrum[:, 1:-1].sum(axis=1)
        np.testing.assert_allclose(full / 512, (frames**2).sum(axis=1), rtol=1e-6)

    def test_power_spectrum_rejects_invalid_sizes(self):
        with self.assertRaises(ArgumentError):
            power_spectrum(np.zeros((1, 400)), 500)
        with self.assertRaises(ArgumentError):
            power_spectrum(np.zeros((1, 400)), 256)

    def test_filterbank_shape_and_peaks(self):
        filters = mel_filterbank(MfccConfig(), RATE)
        self.assertEqual(filters.shape, (40, 257))
        self.assertTrue(np.all(filters >= 0))
        self.assertTrue(np.all(filters <= 1))
        peaks = filters.argmax(axis=1)
        self.assertTrue(np.all(np.diff(peaks) >= 0), 'Filter peaks should rise with the index')


class ExtractMfccTest(unittest.TestCase):

    def test_matches_brute_force_computation(self):
        config = MfccConfig()
        lengths = np.random.default_rng(20).uniform(0.5, 2.0, size=20)
        for seed, seconds in enumerate(lengths):
            with self.subTest(seconds=round(float(seconds), 3)):
                clip = noise(float(seconds), seed=seed)
                expected = brute_force_mfcc(clip.samples, config)
                actual = extract_mfcc(clip, config).coeffs

                self.assertEqual(actual.shape, expected.shape)
                np.testing.assert_allclose(actual, expected, atol=1e-5)

    def test_frame_count_and_times(self):
        m = extract_mfcc(noise(15.0))
        self.assertEqual(m.coeffs.shape, (13, 1498))
        self.assertAlmostEqual(m.frame_times[1], 0.01)
        self.assertEqual(m.source_id, 'noise')

    def test_silence_is_finite(self):
        m = extract_mfcc(AudioClip(np.zeros(RATE), RATE))
        self.assertTrue(np.all(np.isfinite(m.coeffs)))

    def test_is_deterministic(self):
        clip = noise(1.0, seed=9)
        np.testing.assert_array_equal(extract_mfcc(clip).coeffs, extract_mfcc(clip).coeffs)


class SegmentTest(unittest.TestCase):

    def test_fifteen_seconds_give_four_segments(self):
        segments = segment(extract_mfcc(noise(15.0)), 469, 128)

        self.assertEqual(len(segments), 4)
        for i, s in enumerate(segments):
            self.assertEqual(s.data.shape, (13, 469))
            self.assertEqual(s.index, i)
            self.assertEqual(s.parent_id, 'noise')

    def test_segments_are_offset_by_the_hop(self):
        m = extract_mfcc(noise(15.0))
        segments = segment(m, 469, 128)
        np.testing.assert_array_equal(segments[1].data, m.coeffs[:, 341 : 341 + 469])

    def test_short_clips_without_overlap(self):
        segments = segment(extract_mfcc(noise(2.0)), 64, 0)
        self.assertEqual(len(segments), 3)

    def test_too_few_frames(self):
        with self.assertRaises(TooShortError):
            segment(extract_mfcc(noise(1.0)), 469, 128)

    def test_rejects_overlap_not_below_length(self):
        with self.assertRaises(ArgumentError):
            segment(extract_mfcc(noise(1.0)), 50, 50)

    def test_segment_shape_must_match_the_configuration(self):
        for shape in ((13, 468), (12, 469), (13 * 469,)):
            with self.subTest(shape=shape), self.assertRaises(ArgumentError):
                FeatureSegment(
                    np.zeros(shape), parent_id='clip', index=0, n_coeffs=13, segment_frames=469
                )


class MfccConfigTest(unittest.TestCase):

    def test_defaults(self):
        config = MfccConfig()
        self.assertEqual(config.frame_length(RATE), 400)
        self.assertEqual(config.hop_length(RATE), 160)
        self.assertEqual(config.segment_hop, 341)
        self.assertEqual(config.upper_frequency(RATE), 8000.0)

    def test_round_trips_through_dict(self):
        config = MfccConfig(n_coeffs=20, window=WindowFunction.HANN)
        self.assertEqual(MfccConfig.from_dict(config.to_dict()), config)

    def test_rejects_invalid_values(self):
        for values in (
            {'nfft': 500},
            {'n_coeffs': 41},
            {'overlap_frames': 469},
            {'alpha': 0.8},
            {'hop_ms': 0.0},
        ):
            with self.subTest(values=values), self.assertRaises(ArgumentError):
                MfccConfig(**values)

    def test_fft_smaller_than_frame(self):
        with self.assertRaises(ArgumentError):
            MfccConfig(nfft=256).check_rate(RATE)
