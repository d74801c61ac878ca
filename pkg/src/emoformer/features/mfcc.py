import logging
from dataclasses import asdict, dataclass, fields
from enum import StrEnum
from typing import Any, Self

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import dct
from scipy.signal import get_window

from emoformer.audio import AudioClip
from emoformer.configuration import Configuration, DeclaredConfig, declare_configuration
from emoformer.errors import ArgumentError, TooShortError
from emoformer.utils import is_power_of_two, round_half_up

log = logging.getLogger(__name__)

EXPECTED_SAMPLE_RATE = 16000

# Added to filterbank energies before taking the logarithm.
LOG_FLOOR = 1e-10


class WindowFunction(StrEnum):
    HAMMING = 'hamming'
    HANN = 'hann'
    RECTANGULAR = 'rectangular'

    def samples(self, length: int) -> np.ndarray:
        name = 'boxcar' if self == WindowFunction.RECTANGULAR else self.value
        return get_window(name, length, fftbins=False)


declare_configuration(
    'mfcc',
    DeclaredConfig(
        key='alpha',
        readable_name='Pre-emphasis coefficient',
        readable_description='Coefficient of the pre-emphasis filter y[n] = x[n] - alpha x[n-1]. '
        'Must lie strictly between 0.9 and 1.',
        validation_type=float,
        default_value=0.97,
    ),
    DeclaredConfig(
        key='frame_len_ms',
        readable_name='Frame length',
        readable_description='Analysis frame length in milliseconds.',
        validation_type=float,
        default_value=25.0,
    ),
    DeclaredConfig(
        key='hop_ms',
        readable_name='Frame hop',
        readable_description='Distance between the starts of consecutive frames in milliseconds.',
        validation_type=float,
        default_value=10.0,
    ),
    DeclaredConfig(
        key='window',
        readable_name='Window function',
        readable_description='Window every frame is multiplied with.',
        validation_type=WindowFunction,
        default_value=WindowFunction.HAMMING,
    ),
    DeclaredConfig(
        key='nfft',
        readable_name='FFT size',
        readable_description='FFT length (a power of two, at least the frame length).',
        validation_type=int,
        default_value=512,
    ),
    DeclaredConfig(
        key='n_mels',
        readable_name='Mel filters',
        readable_description='Number of triangular filters spaced on the Mel scale.',
        validation_type=int,
        default_value=40,
    ),
    DeclaredConfig(
        key='fmin_hz',
        readable_name='Lowest filter frequency',
        readable_description='Lower edge of the mel filterbank in Hz.',
        validation_type=float,
        default_value=0.0,
    ),
    DeclaredConfig(
        key='fmax_hz',
        readable_name='Highest filter frequency',
        readable_description='Upper edge of the mel filterbank in Hz. Empty means half the '
        'sample rate.',
        validation_type=float,
    ),
    DeclaredConfig(
        key='n_coeffs',
        readable_name='Cepstral coefficients',
        readable_description='Number of DCT coefficients kept per frame (coefficient 0 included).',
        validation_type=int,
        default_value=13,
    ),
    DeclaredConfig(
        key='segment_frames',
        readable_name='Segment length',
        readable_description='Number of MFCC frames per model input segment.',
        validation_type=int,
        default_value=469,
    ),
    DeclaredConfig(
        key='overlap_frames',
        readable_name='Segment overlap',
        readable_description='Number of frames shared by consecutive segments.',
        validation_type=int,
        default_value=128,
    ),
)


@dataclass(frozen=True)
class MfccConfig:
    alpha: float = 0.97
    frame_len_ms: float = 25.0
    hop_ms: float = 10.0
    window: WindowFunction = WindowFunction.HAMMING
    nfft: int = 512
    n_mels: int = 40
    fmin_hz: float = 0.0
    # None means half the sample rate.
    fmax_hz: float | None = None
    n_coeffs: int = 13
    segment_frames: int = 469
    overlap_frames: int = 128

    def __post_init__(self):
        object.__setattr__(self, 'window', WindowFunction(self.window))
        check_alpha(self.alpha)
        if not is_power_of_two(self.nfft):
            raise ArgumentError(f'FFT size must be a power of two, got {self.nfft}')
        if not 0 < self.n_coeffs <= self.n_mels:
            raise ArgumentError(
                f'Need 0 < n_coeffs <= n_mels, got n_coeffs={self.n_coeffs}, n_mels={self.n_mels}'
            )
        if not 0 <= self.overlap_frames < self.segment_frames:
            raise ArgumentError(
                f'Need 0 <= overlap_frames < segment_frames, got {self.overlap_frames} '
                f'and {self.segment_frames}'
            )
        if not (self.frame_len_ms > 0 and self.hop_ms > 0):
            raise ArgumentError('Frame length and hop must be positive')

    def frame_length(self, sample_rate: int) -> int:
        return round_half_up(sample_rate * self.frame_len_ms / 1000.0)

    def hop_length(self, sample_rate: int) -> int:
        return round_half_up(sample_rate * self.hop_ms / 1000.0)

    def upper_frequency(self, sample_rate: int) -> float:
        return sample_rate / 2.0 if self.fmax_hz is None else self.fmax_hz

    @property
    def segment_hop(self) -> int:
        return self.segment_frames - self.overlap_frames

    def check_rate(self, sample_rate: int):
        if self.nfft < self.frame_length(sample_rate):
            raise ArgumentError(
                f'FFT size {self.nfft} is smaller than the frame length '
                f'{self.frame_length(sample_rate)} at {sample_rate} Hz'
            )

    @classmethod
    def from_configuration(cls, cfg: Configuration) -> Self:
        return cls(**{f.name: cfg.get(f.name) for f in fields(cls)})

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data['window'] = self.window.value
        return data


@dataclass(frozen=True, eq=False)
class MfccMatrix:
    """Cepstral coefficients [n_coeffs × T] with the start time of every frame."""

    coeffs: np.ndarray
    frame_times: np.ndarray
    config: MfccConfig
    source_id: str = ''

    def __post_init__(self):
        if self.coeffs.ndim != 2 or self.coeffs.shape[1] < 1:
            raise ArgumentError(f'MFCC matrix needs shape [coeffs, T>=1], got {self.coeffs.shape}')
        if not np.all(np.isfinite(self.coeffs)):
            raise ArgumentError(f'MFCC matrix of {self.source_id!r} contains non-finite values')

    @property
    def num_frames(self) -> int:
        return self.coeffs.shape[1]


@dataclass(frozen=True, eq=False)
class FeatureSegment:
    """A fixed-size window [n_coeffs × segment_frames] cut from an MfccMatrix."""

    data: np.ndarray
    parent_id: str
    index: int
    n_coeffs: int
    segment_frames: int

    def __post_init__(self):
        if self.data.shape != (self.n_coeffs, self.segment_frames):
            raise ArgumentError(
                f'Feature segment {self.index} of {self.parent_id!r} needs shape '
                f'{(self.n_coeffs, self.segment_frames)}, got {self.data.shape}'
            )


def check_alpha(alpha: float):
    if not 0.9 < alpha < 1.0:
        raise ArgumentError(f'Pre-emphasis coefficient must satisfy 0.9 < alpha < 1, got {alpha}')


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def pre_emphasis(signal: np.ndarray, alpha: float) -> np.ndarray:
    """y[0] = x[0] and y[n] = x[n] - alpha x[n-1]."""
    check_alpha(alpha)
    x = np.asarray(signal, dtype=np.float64)
    if len(x) == 0:
        raise ArgumentError('Cannot pre-emphasize an empty signal')
    return np.concatenate((x[:1], x[1:] - alpha * x[:-1]))


def frame_and_window(signal: np.ndarray, config: MfccConfig, sample_rate: int) -> np.ndarray:
    """
    Cuts the signal into frames [num_frames × frame_length], frame i starting at i·hop,
    and multiplies each by the configured window. A trailing partial frame is dropped.
    """
    frame_length = config.frame_length(sample_rate)
    hop = config.hop_length(sample_rate)
    x = np.asarray(signal, dtype=np.float64)
    if len(x) < frame_length:
        raise TooShortError('Signal', frame_length, len(x))

    frames = sliding_window_view(x, frame_length)[::hop]
    return frames * config.window.samples(frame_length)


def power_spectrum(frames: np.ndarray, nfft: int) -> np.ndarray:
    """|DFT|² of every frame, zero-padded to nfft, non-negative frequency bins only."""
    if not is_power_of_two(nfft):
        raise ArgumentError(f'FFT size must be a power of two, got {nfft}')
    if frames.shape[-1] > nfft:
        raise ArgumentError(f'FFT size {nfft} is smaller than the frame length {frames.shape[-1]}')
    spectrum = np.fft.rfft(frames, n=nfft, axis=-1)
    return spectrum.real**2 + spectrum.imag**2


def mel_filterbank(config: MfccConfig, sample_rate: int) -> np.ndarray:
    """
    Triangular filters [n_mels × (nfft/2 + 1)] whose peaks are spaced uniformly on the mel
    scale between fmin and fmax. Filter m rises from peak m-1 to peak m and falls to peak m+1.
    """
    fmin, fmax = config.fmin_hz, config.upper_frequency(sample_rate)
    if not 0 <= fmin < fmax <= sample_rate / 2.0:
        raise ArgumentError(
            f'Need 0 <= fmin < fmax <= {sample_rate / 2.0} Hz, got fmin={fmin}, fmax={fmax}'
        )

    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), config.n_mels + 2))
    bin_frequencies = np.arange(config.nfft // 2 + 1) * sample_rate / config.nfft

    lower, peak, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bin_frequencies - lower) / (peak - lower)
    falling = (upper - bin_frequencies) / (upper - peak)
    filters = np.maximum(0.0, np.minimum(rising, falling))

    empty = np.flatnonzero(filters.sum(axis=1) == 0)
    if len(empty):
        log.warning('Mel filters %s cover no FFT bin; consider a larger nfft', empty.tolist())
    return filters


def extract_mfcc(clip: AudioClip, config: MfccConfig = MfccConfig()) -> MfccMatrix:
    """
    Pre-emphasis, framing and windowing, power spectrum, mel filterbank, log(x + 1e-10)
    and orthonormal DCT-II over the mel axis; the first n_coeffs coefficients are kept.
    """
    rate = clip.sample_rate
    if rate != EXPECTED_SAMPLE_RATE:
        log.warning(
            'Extracting MFCCs of %s at %d Hz; the pipeline expects %d Hz',
            clip.source_id,
            rate,
            EXPECTED_SAMPLE_RATE,
        )
    config.check_rate(rate)

    emphasized = pre_emphasis(clip.samples, config.alpha)
    frames = frame_and_window(emphasized, config, rate)
    energies = power_spectrum(frames, config.nfft) @ mel_filterbank(config, rate).T
    cepstra = dct(np.log(energies + LOG_FLOOR), type=2, norm='ortho', axis=1)

    coeffs = np.ascontiguousarray(cepstra[:, : config.n_coeffs].T)
    frame_times = np.arange(coeffs.shape[1]) * config.hop_length(rate) / rate
    return MfccMatrix(
        coeffs=coeffs, frame_times=frame_times, config=config, source_id=clip.source_id
    )


def segment(m: MfccMatrix, segment_frames: int, overlap_frames: int) -> list[FeatureSegment]:
    """
    Cuts windows of segment_frames columns at offsets i·(segment_frames - overlap_frames).
    A trailing remainder shorter than a full segment is dropped.
    """
    if not 0 <= overlap_frames < segment_frames:
        raise ArgumentError(
            f'Need 0 <= overlap < segment length, got {overlap_frames} and {segment_frames}'
        )
    if m.num_frames < segment_frames:
        raise TooShortError(f'MFCC matrix of {m.source_id!r}', segment_frames, m.num_frames)

    hop = segment_frames - overlap_frames
    count = 1 + (m.num_frames - segment_frames) // hop
    return [
        FeatureSegment(
            data=m.coeffs[:, i * hop : i * hop + segment_frames].copy(),
            parent_id=m.source_id,
            index=i,
            n_coeffs=m.config.n_coeffs,
            segment_frames=segment_frames,
        )
        for i in range(count)
    ]
