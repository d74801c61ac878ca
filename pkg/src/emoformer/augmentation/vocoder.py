import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

N_FFT = 2048
HOP_LENGTH = 512
WINDOW = 'hann'


def stft(signal: np.ndarray, n_fft: int = N_FFT, hop: int = HOP_LENGTH) -> np.ndarray:
    """
    Centered short-time Fourier transform. Returns a complex matrix [n_fft/2 + 1, frames];
    frame t is centered on sample t * hop.
    """
    window = get_window(WINDOW, n_fft, fftbins=True)
    padded = np.pad(np.asarray(signal, dtype=np.float64), n_fft // 2)
    if len(padded) < n_fft:
        padded = np.pad(padded, (0, n_fft - len(padded)))
    frames = sliding_window_view(padded, n_fft)[::hop]
    return np.fft.rfft(frames * window, axis=1).T


def istft(spectrum: np.ndarray, length: int, hop: int = HOP_LENGTH) -> np.ndarray:
    """Inverse of stft by weighted overlap-add, cut or zero-padded to `length` samples."""
    n_fft = 2 * (spectrum.shape[0] - 1)
    window = get_window(WINDOW, n_fft, fftbins=True)
    frames = np.fft.irfft(spectrum.T, n=n_fft, axis=1) * window

    total = n_fft + hop * (len(frames) - 1)
    signal = np.zeros(total)
    window_sum = np.zeros(total)
    squared_window = window**2
    for t, frame in enumerate(frames):
        signal[t * hop : t * hop + n_fft] += frame
        window_sum[t * hop : t * hop + n_fft] += squared_window

    covered = window_sum > np.finfo(np.float64).tiny
    signal[covered] /= window_sum[covered]

    signal = signal[n_fft // 2 :]
    if len(signal) < length:
        signal = np.pad(signal, (0, length - len(signal)))
    return signal[:length]


def phase_vocoder(spectrum: np.ndarray, rate: float, hop: int = HOP_LENGTH) -> np.ndarray:
    """
    Time-stretches an STFT by `rate` (> 1 speeds up) while keeping the frequency content.

    Magnitudes are interpolated linearly between neighbouring analysis frames; phases are
    accumulated from the measured per-bin phase advance, so partials keep their frequency.
    """
    n_bins, n_frames = spectrum.shape
    time_steps = np.arange(0, n_frames, rate, dtype=np.float64)

    # Expected phase advance per hop at each bin centre, 2π·k·hop/n_fft.
    phase_advance = np.linspace(0, np.pi * hop, n_bins)

    stretched = np.zeros((n_bins, len(time_steps)), dtype=np.complex128)
    padded = np.pad(spectrum, [(0, 0), (0, 2)])
    phase = np.angle(spectrum[:, 0])

    for t, step in enumerate(time_steps):
        left = int(step)
        columns = padded[:, left : left + 2]
        alpha = step - left
        magnitude = (1.0 - alpha) * np.abs(columns[:, 0]) + alpha * np.abs(columns[:, 1])
        stretched[:, t] = magnitude * np.exp(1j * phase)

        deviation = np.angle(columns[:, 1]) - np.angle(columns[:, 0]) - phase_advance
        deviation -= 2.0 * np.pi * np.round(deviation / (2.0 * np.pi))
        phase = phase + phase_advance + deviation

    return stretched
