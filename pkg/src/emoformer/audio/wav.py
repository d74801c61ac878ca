import logging
import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from emoformer.audio.clip import AudioClip
from emoformer.errors import AudioIOError, UnsupportedCodecError, WavFormatError

# RIFF/WAVE layout: http://soundfile.sapp.org/doc/WaveFormat/
# Chunks other than `fmt ` and `data` are skipped. Chunk bodies of odd size are
# followed by a single pad byte.

log = logging.getLogger(__name__)

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

PCM16_SCALE = 32768.0

# (format tag, bits per sample) -> little endian sample dtype
SUPPORTED_ENCODINGS = {
    (WAVE_FORMAT_PCM, 16): np.dtype('<i2'),
    (WAVE_FORMAT_IEEE_FLOAT, 32): np.dtype('<f4'),
}


@dataclass(frozen=True)
class WavFormat:
    format_tag: int
    channels: int
    sample_rate: int
    block_align: int
    bits_per_sample: int


def load_wav(path: str | Path) -> AudioClip:
    """
    Reads a PCM 16-bit or IEEE float 32-bit WAV file with one or two channels.

    Stereo input is down-mixed by averaging both channels. Integer samples are
    scaled to [-1, 1] by dividing by 32768.

    :raises AudioIOError: If the file cannot be read.
    :raises WavFormatError: If the container is malformed (the error names the byte offset).
    :raises UnsupportedCodecError: If the encoding is not one of the supported ones.
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise AudioIOError(path, e) from e

    fmt, payload = parse_wav_bytes(raw)
    samples = decode_samples(fmt, payload)
    log.debug(
        'Loaded %s: %d samples at %d Hz, %d channel(s)',
        path,
        len(samples),
        fmt.sample_rate,
        fmt.channels,
    )
    return AudioClip(samples=samples, sample_rate=fmt.sample_rate, source_id=str(path))


def parse_wav_bytes(raw: bytes) -> tuple[WavFormat, bytes]:
    """Splits a WAV file into its format description and the raw sample payload."""
    if len(raw) < 12:
        raise WavFormatError(len(raw), 'file ends before the 12-byte RIFF header')
    if raw[0:4] != b'RIFF':
        raise WavFormatError(0, f'expected RIFF magic, found {raw[0:4]!r}')
    if raw[8:12] != b'WAVE':
        raise WavFormatError(8, f'expected WAVE form type, found {raw[8:12]!r}')

    fmt: WavFormat | None = None
    payload: bytes | None = None
    offset = 12
    while offset + 8 <= len(raw):
        chunk_id = raw[offset : offset + 4]
        (size,) = struct.unpack_from('<I', raw, offset + 4)
        body_start = offset + 8
        body_end = body_start + size

        if chunk_id == b'fmt ':
            if body_end > len(raw):
                raise WavFormatError(offset, f'fmt chunk declares {size} bytes past end of file')
            fmt = _parse_fmt_chunk(raw, body_start, size)
        elif chunk_id == b'data':
            if fmt is None:
                raise WavFormatError(offset, 'data chunk appears before the fmt chunk')
            if body_end > len(raw):
                available = len(raw) - body_start
                raise WavFormatError(
                    offset, f'data chunk declares {size} bytes but only {available} remain'
                )
            if size % fmt.block_align != 0:
                raise WavFormatError(
                    offset, f'data size {size} is not a multiple of block size {fmt.block_align}'
                )
            payload = raw[body_start:body_end]
            break
        else:
            log.debug('Skipping chunk %r at byte %d', chunk_id, offset)

        offset = body_end + (size & 1)

    if fmt is None:
        raise WavFormatError(min(offset, len(raw)), 'no fmt chunk found')
    if payload is None:
        raise WavFormatError(min(offset, len(raw)), 'no data chunk found')
    return fmt, payload


def _parse_fmt_chunk(raw: bytes, start: int, size: int) -> WavFormat:
    if size < 16:
        raise WavFormatError(start, f'fmt chunk has {size} bytes, at least 16 are required')

    format_tag, channels, sample_rate, _, block_align, bits = struct.unpack_from(
        '<HHIIHH', raw, start
    )
    if format_tag == WAVE_FORMAT_EXTENSIBLE and size >= 40:
        # The sub-format GUID starts with the actual format tag.
        (format_tag,) = struct.unpack_from('<H', raw, start + 24)

    if channels == 0:
        raise WavFormatError(start + 2, 'channel count is 0')
    if sample_rate == 0:
        raise WavFormatError(start + 4, 'sample rate is 0')
    if format_tag not in {WAVE_FORMAT_PCM, WAVE_FORMAT_IEEE_FLOAT}:
        # Compressed codecs use their own block layout.
        raise UnsupportedCodecError(format_tag, bits, channels)
    if block_align != channels * bits // 8 or bits % 8 != 0:
        raise WavFormatError(
            start + 12,
            f'block align {block_align} does not match {channels} channel(s) of {bits} bits',
        )

    fmt = WavFormat(format_tag, channels, sample_rate, block_align, bits)
    if (format_tag, bits) not in SUPPORTED_ENCODINGS or channels > 2:
        raise UnsupportedCodecError(format_tag, bits, channels)
    return fmt


def decode_samples(fmt: WavFormat, payload: bytes) -> np.ndarray:
    dtype = SUPPORTED_ENCODINGS[(fmt.format_tag, fmt.bits_per_sample)]
    interleaved = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    if dtype.kind == 'i':
        interleaved /= PCM16_SCALE

    frames = interleaved.reshape(-1, fmt.channels)
    return frames.mean(axis=1).astype(np.float32)


def encode_pcm16(samples: np.ndarray) -> np.ndarray:
    """Clamps to [-1, 1] and quantizes to 16-bit integers (1.0 maps to 32767)."""
    scaled = np.round(np.asarray(samples, dtype=np.float64) * PCM16_SCALE)
    return np.clip(scaled, -PCM16_SCALE, PCM16_SCALE - 1).astype('<i2')


def save_wav(clip: AudioClip, path: str | Path) -> None:
    """
    Writes a clip as mono PCM 16-bit little-endian WAV.

    :raises AudioIOError: If the file cannot be written.
    """
    pcm = encode_pcm16(clip.samples)
    try:
        with wave.open(str(path), 'wb') as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(clip.sample_rate)
            w.writeframes(pcm.tobytes())
    except (OSError, wave.Error) as e:
        raise AudioIOError(path, e) from e
