from dataclasses import dataclass, replace

import numpy as np

from emoformer.errors import ArgumentError


@dataclass(frozen=True, eq=False)
class AudioClip:
    """
    A mono sample buffer with its sample rate.

    Samples are stored as 32-bit floats, nominally within [-1, 1]. Values outside this
    range are kept as they are and only clamped when written to disk.
    """

    samples: np.ndarray
    sample_rate: int
    source_id: str = ''

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float32)
        if samples.ndim != 1:
            raise ArgumentError(f'Audio samples must be one-dimensional, got shape {samples.shape}')
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ArgumentError(f'Sample rate must be a positive integer, got {self.sample_rate}')
        if not np.all(np.isfinite(samples)):
            raise ArgumentError(f'Audio clip {self.source_id!r} contains non-finite samples')
        samples.flags.writeable = False
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 'sample_rate', int(self.sample_rate))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate

    def with_samples(self, samples: np.ndarray, sample_rate: int | None = None) -> 'AudioClip':
        return replace(
            self,
            samples=samples,
            sample_rate=self.sample_rate if sample_rate is None else sample_rate,
        )

    def tagged(self, transform: str) -> 'AudioClip':
        """Copy of this clip whose source_id records an applied transform."""
        return replace(self, source_id=f'{self.source_id}#{transform}')
