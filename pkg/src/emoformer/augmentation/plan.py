import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Self

from emoformer.configuration import Configuration, DeclaredConfig, declare_configuration
from emoformer.errors import ArgumentError

declare_configuration(
    'augment',
    DeclaredConfig(
        key='stretch_factors',
        readable_name='Time stretch factors',
        readable_description='Playback rate factors for time stretching. A factor f changes '
        'the duration by 1/f without altering the pitch.',
        validation_type=tuple,
        default_value=(0.9, 1.1),
    ),
    DeclaredConfig(
        key='pitch_semitones',
        readable_name='Pitch shifts',
        readable_description='Pitch shifts in semitones, each producing one augmented clip.',
        validation_type=tuple,
        default_value=(-2.0, 2.0),
    ),
    DeclaredConfig(
        key='target_seconds',
        readable_name='Fixed length',
        readable_description='Length in seconds every clip is zero-padded or truncated to.',
        validation_type=float,
        default_value=15.0,
    ),
    DeclaredConfig(
        key='include_original',
        readable_name='Include original',
        readable_description='Keep the unmodified (length normalized) clip as one of the '
        'augmented variants.',
        validation_type=bool,
        default_value=True,
    ),
)


@dataclass(frozen=True)
class AugmentPlan:
    """
    Recipe applied to every training clip: resample, then one variant per stretch factor
    and per pitch shift, each normalized to target_seconds.
    """

    stretch_factors: tuple[float, ...] = (0.9, 1.1)
    pitch_semitones: tuple[float, ...] = (-2.0, 2.0)
    target_seconds: float = 15.0
    include_original: bool = True
    # None keeps the input sample rate.
    sample_rate: int | None = 16000

    def __post_init__(self):
        object.__setattr__(self, 'stretch_factors', tuple(float(f) for f in self.stretch_factors))
        object.__setattr__(self, 'pitch_semitones', tuple(float(s) for s in self.pitch_semitones))
        for factor in self.stretch_factors:
            if not factor > 0 or not math.isfinite(factor):
                raise ArgumentError(f'Stretch factors must be positive, got {factor}')
        for semitones in self.pitch_semitones:
            if not math.isfinite(semitones):
                raise ArgumentError(f'Pitch shifts must be finite, got {semitones}')
        if not self.target_seconds > 0:
            raise ArgumentError(f'Target length must be positive, got {self.target_seconds}')
        if self.sample_rate is not None and self.sample_rate <= 0:
            raise ArgumentError(f'Sample rate must be positive, got {self.sample_rate}')

    @property
    def variants_per_clip(self) -> int:
        return int(self.include_original) + len(self.stretch_factors) + len(self.pitch_semitones)

    @classmethod
    def from_configuration(cls, cfg: Configuration) -> Self:
        return cls(
            stretch_factors=cfg.stretch_factors,
            pitch_semitones=cfg.pitch_semitones,
            target_seconds=cfg.target_seconds,
            include_original=cfg.include_original,
            sample_rate=cfg.sample_rate,
        )

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ArgumentError('Unknown augmentation plan fields: ' + ', '.join(unknown))
        return cls(**data)

    @classmethod
    def from_json_file(cls, path: str | Path) -> Self:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ArgumentError(f'Could not read augmentation plan {path}: {e}') from e
        if not isinstance(data, dict):
            raise ArgumentError(f'Augmentation plan {path} must be a JSON object')
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data['stretch_factors'] = list(self.stretch_factors)
        data['pitch_semitones'] = list(self.pitch_semitones)
        return data
