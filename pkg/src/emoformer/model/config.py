from dataclasses import asdict, dataclass, fields
from enum import StrEnum
from typing import Any, Self

from emoformer.configuration import Configuration, DeclaredConfig, declare_configuration
from emoformer.errors import ArgumentError, ConfigMismatchError
from emoformer.features.registry import FeatureKind

MAX_CLASSES = 23
XVECTOR_DIM = 512


class SequenceMode(StrEnum):
    # The pooled 64-vector is a sequence of one token.
    POOLED1 = 'pooled1'
    # Every column of the last feature map is a token.
    TOKENS58 = 'tokens58'


declare_configuration(
    'model',
    DeclaredConfig(
        key='heads',
        readable_name='Attention heads',
        readable_description='Number of heads of the multi-head attention layer.',
        validation_type=int,
        default_value=8,
    ),
    DeclaredConfig(
        key='attn_dim',
        readable_name='Feed-forward width',
        readable_description='Hidden width of the feed-forward part of the transformer encoder.',
        validation_type=int,
        default_value=128,
    ),
    DeclaredConfig(
        key='dropout_rate',
        readable_name='Dropout rate',
        readable_description='Dropout rate inside the transformer encoder.',
        validation_type=float,
        default_value=0.2,
    ),
    DeclaredConfig(
        key='ln_eps',
        readable_name='Layer norm epsilon',
        readable_description='Epsilon added to the variance in layer normalization.',
        validation_type=float,
        default_value=1e-6,
    ),
    DeclaredConfig(
        key='sequence_mode',
        readable_name='Encoder sequence',
        readable_description='How the convolutional features are turned into the token sequence '
        'of the transformer encoder: a single pooled token or one token per feature map column.',
        validation_type=SequenceMode,
        default_value=SequenceMode.POOLED1,
    ),
    DeclaredConfig(
        key='init_seed',
        readable_name='Initialization seed',
        readable_description='Seed of the Glorot-uniform weight initialization and of dropout. '
        'Defaults to the training seed.',
        validation_type=int,
    ),
)


@dataclass(frozen=True)
class EmoFormerConfig:
    num_classes: int = 7
    input_kind: FeatureKind = FeatureKind.MFCC
    heads: int = 8
    attn_dim: int = 128
    dropout: float = 0.2
    ln_eps: float = 1e-6
    sequence_mode: SequenceMode = SequenceMode.POOLED1
    # Input map geometry for MFCC and fusion inputs.
    n_coeffs: int = 13
    segment_frames: int = 469
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'input_kind', FeatureKind(self.input_kind))
        object.__setattr__(self, 'sequence_mode', SequenceMode(self.sequence_mode))
        if not 2 <= self.num_classes <= MAX_CLASSES:
            raise ArgumentError(
                f'Number of classes must lie in [2, {MAX_CLASSES}], got {self.num_classes}'
            )
        if not 0 <= self.dropout < 1:
            raise ArgumentError(f'Dropout rate must lie in [0, 1), got {self.dropout}')
        if self.heads < 1 or self.attn_dim < 1:
            raise ArgumentError('Heads and feed-forward width must be positive')
        if not self.ln_eps > 0:
            raise ArgumentError(f'Layer norm epsilon must be positive, got {self.ln_eps}')
        if self.n_coeffs < 1 or self.segment_frames < 1:
            raise ArgumentError('Input geometry must be positive')

    @property
    def input_shape(self) -> tuple[int, int, int]:
        """(H, W, C) of one input map."""
        if self.input_kind == FeatureKind.XVECTOR:
            return 1, XVECTOR_DIM, 1
        return self.n_coeffs, self.segment_frames, 1

    @property
    def uses_extra_vector(self) -> bool:
        return self.input_kind == FeatureKind.FUSION

    @classmethod
    def from_configuration(cls, cfg: Configuration, num_classes: int, **overrides) -> Self:
        values = dict(
            num_classes=num_classes,
            input_kind=cfg.feature_kind or FeatureKind.MFCC,
            heads=cfg.heads,
            attn_dim=cfg.attn_dim,
            dropout=cfg.dropout_rate,
            ln_eps=cfg.ln_eps,
            sequence_mode=cfg.sequence_mode,
            n_coeffs=cfg.n_coeffs,
            segment_frames=cfg.segment_frames,
            seed=cfg.init_seed if cfg.init_seed is not None else cfg.seed,
        )
        values = {k: v for k, v in values.items() if v is not None}
        return cls(**(values | overrides))

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data['input_kind'] = self.input_kind.value
        data['sequence_mode'] = self.sequence_mode.value
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigMismatchError(unknown)
        return cls(**data)

    def differences(self, other: 'EmoFormerConfig') -> list[str]:
        """Names of the fields that differ, ignoring the initialization seed."""
        return [
            f.name
            for f in fields(self)
            if f.name != 'seed' and getattr(self, f.name) != getattr(other, f.name)
        ]
