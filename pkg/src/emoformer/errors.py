from dataclasses import dataclass
from typing import Any, Sequence

from emoformer.utils import format_human_readable


class EmoformerError(Exception):
    """
    Base class of all errors raised deliberately by this package.
    """


class ArgumentError(EmoformerError, ValueError):
    """
    Exception raised when an argument is outside its valid domain.
    """


class TooShortError(ArgumentError):
    """
    Exception raised when an input does not contain enough samples or frames.
    """

    required: int
    actual: int

    def __init__(self, what: str, required: int, actual: int):
        super().__init__(f'{what} is too short: requires at least {required}, got {actual}.')
        self.required = required
        self.actual = actual


class ShapeError(EmoformerError, ValueError):
    """
    Exception raised when array dimensions do not fit together.
    """

    expected: Any
    actual: Any

    def __init__(self, what: str, expected: Any, actual: Any):
        super().__init__(f'{what}: expected shape {expected}, got {actual}.')
        self.expected = expected
        self.actual = actual


@dataclass(eq=False)
class WavFormatError(EmoformerError):
    """
    Error discovered while parsing a RIFF/WAVE container.
    """

    offset: int
    message: str

    def __str__(self) -> str:
        return f'Malformed WAV at byte {self.offset}: {self.message}'


@dataclass(eq=False)
class UnsupportedCodecError(EmoformerError):
    """
    Exception raised for well-formed containers holding an encoding we do not decode.
    """

    format_tag: int
    bits_per_sample: int
    channels: int

    def __str__(self) -> str:
        return (
            f'Unsupported WAV encoding (format tag {self.format_tag:#06x}, '
            f'{self.bits_per_sample} bits, {self.channels} channels). '
            'Supported are PCM 16-bit and IEEE float 32-bit with 1 or 2 channels.'
        )


class AudioIOError(EmoformerError, OSError):
    """
    Exception raised when an audio file cannot be read or written.
    """

    path: str

    def __init__(self, path: Any, reason: Any):
        super().__init__(f'Could not access audio file {path}: {reason}')
        self.path = str(path)


class IntegrityError(EmoformerError):
    """
    Exception raised when a binary container is truncated or corrupted.
    """


class ConfigMismatchError(EmoformerError):
    """
    Exception raised when stored weights were created for a different configuration.
    """

    fields: tuple[str, ...]

    def __init__(self, fields: Sequence[str]):
        names = format_human_readable(list(fields)) if fields else 'the parameter layout'
        super().__init__(f'Stored weights do not match the requested configuration: {names}.')
        self.fields = tuple(fields)


class BuildError(EmoformerError):
    """
    Exception raised when a model cannot be assembled from its configuration.
    """

    layer: str

    def __init__(self, layer: str, reason: str):
        super().__init__(f'Cannot build layer {layer}: {reason}')
        self.layer = layer


class NumericFault(EmoformerError, ArithmeticError):
    """
    Exception raised when an operation produces NaN or infinite values.
    """

    op: str
    epoch: int | None
    batch: int | None

    def __init__(self, op: str, epoch: int | None = None, batch: int | None = None):
        where = ''
        if epoch is not None:
            where = f' in epoch {epoch}, batch {batch}'
        super().__init__(f'Non-finite values produced by {op}{where}.')
        self.op = op
        self.epoch = epoch
        self.batch = batch

    def at(self, epoch: int, batch: int) -> 'NumericFault':
        return NumericFault(self.op, epoch, batch)


class StratificationError(ArgumentError):
    """
    Exception raised when a class has too few samples to be split.
    """


class UnknownLabelError(ArgumentError, KeyError):
    """
    Exception raised for labels that are not part of the active emotion set.
    """

    label: str

    def __init__(self, label: str, active: Sequence[str]):
        super().__init__(
            f'Unknown emotion label {label!r}. Active set: ' + format_human_readable(active)
        )
        self.label = label

    def __str__(self) -> str:
        # KeyError would otherwise print the repr of the message.
        return str(self.args[0])


class LeakageError(EmoformerError):
    """
    Exception raised when an operation would leak test data into training.
    """


class StageFailed(EmoformerError):
    """
    Exception raised by the experiment runner, naming the stage that failed.
    """

    stage: str

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f'Stage {stage!r} failed: {cause}')
        self.stage = stage
        self.cause = cause
