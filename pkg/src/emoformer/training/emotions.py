from dataclasses import dataclass
from typing import Iterable, Iterator, Self

from emoformer.errors import ArgumentError, UnknownLabelError

# Spellings follow the EARS file names.
EARS_EMOTIONS = (
    'adoration',
    'amazement',
    'amusement',
    'anger',
    'confusion',
    'contentment',
    'cuteness',
    'desire',
    'disappointment',
    'disgust',
    'distress',
    'embarassment',
    'extasy',
    'fear',
    'guilt',
    'interest',
    'neutral',
    'pain',
    'pride',
    'realization',
    'relief',
    'sadness',
    'serenity',
)

_FIVE = ('adoration', 'anger', 'fear', 'neutral', 'sadness')
_SEVEN = _FIVE + ('disappointment', 'pain')
_TEN = _SEVEN + ('guilt', 'disgust', 'distress')

PRESETS: dict[str, tuple[str, ...]] = {
    '5': _FIVE,
    '7': _SEVEN,
    '10': _TEN,
    '23': EARS_EMOTIONS,
}


@dataclass(frozen=True)
class EmotionSet:
    """
    Ordered emotion labels. The integer encoding of a label is its index.
    """

    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(label).strip() for label in self.labels)
        if len(labels) < 2:
            raise ArgumentError('An emotion set needs at least two labels')
        if len(set(labels)) != len(labels):
            duplicates = sorted({label for label in labels if labels.count(label) > 1})
            raise ArgumentError('Duplicate emotion labels: ' + ', '.join(duplicates))
        if any(not label for label in labels):
            raise ArgumentError('Emotion labels must not be empty')
        object.__setattr__(self, 'labels', labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[str]:
        return iter(self.labels)

    def __contains__(self, label: object) -> bool:
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError as e:
            raise UnknownLabelError(label, self.labels) from e

    @classmethod
    def preset(cls, name: str | int) -> Self:
        try:
            return cls(PRESETS[str(name)])
        except KeyError as e:
            raise ArgumentError(
                f'No emotion preset {name!r}. Available presets: ' + ', '.join(PRESETS)
            ) from e

    @classmethod
    def parse(cls, text: str | Iterable[str]) -> Self:
        """
        Accepts a preset name ("5", "7", "10", "23") or a comma separated label list.
        """
        if not isinstance(text, str):
            return cls(tuple(text))
        if text.strip() in PRESETS:
            return cls.preset(text.strip())
        return cls(tuple(label for label in text.split(',') if label.strip()))
