import logging
from collections import Counter
from dataclasses import dataclass, replace
from enum import StrEnum
from pathlib import Path
from typing import Iterable, Iterator, Self

import pandas as pd

from emoformer.errors import ArgumentError, LeakageError, UnknownLabelError
from emoformer.training.emotions import EmotionSet

log = logging.getLogger(__name__)

MANIFEST_COLUMNS = ('path', 'label', 'speaker', 'duration')
REQUIRED_COLUMNS = ('path', 'label')


class Partition(StrEnum):
    ALL = 'all'
    TRAIN = 'train'
    VALIDATION = 'validation'
    TEST = 'test'


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    speaker: str = ''
    duration: float = 0.0


@dataclass(frozen=True)
class Manifest:
    """
    Labelled audio clips. Only the training partition may be augmented.
    """

    entries: tuple[ManifestEntry, ...]
    partition: Partition = Partition.ALL

    def __post_init__(self):
        object.__setattr__(self, 'entries', tuple(self.entries))
        object.__setattr__(self, 'partition', Partition(self.partition))
        duplicates = [path for path, n in Counter(e.path for e in self.entries).items() if n > 1]
        if duplicates:
            raise ArgumentError('Duplicate manifest paths: ' + ', '.join(sorted(duplicates)))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    @property
    def labels(self) -> list[str]:
        return [e.label for e in self.entries]

    @property
    def augmentable(self) -> bool:
        return self.partition == Partition.TRAIN

    def class_counts(self) -> dict[str, int]:
        return dict(Counter(self.labels))

    def validate(self, emotions: EmotionSet):
        """
        :raises UnknownLabelError: For the first label outside the emotion set.
        """
        for entry in self.entries:
            if entry.label not in emotions:
                raise UnknownLabelError(entry.label, emotions.labels)

    def select(self, emotions: EmotionSet) -> Self:
        """Entries whose label belongs to the emotion set, in manifest order."""
        kept = tuple(e for e in self.entries if e.label in emotions)
        if len(kept) != len(self.entries):
            log.info(
                'Kept %d of %d manifest entries for %d emotions',
                len(kept),
                len(self.entries),
                len(emotions),
            )
        return replace(self, entries=kept)

    def subset(self, indices: Iterable[int], partition: Partition) -> Self:
        return Manifest(tuple(self.entries[i] for i in sorted(indices)), partition)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(e.path, e.label, e.speaker, e.duration) for e in self.entries],
            columns=list(MANIFEST_COLUMNS),
        )

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, root: Path | None = None) -> Self:
        missing = [column for column in REQUIRED_COLUMNS if column not in frame.columns]
        if missing:
            raise ArgumentError('Manifest lacks the column(s) ' + ', '.join(missing))

        entries = []
        for row in frame.itertuples(index=False):
            path = Path(str(row.path))
            if root is not None and not path.is_absolute():
                path = root / path
            entries.append(
                ManifestEntry(
                    path=str(path),
                    label=str(row.label).strip(),
                    speaker=str(getattr(row, 'speaker', '') or ''),
                    duration=float(getattr(row, 'duration', 0.0) or 0.0),
                )
            )
        return cls(tuple(entries))


def require_augmentable(manifest: Manifest):
    """
    :raises LeakageError: If the manifest is not the training partition of a split.
    """
    if not manifest.augmentable:
        raise LeakageError(
            f'Refusing to augment the {manifest.partition} partition: augmentation is only '
            'applied to training clips after splitting.'
        )


def read_manifest(path: str | Path) -> Manifest:
    """
    Reads a CSV manifest with header `path,label,speaker,duration`. Relative audio paths are
    resolved against the directory of the manifest.

    :raises ArgumentError: If the file cannot be read or lacks required columns.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(
            path,
            dtype={'path': str, 'label': str, 'speaker': str},
            keep_default_na=False,
        )
    except FileNotFoundError as e:
        raise ArgumentError(f'Manifest {path} does not exist') from e
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, ValueError) as e:
        raise ArgumentError(f'Could not read manifest {path}: {e}') from e

    try:
        manifest = Manifest.from_frame(frame, root=path.parent)
    except (TypeError, ValueError) as e:
        raise ArgumentError(f'Invalid manifest {path}: {e}') from e
    log.info('Read %d entries from manifest %s', len(manifest), path)
    return manifest


def write_manifest(manifest: Manifest, path: str | Path):
    manifest.to_frame().to_csv(path, index=False)
