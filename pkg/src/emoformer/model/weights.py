import logging
from pathlib import Path
from typing import Any

from emoformer.engine.ops import BATCH_NORM_EPSILON, BATCH_NORM_MOMENTUM
from emoformer.errors import ConfigMismatchError
from emoformer.features.container import Archive, load_archive, save_archive
from emoformer.model.config import EmoFormerConfig
from emoformer.model.network import EmoFormer, build

log = logging.getLogger(__name__)

ARCHIVE_KIND = 'emoformer'


def save_weights(model: EmoFormer, path: str | Path, metadata: dict[str, Any] | None = None):
    """
    Writes parameters and batch norm statistics as an EMOF archive. The header records the
    model configuration, normalization constants and any additional metadata.
    """
    header = {
        'kind': ARCHIVE_KIND,
        'config': model.config.to_dict(),
        'batch_norm': {'epsilon': BATCH_NORM_EPSILON, 'momentum': BATCH_NORM_MOMENTUM},
        'initialization': 'glorot_uniform',
        'extra': metadata or {},
    }
    save_archive(path, Archive(arrays=model.state(), metadata=header))
    log.info('Saved weights to %s', path)


def load_model(
    path: str | Path, expected: EmoFormerConfig | None = None
) -> tuple[EmoFormer, dict[str, Any]]:
    """
    Rebuilds a model from an archive written by save_weights and returns it together
    with the additional metadata stored alongside.

    :raises ConfigMismatchError: If the archive holds another configuration than `expected`
    or its arrays do not fit the stored configuration.
    :raises IntegrityError: If the archive is truncated or corrupted.
    """
    archive = load_archive(path)
    if archive.metadata.get('kind') != ARCHIVE_KIND:
        raise ConfigMismatchError(['kind'])
    try:
        config = EmoFormerConfig.from_dict(archive.metadata['config'])
    except (KeyError, TypeError) as e:
        raise ConfigMismatchError(['config']) from e

    if expected is not None:
        differing = expected.differences(config)
        if differing:
            raise ConfigMismatchError(differing)

    model = build(config)
    state = model.state()
    missing = sorted(set(state) - set(archive.arrays))
    misshapen = sorted(
        name for name in state if name in archive and archive[name].shape != state[name].shape
    )
    if missing or misshapen:
        raise ConfigMismatchError(missing + misshapen)
    model.load_state(archive.arrays)
    return model, archive.metadata.get('extra', {})


def load_weights(path: str | Path, expected: EmoFormerConfig | None = None) -> EmoFormer:
    model, _ = load_model(path, expected)
    return model
