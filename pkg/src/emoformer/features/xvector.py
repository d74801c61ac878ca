import logging
from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path
from typing import Sequence

import numpy as np

from emoformer.configuration import Configuration, DeclaredConfig, declare_configuration
from emoformer.errors import ArgumentError, ConfigMismatchError, ShapeError, TooShortError
from emoformer.features.container import Archive, load_archive, save_archive
from emoformer.features.mfcc import MfccMatrix

log = logging.getLogger(__name__)

EMBEDDING_DIM = 512
DEFAULT_XVECTOR_SEED = 1

declare_configuration(
    'xvector',
    DeclaredConfig(
        key='xvector_weights',
        readable_name='X-vector weights',
        readable_description='EMOF archive holding the x-vector extractor. When empty, the '
        'deterministic seeded weight set is generated.',
        validation_type=str,
    ),
    DeclaredConfig(
        key='xvector_seed',
        readable_name='X-vector weight seed',
        readable_description='Seed of the generated x-vector weight set.',
        validation_type=int,
        default_value=DEFAULT_XVECTOR_SEED,
    ),
)


class Activation(StrEnum):
    RELU = 'relu'
    LINEAR = 'linear'

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self == Activation.RELU:
            return np.maximum(x, 0.0)
        return x


@dataclass(frozen=True, eq=False)
class AffineLayer:
    """f(x W + b) applied to row vectors; weight has shape [inputs × outputs]."""

    weight: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.RELU

    def __post_init__(self):
        object.__setattr__(self, 'weight', np.array(self.weight, dtype=np.float64))
        object.__setattr__(self, 'bias', np.array(self.bias, dtype=np.float64))
        object.__setattr__(self, 'activation', Activation(self.activation))
        if self.weight.ndim != 2:
            raise ShapeError('Affine layer weight', ('n_in', 'n_out'), self.weight.shape)
        if self.bias.shape != (self.weight.shape[1],):
            raise ShapeError('Affine layer bias', (self.weight.shape[1],), self.bias.shape)
        self.weight.setflags(write=False)
        self.bias.setflags(write=False)

    @property
    def input_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def output_dim(self) -> int:
        return self.weight.shape[1]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.activation(x @ self.weight + self.bias)


@dataclass(frozen=True, eq=False)
class XVectorModel:
    """
    Frame-level layers applied to every frame, statistics pooling and segment-level
    layers producing the utterance embedding.
    """

    frame_layers: tuple[AffineLayer, ...]
    segment_layers: tuple[AffineLayer, ...]
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, 'frame_layers', tuple(self.frame_layers))
        object.__setattr__(self, 'segment_layers', tuple(self.segment_layers))
        if not self.frame_layers or not self.segment_layers:
            raise ArgumentError('An x-vector model needs frame and segment layers')

        _check_chain('Frame layers', self.frame_layers)
        _check_chain('Segment layers', self.segment_layers)
        pooled = 2 * self.frame_layers[-1].output_dim
        if self.segment_layers[0].input_dim != pooled:
            raise ShapeError('First segment layer input', pooled, self.segment_layers[0].input_dim)
        if self.segment_layers[-1].output_dim != EMBEDDING_DIM:
            raise ShapeError('Embedding', EMBEDDING_DIM, self.segment_layers[-1].output_dim)

    @property
    def input_dim(self) -> int:
        return self.frame_layers[0].input_dim

    @property
    def embedding_dim(self) -> int:
        return self.segment_layers[-1].output_dim


def _check_chain(what: str, layers: Sequence[AffineLayer]):
    for before, after in zip(layers, layers[1:]):
        if before.output_dim != after.input_dim:
            raise ShapeError(what, before.output_dim, after.input_dim)


@dataclass(frozen=True, eq=False)
class XVector:
    values: np.ndarray
    source_id: str = ''

    def __post_init__(self):
        if self.values.shape != (EMBEDDING_DIM,):
            raise ShapeError('X-vector', (EMBEDDING_DIM,), self.values.shape)
        if not np.all(np.isfinite(self.values)):
            raise ArgumentError(f'X-vector of {self.source_id!r} contains non-finite values')


def frame_embed(features: np.ndarray, model: XVectorModel) -> np.ndarray:
    """Maps every row of features [T × d] independently through all frame layers."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.input_dim:
        raise ShapeError('Frame features', ('T', model.input_dim), features.shape)
    if features.shape[0] < 2:
        raise TooShortError('Frame sequence', 2, features.shape[0])

    hidden = features
    for layer in model.frame_layers:
        hidden = layer(hidden)
    return hidden


def stats_pool(embeddings: np.ndarray) -> np.ndarray:
    """[μ, σ] over frames, σ being the population standard deviation."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2:
        raise ShapeError('Frame embeddings', ('T', 'd'), embeddings.shape)
    if embeddings.shape[0] < 2:
        raise TooShortError('Frame embeddings', 2, embeddings.shape[0])

    mean = embeddings.mean(axis=0)
    std = np.sqrt(np.mean((embeddings - mean) ** 2, axis=0))
    return np.concatenate((mean, std))


def extract_xvector(m: MfccMatrix, model: XVectorModel) -> XVector:
    pooled = stats_pool(frame_embed(m.coeffs.T, model))
    embedding = pooled
    for layer in model.segment_layers:
        embedding = layer(embedding)
    return XVector(values=embedding, source_id=m.source_id)


def _glorot_layer(
    rng: np.random.Generator, n_in: int, n_out: int, activation: Activation
) -> AffineLayer:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return AffineLayer(
        weight=rng.uniform(-limit, limit, size=(n_in, n_out)),
        bias=np.zeros(n_out),
        activation=activation,
    )


def default_xvector_model(input_dim: int = 13, seed: int = DEFAULT_XVECTOR_SEED) -> XVectorModel:
    """
    Deterministic seeded extractor: frame layers input_dim → 512 → 512, statistics
    pooling to 1024 and one segment layer 1024 → 512, all ReLU.
    """
    if input_dim < 1:
        raise ArgumentError(f'Input dimension must be positive, got {input_dim}')
    rng = np.random.default_rng(seed)
    return XVectorModel(
        frame_layers=(
            _glorot_layer(rng, input_dim, EMBEDDING_DIM, Activation.RELU),
            _glorot_layer(rng, EMBEDDING_DIM, EMBEDDING_DIM, Activation.RELU),
        ),
        segment_layers=(_glorot_layer(rng, 2 * EMBEDDING_DIM, EMBEDDING_DIM, Activation.RELU),),
        seed=seed,
    )


def save_xvector_model(path: str | Path, model: XVectorModel):
    arrays, layers = {}, []
    for group, stack in (('frame', model.frame_layers), ('segment', model.segment_layers)):
        for i, layer in enumerate(stack):
            name = f'{group}.{i}'
            arrays[f'{name}.weight'] = layer.weight
            arrays[f'{name}.bias'] = layer.bias
            layers.append({'name': name, 'activation': layer.activation.value})
    metadata = {'kind': 'xvector', 'layers': layers, 'seed': model.seed}
    save_archive(path, Archive(arrays=arrays, metadata=metadata))


def load_xvector_model(path: str | Path, input_dim: int | None = None) -> XVectorModel:
    """
    :raises ConfigMismatchError: If the stored model expects another frame feature dimension
    or the archive does not describe an x-vector extractor.
    """
    archive = load_archive(path)
    if archive.metadata.get('kind') != 'xvector':
        raise ConfigMismatchError(['kind'])

    stacks: dict[str, list[AffineLayer]] = {'frame': [], 'segment': []}
    try:
        for entry in archive.metadata['layers']:
            name = entry['name']
            stacks[name.split('.')[0]].append(
                AffineLayer(
                    weight=archive[f'{name}.weight'],
                    bias=archive[f'{name}.bias'],
                    activation=entry['activation'],
                )
            )
    except (KeyError, ValueError) as e:
        raise ConfigMismatchError(['layers']) from e

    model = XVectorModel(stacks['frame'], stacks['segment'], seed=archive.metadata.get('seed'))
    if input_dim is not None and model.input_dim != input_dim:
        raise ConfigMismatchError(['input_dim'])
    log.info('Loaded x-vector extractor %s (%d → %d)', path, model.input_dim, model.embedding_dim)
    return model


def xvector_model_from_configuration(cfg: Configuration, input_dim: int) -> XVectorModel:
    if cfg.xvector_weights:
        return load_xvector_model(cfg.xvector_weights, input_dim)
    seed = cfg.xvector_seed if cfg.xvector_seed is not None else DEFAULT_XVECTOR_SEED
    return default_xvector_model(input_dim, seed)
