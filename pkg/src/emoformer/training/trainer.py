import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Iterator, Protocol, Self

import numpy as np

from emoformer.configuration import Configuration, DeclaredConfig, declare_configuration
from emoformer.engine import Adam, AdamHyperparameters, Mode, Tensor, backward, cross_entropy
from emoformer.errors import ArgumentError, NumericFault, ShapeError
from emoformer.features import FeatureKind
from emoformer.model import EmoFormer
from emoformer.training.dataset import Dataset

log = logging.getLogger(__name__)

declare_configuration(
    'training',
    DeclaredConfig(
        key='batch_size',
        readable_name='Batch size',
        readable_description='Number of samples per training batch.',
        validation_type=int,
        default_value=64,
    ),
    DeclaredConfig(
        key='max_epochs',
        readable_name='Epochs',
        readable_description='Maximum number of training epochs. Defaults to 50 for MFCC '
        'inputs and 20 for x-vector inputs.',
        validation_type=int,
    ),
    DeclaredConfig(
        key='patience',
        readable_name='Patience',
        readable_description='Epochs without improvement of the validation accuracy before '
        'training stops. Defaults to 10 for MFCC inputs and 5 for x-vector inputs.',
        validation_type=int,
    ),
    DeclaredConfig(
        key='split_ratio',
        readable_name='Training share',
        readable_description='Share of the clips assigned to the training partition.',
        validation_type=float,
        default_value=0.7,
    ),
    DeclaredConfig(
        key='seed',
        readable_name='Seed',
        readable_description='Seed of the split, of batch shuffling and, unless set '
        'explicitly, of the weight initialization. Overridden by EMOFORMER_SEED.',
        validation_type=int,
        default_value=0,
    ),
    DeclaredConfig(
        key='learning_rate',
        readable_name='Learning rate',
        readable_description='Step size of the Adam optimizer.',
        validation_type=float,
        default_value=1e-3,
    ),
    DeclaredConfig(
        key='validation_split',
        readable_name='Validation share',
        readable_description='If set, share of the training partition held out for early '
        'stopping. Otherwise the test partition is monitored.',
        validation_type=float,
    ),
    DeclaredConfig(
        key='augment',
        readable_name='Augmentation',
        readable_description='Augment the training partition with time stretched and pitch '
        'shifted copies.',
        validation_type=bool,
        default_value=True,
    ),
)

# (max_epochs, patience) per input kind.
EPOCH_DEFAULTS = {
    FeatureKind.MFCC: (50, 10),
    FeatureKind.FUSION: (50, 10),
    FeatureKind.XVECTOR: (20, 5),
}


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    max_epochs: int = 50
    patience: int = 10
    split_ratio: float = 0.7
    seed: int = 0
    learning_rate: float = 1e-3
    validation_split: float | None = None
    augment: bool = True
    monitor: str = 'val_accuracy'

    def __post_init__(self):
        if self.batch_size < 1:
            raise ArgumentError(f'Batch size must be positive, got {self.batch_size}')
        if self.max_epochs < 1:
            raise ArgumentError(f'Number of epochs must be positive, got {self.max_epochs}')
        if not 1 <= self.patience <= self.max_epochs:
            raise ArgumentError(
                f'Patience must lie in [1, max_epochs={self.max_epochs}], got {self.patience}'
            )
        if not 0 < self.split_ratio < 1:
            raise ArgumentError(f'Split ratio must lie in (0, 1), got {self.split_ratio}')
        if self.validation_split is not None and not 0 < self.validation_split < 1:
            raise ArgumentError(
                f'Validation share must lie in (0, 1), got {self.validation_split}'
            )
        if self.monitor != 'val_accuracy':
            raise ArgumentError(f'Only val_accuracy can be monitored, got {self.monitor}')

    @classmethod
    def for_feature_kind(cls, kind: FeatureKind, **overrides) -> Self:
        max_epochs, patience = EPOCH_DEFAULTS[FeatureKind(kind)]
        values = {'max_epochs': max_epochs, 'patience': patience}
        return cls(**(values | {k: v for k, v in overrides.items() if v is not None}))

    @classmethod
    def from_configuration(cls, cfg: Configuration, kind: FeatureKind) -> Self:
        return cls.for_feature_kind(
            kind,
            batch_size=cfg.batch_size,
            max_epochs=cfg.max_epochs,
            patience=cfg.patience,
            split_ratio=cfg.split_ratio,
            seed=cfg.seed,
            learning_rate=cfg.learning_rate,
            validation_split=cfg.validation_split,
            augment=cfg.augment,
        )

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    accuracy: float
    val_accuracy: float


@dataclass
class History:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None
    stopped_early: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            'epochs': [asdict(record) for record in self.epochs],
            'best_epoch': self.best_epoch,
            'stopped_early': self.stopped_early,
        }


class Stateful(Protocol):
    def state(self) -> dict[str, np.ndarray]: ...


class EarlyStopping:
    """
    Tracks the best validation accuracy. An epoch improves only if its accuracy is
    strictly greater than the best so far; the weights of the best epoch are kept.
    """

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -np.inf
        self.best_epoch: int | None = None
        self.best_state: dict[str, np.ndarray] | None = None
        self.wait = 0

    def update(self, epoch: int, value: float, model: Stateful) -> bool:
        """Records an epoch and returns whether training should stop."""
        if value > self.best:
            self.best = value
            self.best_epoch = epoch
            self.best_state = model.state()
            self.wait = 0
        else:
            self.wait += 1
        return self.wait >= self.patience


def batch_indices(order: np.ndarray, batch_size: int) -> Iterator[np.ndarray]:
    """
    Consecutive batches of the given order. A trailing batch of a single sample is merged
    into its predecessor, as batch normalization needs two samples in training mode.
    """
    batches = [order[start : start + batch_size] for start in range(0, len(order), batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        batches[-2] = np.concatenate(batches[-2:])
        batches.pop()
    yield from batches


def accuracy(model: EmoFormer, data: Dataset) -> float:
    probabilities = model.predict(data.inputs, data.extra)
    return float(np.mean(probabilities.argmax(axis=1) == data.labels))


def _train_step(
    model: EmoFormer, optimizer: Adam, batch: Dataset, step: int
) -> tuple[float, np.ndarray]:
    optimizer.zero_grad()
    extra = None if batch.extra is None else Tensor(batch.extra)
    probabilities = model.forward(Tensor(batch.inputs), Mode.TRAIN, extra, step)
    loss = cross_entropy(probabilities, Tensor(batch.one_hot))
    backward(loss)
    optimizer.step()
    return loss.item(), probabilities.data


def train(
    model: EmoFormer, train_data: Dataset, val_data: Dataset | None, cfg: TrainConfig
) -> tuple[EmoFormer, History]:
    """
    Trains with Adam on the cross-entropy loss, shuffling batches with the configured seed.
    After every epoch the validation accuracy is measured (on the training data if no
    validation data is given); training stops once it has not improved for `patience`
    epochs, and the weights of the best epoch are restored.

    :raises NumericFault: If a loss or gradient becomes non-finite, naming epoch and batch.
    """
    if len(train_data) < 2:
        raise ArgumentError('Training needs at least two samples')
    if train_data.num_classes != model.config.num_classes:
        raise ShapeError('Training labels', model.config.num_classes, train_data.num_classes)
    monitored = val_data if val_data is not None and len(val_data) else train_data

    optimizer = Adam(
        [tensor for _, tensor in model.parameters()],
        AdamHyperparameters(lr=cfg.learning_rate),
    )
    rng = np.random.default_rng(cfg.seed)
    stopping = EarlyStopping(cfg.patience)
    history = History()
    step = 0

    for epoch in range(1, cfg.max_epochs + 1):
        total_loss, correct = 0.0, 0
        order = rng.permutation(len(train_data))
        for batch_number, indices in enumerate(batch_indices(order, cfg.batch_size), start=1):
            batch = train_data.subset(indices)
            try:
                loss, probabilities = _train_step(model, optimizer, batch, step)
            except NumericFault as e:
                raise e.at(epoch, batch_number) from e
            step += 1
            total_loss += loss * len(batch)
            correct += int(np.sum(probabilities.argmax(axis=1) == batch.labels))

        record = EpochRecord(
            epoch=epoch,
            loss=total_loss / len(train_data),
            accuracy=correct / len(train_data),
            val_accuracy=accuracy(model, monitored),
        )
        history.epochs.append(record)
        log.info(
            'Epoch %d/%d: loss %.4f, accuracy %.4f, validation accuracy %.4f',
            epoch,
            cfg.max_epochs,
            record.loss,
            record.accuracy,
            record.val_accuracy,
        )
        if stopping.update(epoch, record.val_accuracy, model):
            history.stopped_early = True
            log.info('No improvement for %d epochs, stopping after epoch %d', cfg.patience, epoch)
            break

    history.best_epoch = stopping.best_epoch
    model.load_state(stopping.best_state)
    log.info(
        'Restored weights of epoch %d (validation accuracy %.4f)',
        stopping.best_epoch,
        stopping.best,
    )
    return model, history