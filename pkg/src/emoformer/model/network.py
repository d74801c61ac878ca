import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from emoformer.engine import ops
from emoformer.engine.ops import Mode
from emoformer.engine.tensor import Tensor, no_grad
from emoformer.errors import BuildError, ShapeError
from emoformer.model.config import XVECTOR_DIM, EmoFormerConfig, SequenceMode
from emoformer.model.layers import (
    ConvBlock,
    DenseLayer,
    Flatten,
    ForwardContext,
    GlobalAveragePool,
    Layer,
    ToTokens,
    TransformerEncoder,
)

log = logging.getLogger(__name__)

MODEL_DIM = 64

# (kernel size, filters, followed by max pooling) of the convolutional stack.
CONV_STACK = (
    (5, 16, False),
    (3, 32, False),
    (3, 32, True),
    (3, 64, True),
    (3, 64, True),
    (3, 64, False),
)


@dataclass(frozen=True)
class ShapeRow:
    layer: str
    input_shape: tuple[int, ...]
    output_shape: tuple[int, ...]


class EmoFormer:
    """
    Convolutional feature extractor, transformer encoder and softmax classifier.
    Shapes exclude the batch axis; inputs are [N, H, W] or [N, H, W, 1].
    """

    def __init__(self, config: EmoFormerConfig, layers: list[Layer], head: DenseLayer):
        self.config = config
        self.layers = layers
        self.head = head

    def parameters(self) -> Iterator[tuple[str, Tensor]]:
        for layer in self.layers:
            yield from layer.parameters()
        yield from self.head.parameters()

    def buffers(self) -> Iterator[tuple[str, np.ndarray]]:
        for layer in self.layers:
            yield from layer.buffers()

    def parameter_count(self) -> int:
        return sum(tensor.size for _, tensor in self.parameters())

    def state(self) -> dict[str, np.ndarray]:
        """Copies of all parameters and buffers by name."""
        state = {name: tensor.data.copy() for name, tensor in self.parameters()}
        state |= {name: buffer.copy() for name, buffer in self.buffers()}
        return state

    def load_state(self, state: dict[str, np.ndarray]):
        for name, tensor in self.parameters():
            if state[name].shape != tensor.shape:
                raise ShapeError(name, tensor.shape, state[name].shape)
            tensor.data = state[name].astype(tensor.dtype, copy=True)
        for name, buffer in self.buffers():
            if state[name].shape != buffer.shape:
                raise ShapeError(name, buffer.shape, state[name].shape)
            buffer[...] = state[name]

    def _as_maps(self, batch: Tensor) -> Tensor:
        h, w, c = self.config.input_shape
        if batch.shape[1:] == (h, w):
            return ops.reshape(batch, (batch.shape[0], h, w, c))
        if batch.shape[1:] != (h, w, c):
            raise ShapeError('Model input', ('N', h, w, c), batch.shape)
        return batch

    def features(self, batch: Tensor, context: ForwardContext) -> Tensor:
        """Representation right before the classifier (without fused vectors)."""
        x = self._as_maps(batch)
        for layer in self.layers:
            x = layer(x, context)
        return x

    def forward(
        self, batch: Tensor, mode: Mode, extra: Tensor | None = None, step: int = 0
    ) -> Tensor:
        """Class probabilities [N, num_classes]."""
        context = ForwardContext(mode=Mode(mode), seed=self.config.seed, step=step)
        x = self.features(batch, context)
        if self.config.uses_extra_vector:
            if extra is None or extra.shape != (batch.shape[0], XVECTOR_DIM):
                actual = None if extra is None else extra.shape
                raise ShapeError('Fused x-vectors', (batch.shape[0], XVECTOR_DIM), actual)
            x = ops.concat([x, extra], axis=1)
        return self.head(x, context)

    def predict(
        self, inputs: np.ndarray, extra: np.ndarray | None = None, batch_size: int = 64
    ) -> np.ndarray:
        """Inference-mode probabilities for a stack of inputs, computed in batches."""
        outputs = []
        with no_grad():
            for start in range(0, len(inputs), batch_size):
                chunk = Tensor(inputs[start : start + batch_size])
                fused = None if extra is None else Tensor(extra[start : start + batch_size])
                outputs.append(self.forward(chunk, Mode.INFER, fused).data)
        if not outputs:
            return np.zeros((0, self.config.num_classes))
        return np.concatenate(outputs).astype(np.float64)

    def shape_table(self) -> list[ShapeRow]:
        rows = []
        shape = self.config.input_shape
        for layer in self.layers:
            out = layer.output_shape(shape)
            rows.append(ShapeRow(layer.name, shape, out))
            shape = out
        if self.config.uses_extra_vector:
            fused = (shape[0] + XVECTOR_DIM,)
            rows.append(ShapeRow('fusion', shape, fused))
            shape = fused
        rows.append(ShapeRow(self.head.name, shape, self.head.output_shape(shape)))
        return rows


def build(config: EmoFormerConfig) -> EmoFormer:
    """
    Creates a freshly initialized network.

    :raises BuildError: If a layer cannot be created for the configured geometry.
    """
    rng = np.random.default_rng(config.seed)
    layers: list[Layer] = []
    shape = config.input_shape

    def append(layer: Layer):
        nonlocal shape
        layers.append(layer)
        shape = layer.output_shape(shape)

    for index, (kernel_size, filters, pooled) in enumerate(CONV_STACK, start=1):
        name = f'conv{index}'
        pool = None
        if pooled:
            h, w, _ = shape
            if w < 2:
                raise BuildError(name, f'cannot pool a feature map of width {w}')
            pool = (min(2, h), 2)
        append(ConvBlock.create(rng, name, kernel_size, shape[2], filters, pool))

    if MODEL_DIM % config.heads != 0:
        raise BuildError('encoder', f'{config.heads} heads do not divide model dimension 64')

    if config.sequence_mode == SequenceMode.POOLED1:
        append(GlobalAveragePool('gap'))
        append(DenseLayer.create(rng, 'dense', MODEL_DIM, MODEL_DIM, 'relu'))
        append(ToTokens('tokens'))
    else:
        append(ToTokens('tokens'))
        append(DenseLayer.create(rng, 'dense', MODEL_DIM, MODEL_DIM, 'relu'))
    append(
        TransformerEncoder.create(
            rng,
            'encoder',
            MODEL_DIM,
            config.heads,
            config.attn_dim,
            config.dropout,
            config.ln_eps,
        )
    )
    append(Flatten('flatten'))
    head_inputs = shape[0] + (XVECTOR_DIM if config.uses_extra_vector else 0)
    head = DenseLayer.create(rng, 'output', head_inputs, config.num_classes, 'softmax')

    model = EmoFormer(config, layers, head)
    log.debug('Built EmoFormer with %d parameters', model.parameter_count())
    return model
