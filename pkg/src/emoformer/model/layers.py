from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from emoformer.engine import ops
from emoformer.engine.init import glorot_uniform, ones, zeros
from emoformer.engine.ops import AttentionWeights, Mode
from emoformer.engine.tensor import Tensor


@dataclass(frozen=True)
class ForwardContext:
    """Per-call settings every layer sees."""

    mode: Mode
    seed: int = 0
    step: int = 0


class Layer:
    name: str

    def parameters(self) -> Iterator[tuple[str, Tensor]]:
        return iter(())

    def buffers(self) -> Iterator[tuple[str, np.ndarray]]:
        """Non-trainable state saved along with the parameters."""
        return iter(())

    def macs(self, input_shape: tuple[int, ...]) -> int:
        return 0

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        raise NotImplementedError

    def __call__(self, x: Tensor, context: ForwardContext) -> Tensor:
        raise NotImplementedError


def pooled_size(size: int, window: int) -> int:
    return (size - window) // window + 1


@dataclass(eq=False)
class ConvBlock(Layer):
    """Convolution (same padding) → ReLU → batch normalization → optional max pooling."""

    name: str
    kernel: Tensor
    bias: Tensor
    gamma: Tensor
    beta: Tensor
    pool: tuple[int, int] | None = None
    running_mean: np.ndarray = field(default=None)
    running_var: np.ndarray = field(default=None)

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        name: str,
        kernel_size: int,
        c_in: int,
        c_out: int,
        pool: tuple[int, int] | None = None,
    ) -> 'ConvBlock':
        return cls(
            name=name,
            kernel=glorot_uniform(rng, (kernel_size, kernel_size, c_in, c_out), f'{name}.kernel'),
            bias=zeros((c_out,), f'{name}.bias'),
            gamma=ones((c_out,), f'{name}.gamma'),
            beta=zeros((c_out,), f'{name}.beta'),
            pool=pool,
            running_mean=np.zeros(c_out),
            running_var=np.ones(c_out),
        )

    @property
    def kernel_size(self) -> tuple[int, int]:
        return self.kernel.shape[0], self.kernel.shape[1]

    @property
    def channels(self) -> int:
        return self.kernel.shape[3]

    def parameters(self):
        for part in ('kernel', 'bias', 'gamma', 'beta'):
            yield f'{self.name}.{part}', getattr(self, part)

    def buffers(self):
        yield f'{self.name}.running_mean', self.running_mean
        yield f'{self.name}.running_var', self.running_var

    def conv_shape(self, input_shape):
        h, w, _ = input_shape
        return h, w, self.channels

    def output_shape(self, input_shape):
        h, w, c = self.conv_shape(input_shape)
        if self.pool is None:
            return h, w, c
        return pooled_size(h, self.pool[0]), pooled_size(w, self.pool[1]), c

    def macs(self, input_shape):
        h, w, c_in = input_shape
        kh, kw = self.kernel_size
        return h * w * self.channels * kh * kw * c_in

    def __call__(self, x, context):
        y = ops.relu(ops.conv2d(x, self.kernel, self.bias))
        y = ops.batch_norm(
            y, self.gamma, self.beta, self.running_mean, self.running_var, context.mode
        )
        if self.pool is not None:
            y = ops.max_pool2d(y, self.pool)
        return y


@dataclass(eq=False)
class DenseLayer(Layer):
    name: str
    weight: Tensor
    bias: Tensor
    activation: str = 'linear'

    @classmethod
    def create(
        cls, rng: np.random.Generator, name: str, n_in: int, n_out: int, activation: str
    ) -> 'DenseLayer':
        return cls(
            name=name,
            weight=glorot_uniform(rng, (n_in, n_out), f'{name}.weight'),
            bias=zeros((n_out,), f'{name}.bias'),
            activation=activation,
        )

    @property
    def units(self) -> int:
        return self.weight.shape[1]

    def parameters(self):
        yield f'{self.name}.weight', self.weight
        yield f'{self.name}.bias', self.bias

    def output_shape(self, input_shape):
        return input_shape[:-1] + (self.units,)

    def macs(self, input_shape):
        positions = int(np.prod(input_shape[:-1], dtype=np.int64))
        return positions * self.weight.shape[0] * self.units

    def __call__(self, x, context):
        y = ops.dense(x, self.weight, self.bias)
        if self.activation == 'relu':
            return ops.relu(y)
        if self.activation == 'softmax':
            return ops.softmax(y, axis=-1)
        return y


@dataclass(eq=False)
class GlobalAveragePool(Layer):
    name: str

    def output_shape(self, input_shape):
        return (input_shape[-1],)

    def __call__(self, x, context):
        return ops.global_avg_pool(x)


@dataclass(eq=False)
class ToTokens(Layer):
    """[N, H, W, C] → [N, H·W, C]: every spatial position becomes a token."""

    name: str

    def output_shape(self, input_shape):
        if len(input_shape) == 1:
            return 1, input_shape[0]
        h, w, c = input_shape
        return h * w, c

    def __call__(self, x, context):
        if x.ndim == 2:
            return ops.reshape(x, (x.shape[0], 1, x.shape[1]))
        n, h, w, c = x.shape
        return ops.reshape(x, (n, h * w, c))


@dataclass(eq=False)
class Flatten(Layer):
    name: str

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape, dtype=np.int64)),)

    def __call__(self, x, context):
        return ops.flatten(x)


@dataclass(eq=False)
class TransformerEncoder(Layer):
    """
    x + dropout(MHA(LN(x))), followed by LN → dense(ff, ReLU) → dropout → dense(d) with a
    second residual connection around the feed-forward part.
    """

    name: str
    heads: int
    attention: AttentionWeights
    ln1_gamma: Tensor
    ln1_beta: Tensor
    ln2_gamma: Tensor
    ln2_beta: Tensor
    ff_in: DenseLayer
    ff_out: DenseLayer
    dropout: float
    eps: float
    # Dropout sites are numbered from this index on.
    dropout_index: int = 0

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        name: str,
        dim: int,
        heads: int,
        ff_dim: int,
        dropout: float,
        eps: float,
        dropout_index: int = 0,
    ) -> 'TransformerEncoder':
        projections = []
        for part in ('query', 'key', 'value', 'output'):
            projections.append(glorot_uniform(rng, (dim, dim), f'{name}.attention.w_{part}'))
            projections.append(zeros((dim,), f'{name}.attention.b_{part}'))
        return cls(
            name=name,
            heads=heads,
            attention=AttentionWeights(*projections),
            ln1_gamma=ones((dim,), f'{name}.ln1.gamma'),
            ln1_beta=zeros((dim,), f'{name}.ln1.beta'),
            ln2_gamma=ones((dim,), f'{name}.ln2.gamma'),
            ln2_beta=zeros((dim,), f'{name}.ln2.beta'),
            ff_in=DenseLayer.create(rng, f'{name}.ff_in', dim, ff_dim, 'relu'),
            ff_out=DenseLayer.create(rng, f'{name}.ff_out', ff_dim, dim, 'linear'),
            dropout=dropout,
            eps=eps,
            dropout_index=dropout_index,
        )

    @property
    def dim(self) -> int:
        return self.ln1_gamma.shape[0]

    def parameters(self):
        for name, tensor in zip(AttentionWeights._fields, self.attention):
            yield f'{self.name}.attention.{name}', tensor
        yield f'{self.name}.ln1.gamma', self.ln1_gamma
        yield f'{self.name}.ln1.beta', self.ln1_beta
        yield f'{self.name}.ln2.gamma', self.ln2_gamma
        yield f'{self.name}.ln2.beta', self.ln2_beta
        yield from self.ff_in.parameters()
        yield from self.ff_out.parameters()

    def output_shape(self, input_shape):
        return input_shape

    def attention_macs(self, sequence: int) -> int:
        # Q, K, V and output projections plus scores and context.
        return 4 * sequence * self.dim**2 + 2 * sequence**2 * self.dim

    def feed_forward_macs(self, sequence: int) -> int:
        hidden = self.ff_in.units
        return self.ff_in.macs((sequence, self.dim)) + self.ff_out.macs((sequence, hidden))

    def macs(self, input_shape):
        sequence = input_shape[0]
        return self.attention_macs(sequence) + self.feed_forward_macs(sequence)

    def _dropout(self, x: Tensor, context: ForwardContext, site: int) -> Tensor:
        return ops.dropout(
            x,
            self.dropout,
            context.mode,
            seed=context.seed,
            layer=self.dropout_index + site,
            step=context.step,
        )

    def __call__(self, x, context):
        normed = ops.layer_norm(x, self.ln1_gamma, self.ln1_beta, self.eps)
        attended = ops.multi_head_attention(normed, normed, normed, self.attention, self.heads)
        x = ops.add(x, self._dropout(attended, context, 0))

        normed = ops.layer_norm(x, self.ln2_gamma, self.ln2_beta, self.eps)
        hidden = self._dropout(self.ff_in(normed, context), context, 1)
        return ops.add(x, self.ff_out(hidden, context))
