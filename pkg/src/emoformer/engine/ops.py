import math
from enum import StrEnum
from typing import NamedTuple, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from emoformer.engine.tensor import Tensor, result
from emoformer.errors import ArgumentError, ShapeError

# Added to probabilities inside the cross-entropy logarithm.
PROBABILITY_FLOOR = 1e-12

BATCH_NORM_EPSILON = 1e-3
BATCH_NORM_MOMENTUM = 0.99
LAYER_NORM_EPSILON = 1e-6


class Mode(StrEnum):
    TRAIN = 'train'
    INFER = 'infer'


class Padding(StrEnum):
    SAME = 'same'
    VALID = 'valid'


def _require_shape(what: str, tensor: Tensor, expected: tuple[int, ...]):
    if tensor.shape != expected:
        raise ShapeError(what, expected, tensor.shape)


def _require_ndim(what: str, tensor: Tensor, ndim: int):
    if tensor.ndim != ndim:
        raise ShapeError(what, f'{ndim}-D', tensor.shape)


def _pair(value: int | Sequence[int]) -> tuple[int, int]:
    if isinstance(value, int):
        pair = (value, value)
    else:
        pair = tuple(int(v) for v in value)
    if len(pair) != 2 or min(pair) < 1:
        raise ArgumentError(f'Expected one or two positive sizes, got {value}')
    return pair


# Elementwise and structural operations.


def add(a: Tensor, b: Tensor) -> Tensor:
    _require_shape('add', b, a.shape)
    return result(a.data + b.data, 'add', (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_shape('sub', b, a.shape)
    return result(a.data - b.data, 'sub', (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _require_shape('mul', b, a.shape)
    return result(a.data * b.data, 'mul', (a, b), lambda g: (g * b.data, g * a.data))


def scale(x: Tensor, factor: float) -> Tensor:
    return result(x.data * factor, 'scale', (x,), lambda g: (g * factor,))


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Adds a vector along the last axis, the only broadcasting the engine performs."""
    _require_shape('bias', bias, x.shape[-1:])

    def backward_fn(g):
        return g, g.reshape(-1, g.shape[-1]).sum(axis=0, dtype=np.float64)

    return result(x.data + bias.data, 'add_bias', (x, bias), backward_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _require_ndim('matmul left operand', a, 2)
    _require_ndim('matmul right operand', b, 2)
    if a.shape[1] != b.shape[0]:
        raise ShapeError('matmul inner dimension', a.shape[1], b.shape[0])
    return result(a.data @ b.data, 'matmul', (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def bmm(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes with identical leading (batch) axes."""
    if a.ndim < 3 or a.ndim != b.ndim or a.shape[:-2] != b.shape[:-2]:
        raise ShapeError('bmm batch axes', a.shape[:-2], b.shape[:-2])
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError('bmm inner dimension', a.shape[-1], b.shape[-2])

    def backward_fn(g):
        return g @ np.swapaxes(b.data, -1, -2), np.swapaxes(a.data, -1, -2) @ g

    return result(np.matmul(a.data, b.data), 'bmm', (a, b), backward_fn)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        data = x.data.reshape(tuple(shape))
    except ValueError as e:
        raise ShapeError('reshape', tuple(shape), x.shape) from e
    return result(data, 'reshape', (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError('transpose axes', tuple(range(x.ndim)), axes)
    inverse = tuple(np.argsort(axes))
    return result(x.data.transpose(axes), 'transpose', (x,), lambda g: (g.transpose(inverse),))


def flatten(x: Tensor) -> Tensor:
    """[N, ...] → [N, product of the remaining axes]."""
    if x.ndim < 1:
        raise ShapeError('flatten', '[N, ...]', x.shape)
    return reshape(x, (x.shape[0], -1))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise ArgumentError('concat needs at least one tensor')
    axis = axis % tensors[0].ndim
    for t in tensors[1:]:
        if t.ndim != tensors[0].ndim or any(
            t.shape[i] != tensors[0].shape[i] for i in range(t.ndim) if i != axis
        ):
            raise ShapeError('concat', tensors[0].shape, t.shape)

    boundaries = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward_fn(g):
        return np.split(g, boundaries, axis=axis)

    data = np.concatenate([t.data for t in tensors], axis=axis)
    return result(data, 'concat', tensors, backward_fn)


def sum_all(x: Tensor) -> Tensor:
    total = np.array(x.data.sum(dtype=np.float64))
    return result(total, 'sum', (x,), lambda g: (np.full(x.shape, g.reshape(())),))


def mean_all(x: Tensor) -> Tensor:
    return scale(sum_all(x), 1.0 / x.size)


# Activations.


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return result(np.where(mask, x.data, 0), 'relu', (x,), lambda g: (g * mask,))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    exp = np.exp(shifted.astype(np.float64))
    probs = exp / exp.sum(axis=axis, keepdims=True)

    def backward_fn(g):
        inner = np.sum(g * probs, axis=axis, keepdims=True)
        return (probs * (g - inner),)

    return result(probs, 'softmax', (x,), backward_fn)


def dropout(
    x: Tensor, rate: float, mode: Mode, seed: int = 0, layer: int = 0, step: int = 0
) -> Tensor:
    """
    Inverted dropout: kept activations are scaled by 1/(1 - rate). The mask is drawn from
    a counter-based Philox generator keyed by (seed, layer) at counter `step`, so it does
    not depend on how many random numbers were drawn before.
    """
    if not 0 <= rate < 1:
        raise ArgumentError(f'Dropout rate must lie in [0, 1), got {rate}')
    if Mode(mode) == Mode.INFER or rate == 0:
        return x

    key = ((seed % 2**64) << 64) | (layer % 2**64)
    generator = np.random.Generator(np.random.Philox(key=key, counter=(step % 2**64) << 192))
    keep = (generator.random(x.shape) >= rate) / (1.0 - rate)
    return result(x.data * keep, 'dropout', (x,), lambda g: (g * keep,))


# Layers.


def dense(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """x [..., in] @ weight [in, out] (+ bias [out])."""
    _require_ndim('dense weight', weight, 2)
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError('dense input features', weight.shape[0], x.shape[-1])
    leading = x.shape[:-1]
    out = matmul(reshape(x, (-1, weight.shape[0])), weight)
    if bias is not None:
        out = add_bias(out, bias)
    return reshape(out, leading + (weight.shape[1],))


def _conv_geometry(size: int, kernel: int, stride: int, padding: Padding) -> tuple[int, int, int]:
    """(output size, padding before, padding after) along one axis, TensorFlow style."""
    if padding == Padding.SAME:
        out = -(-size // stride)
        total = max((out - 1) * stride + kernel - size, 0)
        return out, total // 2, total - total // 2
    out = (size - kernel) // stride + 1
    if out < 1:
        raise ShapeError('valid convolution', f'input of at least {kernel}', size)
    return out, 0, 0


def conv2d(
    x: Tensor,
    kernel: Tensor,
    bias: Tensor | None = None,
    stride: int | Sequence[int] = 1,
    padding: Padding = Padding.SAME,
) -> Tensor:
    """
    Cross-correlation of x [N, H, W, C_in] with kernel [kh, kw, C_in, C_out].
    `same` padding keeps ceil(H / stride) rows and ceil(W / stride) columns.
    """
    _require_ndim('conv2d input', x, 4)
    _require_ndim('conv2d kernel', kernel, 4)
    n, h, w, c_in = x.shape
    kh, kw, k_in, c_out = kernel.shape
    if k_in != c_in:
        raise ShapeError('conv2d input channels', k_in, c_in)
    if bias is not None:
        _require_shape('conv2d bias', bias, (c_out,))
    sh, sw = _pair(stride)
    padding = Padding(padding)
    ho, top, bottom = _conv_geometry(h, kh, sh, padding)
    wo, left, right = _conv_geometry(w, kw, sw, padding)

    padded = np.pad(x.data, ((0, 0), (top, bottom), (left, right), (0, 0)))
    windows = sliding_window_view(padded, (kh, kw), axis=(1, 2))[:, ::sh, ::sw][:, :ho, :wo]
    cols = windows.transpose(0, 1, 2, 4, 5, 3).reshape(n * ho * wo, kh * kw * c_in)
    kmat = kernel.data.reshape(kh * kw * c_in, c_out)
    out = (cols @ kmat).reshape(n, ho, wo, c_out)
    if bias is not None:
        out = out + bias.data

    def backward_fn(g):
        g2 = g.reshape(-1, c_out)
        dkernel = (cols.T @ g2).reshape(kernel.shape)
        dcols = (g2 @ kmat.T).reshape(n, ho, wo, kh, kw, c_in)
        dpadded = np.zeros(padded.shape, dtype=g.dtype)
        for i in range(kh):
            for j in range(kw):
                rows = slice(i, i + sh * (ho - 1) + 1, sh)
                columns = slice(j, j + sw * (wo - 1) + 1, sw)
                dpadded[:, rows, columns] += dcols[:, :, :, i, j]
        dx = dpadded[:, top : top + h, left : left + w]
        if bias is None:
            return dx, dkernel
        return dx, dkernel, g.sum(axis=(0, 1, 2), dtype=np.float64)

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return result(out, 'conv2d', parents, backward_fn)


def max_pool2d(
    x: Tensor, pool: int | Sequence[int] = 2, stride: int | Sequence[int] | None = None
) -> Tensor:
    """
    Maximum over pool windows of x [N, H, W, C]; output size floor((H - ph) / sh) + 1.
    The gradient flows to the first maximum of every window.
    """
    _require_ndim('max_pool2d input', x, 4)
    ph, pw = _pair(pool)
    sh, sw = _pair(stride if stride is not None else (ph, pw))
    n, h, w, c = x.shape
    if ph > h or pw > w:
        raise ShapeError('max_pool2d window', f'at most {(h, w)}', (ph, pw))
    ho, wo = (h - ph) // sh + 1, (w - pw) // sw + 1

    windows = sliding_window_view(x.data, (ph, pw), axis=(1, 2))[:, ::sh, ::sw][:, :ho, :wo]
    flat = windows.reshape(n, ho, wo, c, ph * pw)
    winner = flat.argmax(axis=-1)[..., None]
    out = np.take_along_axis(flat, winner, axis=-1)[..., 0]

    def backward_fn(g):
        routed = np.zeros(flat.shape, dtype=g.dtype)
        np.put_along_axis(routed, winner, g[..., None], axis=-1)
        routed = routed.reshape(n, ho, wo, c, ph, pw)
        dx = np.zeros(x.shape, dtype=g.dtype)
        for i in range(ph):
            for j in range(pw):
                rows = slice(i, i + sh * (ho - 1) + 1, sh)
                columns = slice(j, j + sw * (wo - 1) + 1, sw)
                dx[:, rows, columns] += routed[..., i, j]
        return (dx,)

    return result(out, 'max_pool2d', (x,), backward_fn)


def global_avg_pool(x: Tensor) -> Tensor:
    """[N, H, W, C] → [N, C]."""
    _require_ndim('global_avg_pool input', x, 4)
    n, h, w, c = x.shape
    out = x.data.mean(axis=(1, 2), dtype=np.float64)

    def backward_fn(g):
        return (np.broadcast_to(g[:, None, None, :] / (h * w), (n, h, w, c)).copy(),)

    return result(out, 'global_avg_pool', (x,), backward_fn)


def _normalize_backward(g_hat: np.ndarray, x_hat: np.ndarray, inv_std, axes, count: int):
    mean_g = g_hat.sum(axis=axes, keepdims=True, dtype=np.float64) / count
    mean_gx = (g_hat * x_hat).sum(axis=axes, keepdims=True, dtype=np.float64) / count
    return inv_std * (g_hat - mean_g - x_hat * mean_gx)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    mode: Mode,
    momentum: float = BATCH_NORM_MOMENTUM,
    eps: float = BATCH_NORM_EPSILON,
) -> Tensor:
    """
    Per-channel normalization over every axis but the last. In train mode the batch
    statistics (biased variance) are used and the running statistics updated in place as
    running = momentum · running + (1 - momentum) · batch; infer mode uses the running ones.

    :raises ArgumentError: For a batch of one sample in train mode.
    """
    channels = x.shape[-1]
    _require_shape('batch_norm gamma', gamma, (channels,))
    _require_shape('batch_norm beta', beta, (channels,))
    axes = tuple(range(x.ndim - 1))

    if Mode(mode) == Mode.INFER:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        x_hat = (x.data - running_mean) * inv_std

        def infer_backward(g):
            return (
                g * gamma.data * inv_std,
                (g * x_hat).sum(axis=axes, dtype=np.float64),
                g.sum(axis=axes, dtype=np.float64),
            )

        out = x_hat * gamma.data + beta.data
        return result(out, 'batch_norm', (x, gamma, beta), infer_backward)

    if x.shape[0] < 2:
        raise ArgumentError('batch_norm in train mode needs a batch of at least 2 samples')
    count = x.size // channels
    mean = x.data.mean(axis=axes, dtype=np.float64)
    var = x.data.var(axis=axes, dtype=np.float64)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x.data - mean) * inv_std

    running_mean *= momentum
    running_mean += (1.0 - momentum) * mean
    running_var *= momentum
    running_var += (1.0 - momentum) * var

    def train_backward(g):
        dx = _normalize_backward(g * gamma.data, x_hat, inv_std, axes, count)
        return (
            dx,
            (g * x_hat).sum(axis=axes, dtype=np.float64),
            g.sum(axis=axes, dtype=np.float64),
        )

    return result(x_hat * gamma.data + beta.data, 'batch_norm', (x, gamma, beta), train_backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYER_NORM_EPSILON) -> Tensor:
    """Normalizes the last axis to zero mean and unit (biased) variance, then scales."""
    features = x.shape[-1]
    _require_shape('layer_norm gamma', gamma, (features,))
    _require_shape('layer_norm beta', beta, (features,))

    mean = x.data.mean(axis=-1, keepdims=True, dtype=np.float64)
    var = x.data.var(axis=-1, keepdims=True, dtype=np.float64)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x.data - mean) * inv_std
    leading = tuple(range(x.ndim - 1))

    def backward_fn(g):
        dx = _normalize_backward(g * gamma.data, x_hat, inv_std, -1, features)
        return (
            dx,
            (g * x_hat).sum(axis=leading, dtype=np.float64),
            g.sum(axis=leading, dtype=np.float64),
        )

    return result(x_hat * gamma.data + beta.data, 'layer_norm', (x, gamma, beta), backward_fn)


class AttentionWeights(NamedTuple):
    """Query, key, value and output projections, each [D, D] with a [D] bias."""

    w_query: Tensor
    b_query: Tensor
    w_key: Tensor
    b_key: Tensor
    w_value: Tensor
    b_value: Tensor
    w_output: Tensor
    b_output: Tensor


def _split_heads(x: Tensor, heads: int) -> Tensor:
    n, s, d = x.shape
    return transpose(reshape(x, (n, s, heads, d // heads)), (0, 2, 1, 3))


def multi_head_attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    weights: AttentionWeights,
    heads: int,
    return_weights: bool = False,
) -> Tensor | tuple[Tensor, Tensor]:
    """
    Scaled dot-product attention over inputs [N, S, D] with `heads` heads of size D / heads.
    With return_weights the attention matrix [N, heads, S_q, S_k] is returned as well.
    """
    for name, t in (('query', q), ('key', k), ('value', v)):
        _require_ndim(f'attention {name}', t, 3)
    if k.shape != v.shape or q.shape[0] != k.shape[0] or q.shape[2] != k.shape[2]:
        raise ShapeError('attention key/value', (q.shape[0], 'S', q.shape[2]), k.shape)
    n, s, d = q.shape
    if heads < 1 or d % heads != 0:
        raise ArgumentError(f'Model dimension {d} is not divisible by {heads} heads')

    queries = _split_heads(dense(q, weights.w_query, weights.b_query), heads)
    keys = _split_heads(dense(k, weights.w_key, weights.b_key), heads)
    values = _split_heads(dense(v, weights.w_value, weights.b_value), heads)

    scores = scale(bmm(queries, transpose(keys, (0, 1, 3, 2))), 1.0 / math.sqrt(d // heads))
    attention = softmax(scores, axis=-1)
    context = transpose(bmm(attention, values), (0, 2, 1, 3))
    out = dense(reshape(context, (n, s, d)), weights.w_output, weights.b_output)
    if return_weights:
        return out, attention
    return out


def cross_entropy(probs: Tensor, one_hot: Tensor) -> Tensor:
    """-mean over the batch of Σ y · log(p + 1e-12)."""
    _require_ndim('cross_entropy probabilities', probs, 2)
    _require_shape('cross_entropy targets', one_hot, probs.shape)
    n = probs.shape[0]
    shifted = probs.data.astype(np.float64) + PROBABILITY_FLOOR
    loss = -np.sum(one_hot.data * np.log(shifted), dtype=np.float64) / n

    def backward_fn(g):
        return (-g * one_hot.data / shifted / n, None)

    return result(np.array(loss), 'cross_entropy', (probs, one_hot), backward_fn)
