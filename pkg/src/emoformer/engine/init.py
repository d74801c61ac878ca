import numpy as np

from emoformer.engine.tensor import Tensor, parameter


def fans(shape: tuple[int, ...]) -> tuple[int, int]:
    """Fan-in and fan-out of a dense [in, out] or convolution [kh, kw, in, out] weight."""
    if len(shape) == 2:
        return shape[0], shape[1]
    receptive = int(np.prod(shape[:-2]))
    return receptive * shape[-2], receptive * shape[-1]


def glorot_uniform(
    rng: np.random.Generator, shape: tuple[int, ...], name: str | None = None
) -> Tensor:
    fan_in, fan_out = fans(shape)
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return parameter(rng.uniform(-limit, limit, size=shape), name=name)


def zeros(shape: tuple[int, ...], name: str | None = None) -> Tensor:
    return parameter(np.zeros(shape), name=name)


def ones(shape: tuple[int, ...], name: str | None = None) -> Tensor:
    return parameter(np.ones(shape), name=name)
