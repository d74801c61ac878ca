from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from emoformer.engine.tensor import Tensor
from emoformer.errors import ArgumentError, ShapeError


@dataclass(frozen=True)
class AdamHyperparameters:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise ArgumentError(f'Learning rate must be positive, got {self.lr}')
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ArgumentError(f'Adam betas must lie in [0, 1), got {self.beta1}, {self.beta2}')


@dataclass
class AdamState:
    """First and second moment estimates per parameter and the number of steps taken."""

    step: int = 0
    first_moments: list[np.ndarray] = field(default_factory=list)
    second_moments: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> 'AdamState':
        return cls(
            step=0,
            first_moments=[np.zeros(p.shape, dtype=np.float64) for p in params],
            second_moments=[np.zeros(p.shape, dtype=np.float64) for p in params],
        )


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray | None],
    state: AdamState,
    hyper: AdamHyperparameters = AdamHyperparameters(),
) -> tuple[list[np.ndarray], AdamState]:
    """
    One bias-corrected Adam update. Returns the new parameter values and moment state;
    the inputs are left untouched. A missing gradient counts as zero.
    """
    if len(params) != len(grads):
        raise ArgumentError(f'Got {len(params)} parameters but {len(grads)} gradients')
    if not state.first_moments:
        state = AdamState.zeros_like(params)

    step = state.step + 1
    correction1 = 1.0 - hyper.beta1**step
    correction2 = 1.0 - hyper.beta2**step

    new_params, first, second = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moments, state.second_moments):
        g = np.zeros(p.shape) if g is None else np.asarray(g, dtype=np.float64)
        if g.shape != p.shape:
            raise ShapeError('Adam gradient', p.shape, g.shape)
        m = hyper.beta1 * m + (1.0 - hyper.beta1) * g
        v = hyper.beta2 * v + (1.0 - hyper.beta2) * g * g
        update = hyper.lr * (m / correction1) / (np.sqrt(v / correction2) + hyper.eps)
        new_params.append((p - update).astype(p.dtype))
        first.append(m)
        second.append(v)

    return new_params, AdamState(step=step, first_moments=first, second_moments=second)


class Adam:
    """Applies adam_step to a fixed list of parameter tensors in place."""

    def __init__(
        self, params: Sequence[Tensor], hyper: AdamHyperparameters = AdamHyperparameters()
    ):
        self.params = list(params)
        self.hyper = hyper
        self.state = AdamState.zeros_like([p.data for p in self.params])

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        values, self.state = adam_step(
            [p.data for p in self.params], [p.grad for p in self.params], self.state, self.hyper
        )
        for p, value in zip(self.params, values):
            p.data = value
