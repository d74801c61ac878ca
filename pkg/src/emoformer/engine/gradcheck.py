"""
Central finite-difference checks of every differentiable operation.

For an operation f and a fixed random projection R, the scalar L = Σ f(x) · R is
differentiated both by backward() and numerically, (L(x + h) - L(x - h)) / 2h per input
element. The relative error is max |a - n| / max(max |a|, max |n|, 1e-12).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from emoformer.engine import ops
from emoformer.engine.ops import AttentionWeights, Mode, Padding
from emoformer.engine.tensor import Tensor, backward, no_grad, parameter, precision

log = logging.getLogger(__name__)

# (finite-difference step, tolerance) per precision.
STEP_AND_TOLERANCE = {
    np.dtype(np.float32): (1e-3, 1e-2),
    np.dtype(np.float64): (1e-6, 1e-5),
}

SHAPES_PER_OP = 5


@dataclass(frozen=True)
class GradcheckProblem:
    fn: Callable[..., Tensor]
    inputs: Sequence[np.ndarray]
    # Indices of the inputs to differentiate; None means all.
    wrt: Sequence[int] | None = None


@dataclass(frozen=True)
class GradcheckResult:
    op: str
    shapes: tuple[tuple[int, ...], ...]
    max_relative_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.max(np.abs(analytic), initial=0.0), np.max(np.abs(numeric), initial=0.0), 1e-12)
    return float(np.max(np.abs(analytic - numeric), initial=0.0) / scale)


def gradcheck(problem: GradcheckProblem, rng: np.random.Generator, dtype=np.float64) -> float:
    """Largest relative error over all checked inputs of one problem."""
    dtype = np.dtype(dtype)
    h, _ = STEP_AND_TOLERANCE[dtype]
    wrt = range(len(problem.inputs)) if problem.wrt is None else problem.wrt

    with precision(dtype):
        tensors = [
            parameter(x) if i in wrt else Tensor(x) for i, x in enumerate(problem.inputs)
        ]
        out = problem.fn(*tensors)
        projection = rng.standard_normal(out.shape)
        backward(ops.sum_all(ops.mul(out, Tensor(projection))))

        def loss() -> float:
            with no_grad():
                return float(np.sum(problem.fn(*tensors).data * projection, dtype=np.float64))

        worst = 0.0
        for i in wrt:
            target = tensors[i]
            numeric = np.zeros(target.shape, dtype=np.float64)
            for index in np.ndindex(target.shape):
                original = target.data[index]
                target.data[index] = original + h
                upper = loss()
                target.data[index] = original - h
                lower = loss()
                target.data[index] = original
                numeric[index] = (upper - lower) / (2 * h)
            analytic = target.grad if target.grad is not None else np.zeros(target.shape)
            worst = max(worst, relative_error(analytic.astype(np.float64), numeric))
    return worst


type ProblemFactory = Callable[[np.random.Generator], GradcheckProblem]

known_gradcheck_cases = dict[str, ProblemFactory]()


def gradcheck_case(name: str):
    """
    Decorator used to register problem factories of the gradcheck suite.
    """

    def register(factory: ProblemFactory) -> ProblemFactory:
        if name in known_gradcheck_cases:
            raise ValueError(f'Another gradcheck case for {name} has already been registered')
        known_gradcheck_cases[name] = factory
        return factory

    return register


def _dims(rng: np.random.Generator, count: int, low: int = 1, high: int = 4) -> tuple[int, ...]:
    return tuple(int(d) for d in rng.integers(low, high + 1, size=count))


def _normal(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(shape)


@gradcheck_case('add')
def _add(rng):
    shape = _dims(rng, 2)
    return GradcheckProblem(ops.add, [_normal(rng, shape), _normal(rng, shape)])


@gradcheck_case('sub')
def _sub(rng):
    shape = _dims(rng, 3)
    return GradcheckProblem(ops.sub, [_normal(rng, shape), _normal(rng, shape)])


@gradcheck_case('mul')
def _mul(rng):
    shape = _dims(rng, 2)
    return GradcheckProblem(ops.mul, [_normal(rng, shape), _normal(rng, shape)])


@gradcheck_case('scale')
def _scale(rng):
    factor = float(rng.uniform(-2, 2))
    return GradcheckProblem(lambda x: ops.scale(x, factor), [_normal(rng, _dims(rng, 2))])


@gradcheck_case('add_bias')
def _add_bias(rng):
    shape = _dims(rng, 3)
    return GradcheckProblem(ops.add_bias, [_normal(rng, shape), _normal(rng, shape[-1:])])


@gradcheck_case('matmul')
def _matmul(rng):
    n, k, m = _dims(rng, 3)
    return GradcheckProblem(ops.matmul, [_normal(rng, (n, k)), _normal(rng, (k, m))])


@gradcheck_case('bmm')
def _bmm(rng):
    b, n, k, m = _dims(rng, 4)
    return GradcheckProblem(ops.bmm, [_normal(rng, (b, n, k)), _normal(rng, (b, k, m))])


@gradcheck_case('reshape')
def _reshape(rng):
    a, b, c = _dims(rng, 3)
    return GradcheckProblem(lambda x: ops.reshape(x, (c, a * b)), [_normal(rng, (a, b, c))])


@gradcheck_case('transpose')
def _transpose(rng):
    axes = tuple(int(a) for a in rng.permutation(3))
    return GradcheckProblem(lambda x: ops.transpose(x, axes), [_normal(rng, _dims(rng, 3))])


@gradcheck_case('concat')
def _concat(rng):
    n, a, b = _dims(rng, 3)
    return GradcheckProblem(
        lambda x, y: ops.concat([x, y], axis=1), [_normal(rng, (n, a)), _normal(rng, (n, b))]
    )


@gradcheck_case('relu')
def _relu(rng):
    x = _normal(rng, _dims(rng, 3))
    # Keep inputs away from the kink.
    x[np.abs(x) < 0.05] = 0.5
    return GradcheckProblem(ops.relu, [x])


@gradcheck_case('softmax')
def _softmax(rng):
    return GradcheckProblem(lambda x: ops.softmax(x, axis=-1), [_normal(rng, _dims(rng, 2, 2, 5))])


@gradcheck_case('dropout')
def _dropout(rng):
    seed = int(rng.integers(1 << 30))
    return GradcheckProblem(
        lambda x: ops.dropout(x, 0.3, Mode.TRAIN, seed=seed, layer=1, step=2),
        [_normal(rng, _dims(rng, 3))],
    )


@gradcheck_case('flatten')
def _flatten(rng):
    return GradcheckProblem(ops.flatten, [_normal(rng, _dims(rng, 4))])


@gradcheck_case('dense')
def _dense(rng):
    n, s, i, o = _dims(rng, 4)
    return GradcheckProblem(
        ops.dense, [_normal(rng, (n, s, i)), _normal(rng, (i, o)), _normal(rng, (o,))]
    )


@gradcheck_case('conv2d')
def _conv2d(rng):
    n, c_in, c_out = _dims(rng, 3, 1, 3)
    h, w = _dims(rng, 2, 3, 6)
    kh, kw = _dims(rng, 2, 1, 3)
    stride = int(rng.integers(1, 3))
    padding = Padding.SAME if rng.random() < 0.5 else Padding.VALID
    x = _normal(rng, (n, h, w, c_in))
    kernel = _normal(rng, (kh, kw, c_in, c_out))
    return GradcheckProblem(
        lambda x, k, b: ops.conv2d(x, k, b, stride=stride, padding=padding),
        [x, kernel, _normal(rng, (c_out,))],
    )


@gradcheck_case('max_pool2d')
def _max_pool2d(rng):
    n, c = _dims(rng, 2, 1, 2)
    h, w = _dims(rng, 2, 2, 7)
    # Distinct values keep every window maximum unique.
    x = rng.permutation(n * h * w * c).reshape(n, h, w, c) * 0.1
    return GradcheckProblem(ops.max_pool2d, [x])


@gradcheck_case('global_avg_pool')
def _global_avg_pool(rng):
    return GradcheckProblem(ops.global_avg_pool, [_normal(rng, _dims(rng, 4))])


@gradcheck_case('batch_norm')
def _batch_norm(rng):
    n = int(rng.integers(2, 4))
    h, w, c = _dims(rng, 3, 1, 3)
    mode = Mode.TRAIN if rng.random() < 0.7 else Mode.INFER
    running_mean, running_var = _normal(rng, c) * 0.1, rng.uniform(0.5, 1.5, c)

    def fn(x, gamma, beta):
        return ops.batch_norm(x, gamma, beta, running_mean.copy(), running_var.copy(), mode)

    return GradcheckProblem(
        fn, [_normal(rng, (n, h, w, c)), rng.uniform(0.5, 1.5, c), _normal(rng, c)]
    )


@gradcheck_case('layer_norm')
def _layer_norm(rng):
    n, s = _dims(rng, 2)
    d = int(rng.integers(2, 6))
    return GradcheckProblem(
        ops.layer_norm, [_normal(rng, (n, s, d)), rng.uniform(0.5, 1.5, d), _normal(rng, d)]
    )


@gradcheck_case('multi_head_attention')
def _multi_head_attention(rng):
    n, s = _dims(rng, 2, 1, 3)
    heads = int(rng.integers(1, 3))
    d = heads * int(rng.integers(1, 3))
    inputs = [_normal(rng, (n, s, d))]
    for _ in range(4):
        inputs += [_normal(rng, (d, d)) * 0.5, _normal(rng, (d,)) * 0.1]

    def fn(x, *params):
        return ops.multi_head_attention(x, x, x, AttentionWeights(*params), heads)

    return GradcheckProblem(fn, inputs)


@gradcheck_case('cross_entropy')
def _cross_entropy(rng):
    n, k = _dims(rng, 2, 2, 5)
    one_hot = np.eye(k)[rng.integers(0, k, size=n)]
    return GradcheckProblem(ops.cross_entropy, [rng.uniform(0.1, 1.0, (n, k)), one_hot], wrt=[0])


def run_gradcheck_suite(
    seed: int = 0,
    dtype=np.float64,
    shapes_per_op: int = SHAPES_PER_OP,
    only: Sequence[str] | None = None,
) -> list[GradcheckResult]:
    """One result per registered operation: its worst error over `shapes_per_op` shapes."""
    dtype = np.dtype(dtype)
    _, tolerance = STEP_AND_TOLERANCE[dtype]
    results = []
    for index, (name, factory) in enumerate(known_gradcheck_cases.items()):
        if only is not None and name not in only:
            continue
        rng = np.random.default_rng([seed, index])
        worst, shapes = 0.0, []
        for _ in range(shapes_per_op):
            problem = factory(rng)
            shapes.append(tuple(np.shape(problem.inputs[0])))
            worst = max(worst, gradcheck(problem, rng, dtype))
        results.append(GradcheckResult(name, tuple(shapes), worst, tolerance))
        log.debug('gradcheck %s: worst relative error %.3e', name, worst)
    return results
