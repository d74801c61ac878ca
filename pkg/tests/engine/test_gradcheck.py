import unittest

import numpy as np

from emoformer.engine import (
    GradcheckResult,
    known_gradcheck_cases,
    ops,
    relative_error,
    run_gradcheck_suite,
)
from emoformer.engine.gradcheck import GradcheckProblem, gradcheck

DIFFERENTIABLE_OPS = {
    'add',
    'sub',
    'mul',
    'scale',
    'add_bias',
    'matmul',
    'bmm',
    'reshape',
    'transpose',
    'concat',
    'relu',
    'softmax',
    'dropout',
    'flatten',
    'dense',
    'conv2d',
    'max_pool2d',
    'global_avg_pool',
    'batch_norm',
    'layer_norm',
    'multi_head_attention',
    'cross_entropy',
}


class GradcheckSuiteTest(unittest.TestCase):

    def test_every_operation_is_covered(self):
        self.assertEqual(set(known_gradcheck_cases), DIFFERENTIABLE_OPS)

    def test_float64_suite_passes(self):
        results = run_gradcheck_suite(seed=0, dtype=np.float64)
        self.assertEqual(len(results), len(DIFFERENTIABLE_OPS))
        for result in results:
            with self.subTest(op=result.op):
                self.assertLessEqual(
                    result.max_relative_error,
                    1e-5,
                    f'{result.op} failed for shapes {result.shapes}',
                )

    def test_suite_with_another_seed(self):
        for result in run_gradcheck_suite(seed=7, shapes_per_op=2):
            with self.subTest(op=result.op):
                self.assertTrue(result.passed, f'{result.op}: {result.max_relative_error:.3e}')

    def test_single_operation(self):
        results = run_gradcheck_suite(only=['conv2d'])
        self.assertEqual([r.op for r in results], ['conv2d'])
        self.assertEqual(len(results[0].shapes), 5)

    def test_is_reproducible(self):
        first = run_gradcheck_suite(seed=3, shapes_per_op=1, only=['layer_norm', 'softmax'])
        second = run_gradcheck_suite(seed=3, shapes_per_op=1, only=['layer_norm', 'softmax'])
        self.assertEqual(first, second)


class GradcheckTest(unittest.TestCase):

    def test_detects_a_wrong_gradient(self):
        def doubled_gradient(x):
            out = ops.scale(x, 1.0)
            out._backward = lambda g: (2 * g,)
            return out

        rng = np.random.default_rng(0)
        problem = GradcheckProblem(doubled_gradient, [rng.standard_normal((3, 3))])
        error = gradcheck(problem, rng)
        self.assertGreater(error, 0.1)
        self.assertFalse(GradcheckResult('broken', ((3, 3),), error, 1e-5).passed)

    def test_relative_error(self):
        self.assertEqual(relative_error(np.array([1.0, 2.0]), np.array([1.0, 2.0])), 0.0)
        self.assertAlmostEqual(relative_error(np.array([1.0, 4.0]), np.array([1.0, 3.0])), 0.25)
        self.assertEqual(relative_error(np.zeros(2), np.zeros(2)), 0.0)
