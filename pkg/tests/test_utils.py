import threading
import time
import unittest

from emoformer.utils import format_human_readable, is_power_of_two, parallel_map, round_half_up


class UtilsTest(unittest.TestCase):

    def test_human_readable_lists(self):
        self.assertEqual(format_human_readable(['conv2d']), 'conv2d')
        self.assertEqual(format_human_readable(['relu', 'softmax']), 'relu and softmax')
        self.assertEqual(format_human_readable(['a', 'b', 'c']), 'a, b and c')

    def test_round_half_up(self):
        # Python's round() would give 0 and 2 for the first and last case.
        for value, expected in ((0.5, 1), (1.4, 1), (1.5, 2), (2.5, 3), (25.0, 25)):
            with self.subTest(value=value):
                self.assertEqual(round_half_up(value), expected)

    def test_powers_of_two(self):
        self.assertTrue(all(is_power_of_two(2**k) for k in range(12)))
        for n in (0, -4, 3, 400, 513):
            self.assertFalse(is_power_of_two(n), n)

    def test_parallel_map_keeps_input_order(self):
        def slow_square(x: int) -> int:
            time.sleep(0.001 * (10 - x))
            return x * x

        expected = [x * x for x in range(10)]
        for jobs in (1, 4):
            with self.subTest(jobs=jobs):
                self.assertEqual(parallel_map(slow_square, range(10), jobs), expected)

    def test_parallel_map_uses_threads(self):
        names = parallel_map(lambda _: threading.current_thread().name, range(8), jobs=4)
        self.assertEqual(len(names), 8)
        self.assertEqual(parallel_map(lambda x: x, [], jobs=4), [])
