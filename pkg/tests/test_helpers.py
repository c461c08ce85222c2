import os
import threading
import unittest

from fftconv.dtypes import dtypes
from fftconv.helpers import getenv, ilog2, is_pow2, next_pow2, parallel_chunks, split_range


class TestHelpers(unittest.TestCase):
    def test_pow2(self):
        self.assertEqual([x for x in range(1, 70) if is_pow2(x)], [1, 2, 4, 8, 16, 32, 64])
        self.assertFalse(is_pow2(0))
        self.assertEqual([next_pow2(x) for x in (1, 2, 3, 5, 16, 17, 33)], [1, 2, 4, 8, 16, 32, 64])
        self.assertEqual([ilog2(x) for x in (1, 2, 64, 1024)], [0, 1, 6, 10])

    def test_split_range(self):
        self.assertEqual(split_range(10, 3), [(0, 4), (4, 7), (7, 10)])
        self.assertEqual(split_range(2, 8), [(0, 1), (1, 2)])
        self.assertEqual(split_range(5, 1), [(0, 5)])
        for total in range(1, 30):
            for parts in range(1, 6):
                bounds = split_range(total, parts)
                self.assertEqual(bounds[0][0], 0)
                self.assertEqual(bounds[-1][1], total)
                self.assertTrue(all(a < b for a, b in bounds))
                self.assertTrue(all(bounds[i][1] == bounds[i + 1][0] for i in range(len(bounds) - 1)))

    def test_parallel_chunks_covers_range_once(self):
        seen, lock = [], threading.Lock()

        def work(worker, start, stop):
            with lock:
                seen.extend(range(start, stop))

        for threads in (1, 2, 3, 8):
            seen.clear()
            parallel_chunks(17, threads, work)
            self.assertEqual(sorted(seen), list(range(17)))

    def test_parallel_chunks_propagates_errors(self):
        def work(worker, start, stop):
            if worker == 1:
                raise KeyError("boom")

        with self.assertRaises(KeyError):
            parallel_chunks(10, 2, work)

    def test_parallel_chunks_empty(self):
        parallel_chunks(0, 4, lambda *_: self.fail("no work expected"))

    def test_getenv(self):
        os.environ["FFTCONV_TEST_KNOB"] = "7"
        self.assertEqual(getenv("FFTCONV_TEST_KNOB", 1), 7)
        self.assertEqual(getenv("FFTCONV_TEST_UNSET_KNOB", 3), 3)


class TestDTypes(unittest.TestCase):
    def test_complex_companions(self):
        self.assertEqual(dtypes.complex_of(dtypes.float32), dtypes.complex64)
        self.assertEqual(dtypes.complex_of(dtypes.float64), dtypes.complex128)
        self.assertEqual(dtypes.complex64.itemsize, 8)

    def test_names(self):
        self.assertEqual(dtypes.from_name("f32"), dtypes.float32)
        self.assertEqual(dtypes.from_name("float64"), dtypes.float64)
        self.assertTrue(dtypes.is_float(dtypes.float64))
        self.assertTrue(dtypes.is_complex(dtypes.complex128))
        self.assertFalse(dtypes.is_float(dtypes.complex64))
