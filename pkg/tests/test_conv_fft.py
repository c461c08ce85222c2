import numpy as np
import unittest

from fftconv.config import LayerConfig, reference_configs
from fftconv.conv_direct import forward_direct, grad_input_direct, grad_weight_direct
from fftconv.conv_fft import forward_fft, grad_input_fft, grad_weight_fft, workspace_for
from fftconv.cost_model import packed_memory_bytes
from fftconv.data import RealTensor4, WeightTensor4, uniform_tensor
from fftconv.dtypes import dtypes
from fftconv.errors import CapacityError, ConfigError, ShapeError, SizeError
from fftconv.ops import Roles


def layer_inputs(c: LayerConfig, seed=0, dtype=dtypes.float64):
    x = uniform_tensor(RealTensor4, (c.S, c.f, c.n, c.n), seed, Roles.X, dtype)
    w = uniform_tensor(WeightTensor4, (c.f_prime, c.f, c.k, c.k), seed, Roles.W, dtype)
    gy = uniform_tensor(RealTensor4, (c.S, c.f_prime, c.n_out, c.n_out), seed, Roles.GY, dtype)
    return x, w, gy


def rel_err(a, b):
    return np.max(np.abs(a.data.astype(np.float64) - b.data)) / np.max(np.abs(b.data))


class TestFftMatchesDirect(unittest.TestCase):
    def check(self, c: LayerConfig, dtype, tolerances, seed=0, threads=1):
        x, w, gy = layer_inputs(c, seed, dtype)
        ws = workspace_for([c], dtype, threads)
        tol_out, tol_in, tol_w = tolerances
        self.assertLess(rel_err(forward_fft(ws, x, w), forward_direct(x, w)), tol_out, c)
        self.assertLess(rel_err(grad_input_fft(ws, gy, w), grad_input_direct(gy, w)), tol_in, c)
        self.assertLess(rel_err(grad_weight_fft(ws, gy, x), grad_weight_direct(gy, x)), tol_w, c)

    def test_64bit(self):
        for k, n, f, fp, S in [(3, 8, 2, 3, 2), (1, 5, 1, 1, 1), (5, 13, 3, 2, 2), (11, 32, 2, 3, 1), (7, 7, 2, 2, 3)]:
            self.check(LayerConfig(k, n, f, fp, S), dtypes.float64, (1e-10,) * 3)

    def test_32bit(self):
        for k, n, f, fp, S in [(3, 16, 4, 8, 2), (9, 24, 3, 5, 4), (2, 31, 8, 8, 1)]:
            self.check(LayerConfig(k, n, f, fp, S), dtypes.float32, (1e-4, 1e-4, 1e-3))

    def test_random_configs(self):
        rng = np.random.default_rng(11)
        for i in range(30):
            n = int(rng.integers(1, 33))
            k = int(rng.integers(1, min(n, 11) + 1))
            f, fp = (int(v) for v in rng.integers(1, 9, size=2))
            S = int(rng.integers(1, 5))
            self.check(LayerConfig(k, n, f, fp, S), dtypes.float64, (1e-10,) * 3, seed=i)

    def test_threads(self):
        self.check(LayerConfig(5, 20, 6, 5, 3), dtypes.float64, (1e-10,) * 3, threads=4)

    def test_kernel_as_large_as_output(self):
        # accGradParameters of a layer with n' = k
        c = LayerConfig(9, 17, 2, 3, 2)
        self.assertEqual(c.n_out, c.k)
        self.check(c, dtypes.float64, (1e-10,) * 3)


class TestWorkspace(unittest.TestCase):
    def test_empty(self):
        with self.assertRaises(ConfigError):
            workspace_for([])

    def test_sized_by_largest_layer(self):
        configs = [LayerConfig(3, 16, 2, 4, 2), LayerConfig(5, 32, 4, 4, 2), LayerConfig(3, 8, 4, 8, 2)]
        ws = workspace_for(configs)
        self.assertEqual(ws.fft_size, 32)
        self.assertEqual(ws.nbytes, max(packed_memory_bytes(c) for c in configs))
        self.assertEqual(ws.capacity["w"], max(c.f_prime * c.f * c.fft_size * (c.fft_size // 2 + 1) for c in configs))
        self.assertEqual(ws.arena.dtype, np.complex64)
        self.assertEqual(workspace_for(configs, dtypes.float64).nbytes, 2 * ws.nbytes)

    def test_reference_layers_dominated_by_second(self):
        sizes = [packed_memory_bytes(c) for c in reference_configs(128)]
        self.assertEqual(int(np.argmax(sizes)), 1)

    def test_capacity(self):
        ws = workspace_for([LayerConfig(3, 8, 2, 2, 1)])
        x, w, _ = layer_inputs(LayerConfig(3, 16, 2, 2, 1))
        with self.assertRaises(CapacityError):
            forward_fft(ws, x, w)

    def test_reuse_across_layers(self):
        big, small = LayerConfig(5, 16, 4, 6, 2), LayerConfig(3, 6, 2, 3, 1)
        ws = workspace_for([big, small], dtypes.float64)
        xb, wb, gb = layer_inputs(big, 1)
        xs, w_small, gs = layer_inputs(small, 2)
        for _ in range(2):
            forward_fft(ws, xb, wb)
            grad_weight_fft(ws, gb, xb)
            y = forward_direct(xs, w_small).data
            np.testing.assert_allclose(forward_fft(ws, xs, w_small).data, y, atol=1e-12)
            gx = grad_input_direct(gs, w_small).data
            np.testing.assert_allclose(grad_input_fft(ws, gs, w_small).data, gx, atol=1e-12)

    def test_casts_to_workspace_precision(self):
        c = LayerConfig(3, 8, 2, 2, 1)
        x, w, _ = layer_inputs(c, dtype=dtypes.float64)
        self.assertEqual(forward_fft(workspace_for([c], dtypes.float32), x, w).dtype, dtypes.float32)


class TestOpCounters(unittest.TestCase):
    def test_counts(self):
        c = LayerConfig(3, 12, 2, 5, 3)
        ws = workspace_for([c])
        x, w, gy = layer_inputs(c, dtype=dtypes.float32)
        bins = 16 * 9
        forward_fft(ws, x, w)
        self.assertEqual(ws.counters.snapshot(), (3 * 2 + 5 * 2 + 3 * 5, 3 * 5 * 2 * bins))
        grad_input_fft(ws, gy, w)
        grad_weight_fft(ws, gy, x)
        self.assertEqual(ws.counters.snapshot(), (3 * 31, 3 * 3 * 5 * 2 * bins))
        ws.counters.reset()
        self.assertEqual(ws.counters.snapshot(), (0, 0))

    def test_independent_of_kernel_size(self):
        snapshots = []
        for k in (3, 5, 7, 11):
            c = LayerConfig(k, 16, 3, 4, 2)
            ws = workspace_for([c])
            x, w, gy = layer_inputs(c, dtype=dtypes.float32)
            forward_fft(ws, x, w)
            grad_input_fft(ws, gy, w)
            grad_weight_fft(ws, gy, x)
            snapshots.append(ws.counters.snapshot())
        self.assertEqual(len(set(snapshots)), 1)


class TestErrors(unittest.TestCase):
    def test_invalid_operands(self):
        c = LayerConfig(3, 8, 2, 4, 2)
        ws = workspace_for([c])
        x, w, gy = layer_inputs(c)
        with self.assertRaises(SizeError):
            forward_fft(ws, x, WeightTensor4(np.zeros((4, 2, 9, 9))))
        with self.assertRaises(ShapeError):
            forward_fft(ws, x, WeightTensor4(np.zeros((4, 3, 3, 3))))
        with self.assertRaises(ShapeError):
            grad_input_fft(ws, gy, WeightTensor4(np.zeros((2, 2, 3, 3))))
        with self.assertRaises(ShapeError):
            grad_weight_fft(ws, RealTensor4(np.zeros((1, 4, 6, 6))), x)
        with self.assertRaises(SizeError):
            grad_weight_fft(ws, RealTensor4(np.zeros((2, 4, 9, 9))), x)
