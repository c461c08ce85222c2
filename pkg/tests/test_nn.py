import numpy as np
import torch
import unittest

from fftconv.data import RealTensor4
from fftconv.errors import ShapeError, SizeError
from fftconv.nn import (
    fc_backward,
    fc_forward,
    fc_grad_input,
    fc_grad_params,
    maxpool_backward,
    maxpool_forward,
    relu_backward,
    relu_forward,
)
from tests.gradcheck import gradcheck


class TestMaxPool(unittest.TestCase):
    def test_window(self):
        x = RealTensor4(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2))
        y, argmax = maxpool_forward(x)
        self.assertEqual(y.shape, (1, 1, 1, 1))
        self.assertEqual(y.data.item(), 4.0)
        self.assertEqual(argmax.item(), 3)
        gx = maxpool_backward(RealTensor4(np.full((1, 1, 1, 1), 7.0)), argmax)
        np.testing.assert_array_equal(gx.data.reshape(2, 2), [[0, 0], [0, 7]])

    def test_ties_go_to_first(self):
        _, argmax = maxpool_forward(RealTensor4(np.array([[5.0, 5.0], [1.0, 1.0]]).reshape(1, 1, 2, 2)))
        self.assertEqual(argmax.item(), 0)

    def test_odd(self):
        with self.assertRaises(SizeError):
            maxpool_forward(RealTensor4(np.zeros((1, 1, 5, 4))))

    def test_backward_shape(self):
        _, argmax = maxpool_forward(RealTensor4(np.zeros((1, 1, 4, 4))))
        with self.assertRaises(ShapeError):
            maxpool_backward(RealTensor4(np.zeros((1, 1, 3, 3))), argmax)

    def test_torch(self):
        x = np.random.default_rng(0).standard_normal((2, 3, 6, 8))
        gy = np.random.default_rng(1).standard_normal((2, 3, 3, 4))
        y, argmax = maxpool_forward(RealTensor4(x))
        gx = maxpool_backward(RealTensor4(gy), argmax)

        x_tor = torch.tensor(x, requires_grad=True)
        y_tor = torch.nn.functional.max_pool2d(x_tor, 2)
        y_tor.backward(torch.tensor(gy))
        np.testing.assert_allclose(y.data, y_tor.detach().numpy())
        np.testing.assert_allclose(gx.data, x_tor.grad.numpy())
        # every output gradient lands on exactly one input
        self.assertAlmostEqual(gx.data.sum(), gy.sum())


class TestRelu(unittest.TestCase):
    def test_relu(self):
        x = RealTensor4(np.array([-1.0, 0.0, 2.0, -3.0]).reshape(1, 1, 2, 2))
        np.testing.assert_array_equal(relu_forward(x).data.ravel(), [0, 0, 2, 0])
        gx = relu_backward(RealTensor4(np.full((1, 1, 2, 2), 3.0)), x)
        np.testing.assert_array_equal(gx.data.ravel(), [0, 0, 3, 0])
        with self.assertRaises(ShapeError):
            relu_backward(RealTensor4(np.ones((1, 1, 1, 1))), x)


class TestFullyConnected(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(3)
        self.x = RealTensor4(rng.standard_normal((3, 2, 4, 4)))
        self.weight = rng.standard_normal((5, 32))
        self.bias = rng.standard_normal(5)
        self.gscores = rng.standard_normal((3, 5))

    def test_forward(self):
        scores = fc_forward(self.x, self.weight, self.bias)
        self.assertEqual(scores.shape, (3, 5))
        np.testing.assert_allclose(scores[1], self.weight @ self.x.data[1].ravel() + self.bias)

    def test_gradients(self):
        g = self.gscores
        gx, gw, gb = fc_backward(g, self.x, self.weight)

        def loss_w(weight):
            return float(np.sum(g * fc_forward(self.x, weight, self.bias)))

        def loss_b(bias):
            return float(np.sum(g * fc_forward(self.x, self.weight, bias)))

        def loss_x(x):
            return float(np.sum(g * fc_forward(RealTensor4(x), self.weight, self.bias)))

        self.assertTrue(gradcheck(loss_w, self.weight, gw))
        self.assertTrue(gradcheck(loss_b, self.bias, gb))
        self.assertTrue(gradcheck(loss_x, np.array(self.x.data), gx.data))
        np.testing.assert_allclose(fc_grad_input(g, self.x, self.weight).data, gx.data)
        np.testing.assert_allclose(fc_grad_params(g, self.x)[1], g.sum(axis=0))

    def test_shapes(self):
        with self.assertRaises(ShapeError):
            fc_forward(self.x, self.weight[:, :31], self.bias)
        with self.assertRaises(ShapeError):
            fc_forward(self.x, self.weight, self.bias[:4])
        with self.assertRaises(ShapeError):
            fc_grad_input(self.gscores[:2], self.x, self.weight)
        with self.assertRaises(ShapeError):
            fc_grad_input(self.gscores[:, :4], self.x, self.weight)
