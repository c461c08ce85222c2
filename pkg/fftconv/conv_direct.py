"""Spatial-domain reference implementations of the three per-layer convolution operations.

These are the correctness oracle for the FFT path and the "direct method" baseline in benchmarks. The convention is
valid cross-correlation for the forward pass,

    y[b, o, i, j] = sum_f sum_{u,v} x[b, f, i+u, j+v] * w[o, f, u, v],

which makes the gradient w.r.t. the input a full convolution with the same kernels (the transposed, 180-degree flipped
kernel) and the gradient w.r.t. the weights a valid cross-correlation of the input by the output gradient. The three
operations are exact adjoints of each other.

Every operation accumulates kernel tap by kernel tap: for each (u, v) the shifted input window is multiplied by the
(f' x f) tap matrix and summed over the maps. That is S * f' * f * n'^2 * k^2 multiply-adds, the cost of the direct
method, with no transform of the problem (no im2col, no Winograd).

"""
from __future__ import annotations
import logging

import numpy as np

from fftconv.data import RealTensor4, WeightTensor4
from fftconv.errors import ShapeError, SizeError
from fftconv.helpers import parallel_chunks

logger = logging.getLogger(__name__)


def _square(t: RealTensor4, what: str) -> int:
    if t.rows != t.cols:
        raise ShapeError(f"{what} feature maps must be square, got {t.rows}x{t.cols}")
    return t.rows


def forward_direct(x: RealTensor4, w: WeightTensor4, threads: int = 1) -> RealTensor4:
    """updateOutput: valid cross-correlation of x [S, f, n, n] with w [f', f, k, k], summed over the input maps.

    Returns:
        RealTensor4: y of shape [S, f', n', n'] with n' = n - k + 1.

    Raises:
        SizeError: If the kernel is larger than the image.
        ShapeError: If w.in_maps does not match x.maps.

    """
    n = _square(x, "input")
    if w.in_maps != x.maps:
        raise ShapeError(f"weights expect {w.in_maps} input maps, input has {x.maps}")
    k = w.k
    if k > n:
        raise SizeError(f"kernel {k}x{k} is larger than the {n}x{n} image")
    S, no, fo = x.batch, n - k + 1, w.out_maps
    xd, wd = x.data, w.data
    y = np.zeros((S, fo, no, no), dtype=np.result_type(xd, wd))

    def work(worker: int, o0: int, o1: int):
        acc = y[:, o0:o1]
        for u in range(k):
            for v in range(k):
                window = xd[:, :, u : u + no, v : v + no]
                acc += np.tensordot(window, wd[o0:o1, :, u, v], axes=([1], [1])).transpose(0, 3, 1, 2)

    parallel_chunks(fo, threads, work)
    logger.debug("forward_direct %s * %s -> %s", x.shape, w.shape, y.shape)
    return RealTensor4(y)


def grad_input_direct(gy: RealTensor4, w: WeightTensor4, threads: int = 1) -> RealTensor4:
    """updateGradInput: full convolution of gy [S, f', n', n'] with w [f', f, k, k], summed over the output maps.

    gx[b, f, p, q] = sum_{f'} sum_{u,v} gy[b, f', p-u, q-v] * w[f', f, u, v], out-of-range gy entries being zero.

    Returns:
        RealTensor4: gx of shape [S, f, n, n] with n = n' + k - 1.

    Raises:
        ShapeError: If w.out_maps does not match gy.maps.

    """
    no = _square(gy, "output gradient")
    if w.out_maps != gy.maps:
        raise ShapeError(f"weights produce {w.out_maps} output maps, gradient has {gy.maps}")
    k = w.k
    S, n, fi = gy.batch, no + k - 1, w.in_maps
    gd, wd = gy.data, w.data
    gx = np.zeros((S, fi, n, n), dtype=np.result_type(gd, wd))

    def work(worker: int, i0: int, i1: int):
        for u in range(k):
            for v in range(k):
                contrib = np.tensordot(gd, wd[:, i0:i1, u, v], axes=([1], [0])).transpose(0, 3, 1, 2)
                gx[:, i0:i1, u : u + no, v : v + no] += contrib

    parallel_chunks(fi, threads, work)
    logger.debug("grad_input_direct %s * %s -> %s", gy.shape, w.shape, gx.shape)
    return RealTensor4(gx)


def grad_weight_direct(gy: RealTensor4, x: RealTensor4, threads: int = 1) -> WeightTensor4:
    """accGradParameters: valid cross-correlation of x [S, f, n, n] by gy [S, f', n', n'], accumulated over the batch.

    gw[f', f, u, v] = sum_b sum_{i,j} gy[b, f', i, j] * x[b, f, i+u, j+v]

    Returns:
        WeightTensor4: gw of shape [f', f, k, k] with k = n - n' + 1.

    Raises:
        ShapeError: If the batch sizes differ.
        SizeError: If the output gradient is larger than the input.

    """
    n, no = _square(x, "input"), _square(gy, "output gradient")
    if gy.batch != x.batch:
        raise ShapeError(f"batch sizes differ: gradient {gy.batch}, input {x.batch}")
    if no > n:
        raise SizeError(f"output gradient {no}x{no} is larger than the {n}x{n} input")
    k, fo, fi = n - no + 1, gy.maps, x.maps
    gd, xd = gy.data, x.data
    gw = np.zeros((fo, fi, k, k), dtype=np.result_type(gd, xd))

    def work(worker: int, o0: int, o1: int):
        g = gd[:, o0:o1]
        for u in range(k):
            for v in range(k):
                window = xd[:, :, u : u + no, v : v + no]
                gw[o0:o1, :, u, v] = np.tensordot(g, window, axes=([0, 2, 3], [0, 2, 3]))

    parallel_chunks(fo, threads, work)
    logger.debug("grad_weight_direct %s * %s -> %s", gy.shape, x.shape, gw.shape)
    return WeightTensor4(gw)
