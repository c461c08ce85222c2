"""The non-convolution stages of a network: max pooling, rectified linear units and the fully connected layer.

Each stage comes as a forward function and a backward function that maps the gradient w.r.t. the stage output to the
gradient w.r.t. its input (and parameters, for the fully connected layer).

"""
from __future__ import annotations
from typing import Tuple

import numpy as np

from fftconv.data import RealTensor4
from fftconv.errors import ShapeError, SizeError
from fftconv.helpers import make_pair

# Pooling window; the stride equals the window
POOL = make_pair(2)


# ----------------------------------------------------------------------------------------------------------------------
# max pooling


def maxpool_forward(x: RealTensor4) -> Tuple[RealTensor4, np.ndarray]:
    """2x2 max pooling with stride 2.

    Returns:
        (pooled, argmax): argmax holds, per output pixel, the row-major index 0..3 of the winning element in its window,
            so divmod(argmax, 2) is its (row, col) offset. Ties go to the first maximal element.

    Raises:
        SizeError: If rows or cols are odd.

    """
    ph, pw = POOL
    if x.rows % ph or x.cols % pw:
        raise SizeError(f"max pooling needs even dims, got {x.rows}x{x.cols}")
    S, f, h, w = x.batch, x.maps, x.rows // ph, x.cols // pw
    windows = x.data.reshape(S, f, h, ph, w, pw).transpose(0, 1, 2, 4, 3, 5).reshape(S, f, h, w, ph * pw)
    argmax = windows.argmax(axis=-1)
    pooled = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
    return RealTensor4(pooled), argmax


def maxpool_backward(gy: RealTensor4, argmax: np.ndarray) -> RealTensor4:
    """Routes each output gradient to the input element that won its window; all other inputs get zero."""
    if argmax.shape != gy.shape:
        raise ShapeError(f"gradient {gy.shape} does not match pooling indices {argmax.shape}")
    ph, pw = POOL
    S, f, h, w = gy.shape
    windows = np.zeros((S, f, h, w, ph * pw), dtype=gy.data.dtype)
    np.put_along_axis(windows, argmax[..., None], gy.data[..., None], axis=-1)
    gx = windows.reshape(S, f, h, w, ph, pw).transpose(0, 1, 2, 4, 3, 5).reshape(S, f, h * ph, w * pw)
    return RealTensor4(gx)


# ----------------------------------------------------------------------------------------------------------------------
# rectified linear units


def relu_forward(x: RealTensor4) -> RealTensor4:
    return RealTensor4(np.maximum(x.data, 0))


def relu_backward(gy: RealTensor4, x: RealTensor4) -> RealTensor4:
    """gy where the forward input was positive, zero elsewhere."""
    if gy.shape != x.shape:
        raise ShapeError(f"gradient {gy.shape} does not match relu input {x.shape}")
    return RealTensor4(np.where(x.data > 0, gy.data, 0).astype(gy.data.dtype, copy=False))


# ----------------------------------------------------------------------------------------------------------------------
# fully connected layer


def _flat(x: RealTensor4) -> np.ndarray:
    return x.data.reshape(x.batch, -1)


def fc_forward(x: RealTensor4, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """scores[b] = weight @ flatten(x[b]) + bias, shape (batch, outputs).

    Raises:
        ShapeError: If weight is not (outputs, maps*rows*cols) or bias not (outputs,).

    """
    flat = _flat(x)
    if weight.ndim != 2 or weight.shape[1] != flat.shape[1]:
        raise ShapeError(f"fc weight {weight.shape} does not fit {flat.shape[1]} flattened inputs")
    if bias.shape != (weight.shape[0],):
        raise ShapeError(f"fc bias {bias.shape} does not fit {weight.shape[0]} outputs")
    return flat @ weight.T + bias


def _check_scores(gscores: np.ndarray, x: RealTensor4, outputs: int | None = None):
    if gscores.ndim != 2 or gscores.shape[0] != x.batch or outputs not in (None, gscores.shape[1]):
        raise ShapeError(f"score gradient {gscores.shape} does not fit batch {x.batch} and {outputs} outputs")


def fc_grad_input(gscores: np.ndarray, x: RealTensor4, weight: np.ndarray) -> RealTensor4:
    _check_scores(gscores, x, weight.shape[0])
    return RealTensor4((gscores @ weight).reshape(x.shape))


def fc_grad_params(gscores: np.ndarray, x: RealTensor4) -> Tuple[np.ndarray, np.ndarray]:
    """Gradients w.r.t. the weight (outputs, inputs) and the bias (outputs,)."""
    _check_scores(gscores, x)
    return gscores.T @ _flat(x), gscores.sum(axis=0)


def fc_backward(
    gscores: np.ndarray, x: RealTensor4, weight: np.ndarray
) -> Tuple[RealTensor4, np.ndarray, np.ndarray]:
    """Gradients of the fully connected layer w.r.t. its input, weight and bias."""
    return (fc_grad_input(gscores, x, weight),) + fc_grad_params(gscores, x)
