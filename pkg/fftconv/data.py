"""Defines the dense rank-4 tensor types every other module builds on, and their elementary manipulations.

A RealTensor4 holds a batch of feature maps laid out (batch, maps, rows, cols) in row-major order with the batch
outermost, so each (batch, map) plane is contiguous for the row passes of the FFT. A WeightTensor4 holds kernels laid
out (out_maps, in_maps, k, k). Both wrap a read-only numpy array: operations never mutate their inputs and always
return new tensors, which makes the values safe to share between threads.

The manipulations here (padding, cropping, flipping) are the movement ops of the engine. They preserve the batch and
map dimensions exactly.

"""
from __future__ import annotations
from typing import Tuple, TypeVar

import numpy as np

from fftconv.dtypes import DType, dtypes
from fftconv.errors import ShapeError, SizeError


class Tensor4:
    """A rank-4 real array with immutable value semantics."""

    __slots__ = ("data",)

    def __init__(self, data, dtype: DType | None = None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype.np, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(dtypes.default_float.np)
        if arr.ndim != 4:
            raise ShapeError(f"{type(self).__name__} needs a rank-4 array, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ShapeError(f"all dims of a {type(self).__name__} must be >= 1, got {arr.shape}")
        # a read-only view keeps the caller's array writable while nobody can write through ours
        view = np.ascontiguousarray(arr).view()
        view.flags.writeable = False
        self.data = view
        self._check()

    def _check(self):
        pass

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return self.data.shape

    @property
    def dtype(self) -> DType:
        return dtypes.from_np(self.data.dtype)

    @property
    def rows(self) -> int:
        return self.data.shape[2]

    @property
    def cols(self) -> int:
        return self.data.shape[3]

    @property
    def plane_count(self) -> int:
        return self.data.shape[0] * self.data.shape[1]

    def planes(self) -> np.ndarray:
        """View of the data as a stack of 2-D planes, shape (plane_count, rows, cols)."""
        return self.data.reshape(self.plane_count, self.rows, self.cols)

    def cast(self: T, dtype: DType) -> T:
        return self if self.dtype == dtype else type(self)(self.data, dtype=dtype)

    def numpy(self) -> np.ndarray:
        return self.data

    def checksum(self) -> float:
        """Sum of all elements, accumulated in 64-bit."""
        return float(self.data.sum(dtype=np.float64))

    def __repr__(self) -> str:
        return f"<{type(self).__name__} shape={self.shape} dtype={self.dtype}>"


class RealTensor4(Tensor4):
    """Feature maps or their gradients, dims (batch, maps, rows, cols)."""

    @property
    def batch(self) -> int:
        return self.data.shape[0]

    @property
    def maps(self) -> int:
        return self.data.shape[1]


class WeightTensor4(Tensor4):
    """Kernels or kernel gradients, dims (out_maps, in_maps, k, k). Kernels are square."""

    def _check(self):
        if self.data.shape[2] != self.data.shape[3]:
            raise ShapeError(f"kernels must be square, got {self.data.shape[2]}x{self.data.shape[3]}")

    @property
    def out_maps(self) -> int:
        return self.data.shape[0]

    @property
    def in_maps(self) -> int:
        return self.data.shape[1]

    @property
    def k(self) -> int:
        return self.data.shape[2]


T = TypeVar("T", bound=Tensor4)


# ----------------------------------------------------------------------------------------------------------------------
# movement ops


def pad_to(t: T, rows: int, cols: int) -> T:
    """Zero-extends the spatial dims of t to rows x cols, keeping the data in the top-left corner.

    Raises:
        SizeError: If the target size is smaller than the source in either dimension.

    """
    if rows < t.rows or cols < t.cols:
        raise SizeError(f"cannot pad {t.rows}x{t.cols} down to {rows}x{cols}")
    if (rows, cols) == (t.rows, t.cols):
        return t
    out = np.zeros(t.shape[:2] + (rows, cols), dtype=t.data.dtype)
    out[:, :, : t.rows, : t.cols] = t.data
    return type(t)(out)


def crop(t: T, row0: int, col0: int, rows: int, cols: int) -> T:
    """Cuts the rows x cols window starting at (row0, col0) out of every plane of t.

    Raises:
        SizeError: If the window does not lie inside the tensor.

    """
    if row0 < 0 or col0 < 0 or rows < 1 or cols < 1 or row0 + rows > t.rows or col0 + cols > t.cols:
        raise SizeError(f"crop window ({row0},{col0}) {rows}x{cols} is outside a {t.rows}x{t.cols} tensor")
    return type(t)(t.data[:, :, row0 : row0 + rows, col0 : col0 + cols].copy())


def flip_spatial(w: WeightTensor4) -> WeightTensor4:
    """Rotates every kernel by 180 degrees: out[o, i, u, v] = w[o, i, k-1-u, k-1-v]."""
    return WeightTensor4(w.data[:, :, ::-1, ::-1].copy())


# ----------------------------------------------------------------------------------------------------------------------
# creation


def rng_for(seed: int, role: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, role, index), so every tensor draws an independent, reproducible stream.

    index tells apart tensors of the same role, e.g. the weights of different layers.

    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, role, index])))


def uniform(
    shape: Tuple[int, ...], seed: int, role: int, dtype: DType = dtypes.float32, index: int = 0
) -> np.ndarray:
    """Draws values uniform in [-1, 1) for the tensor playing `role`. Draws happen in 64-bit, then get cast."""
    return rng_for(seed, role, index).uniform(-1.0, 1.0, size=shape).astype(dtype.np)


def uniform_tensor(
    kind: type[T], shape: Tuple[int, int, int, int], seed: int, role: int, dtype: DType = dtypes.float32, index: int = 0
) -> T:
    return kind(uniform(shape, seed, role, dtype, index))
