"""The three per-layer convolution operations computed in the Fourier domain, transforming every 2-D matrix once.

In each operation every matrix indexed by f meets every matrix indexed by f'. So instead of S * f' * f separate
convolutions, each operation

1. pads both operand sets to m x m (m = next power of 2 >= n, kernels are padded to the image size) and transforms
   every plane once,
2. multiplies the spectra at every stored frequency bin as a small complex matrix product over the map index, e.g.
   Y[bin] (f' x S) = conj(W[bin]) (f' x f) @ X[bin] (f x S) for the forward pass,
3. transforms the result planes back and crops the window the spatial-domain result occupies.

Cross-correlation uses the conjugated spectrum of the correlating operand. With zero padding at the bottom/right and
m >= n no circular wrap reaches the cropped window, so every result sits at offset (0, 0):

    updateOutput       y  = crop_{n'}( F^-1( conj(W) . X ) )     summed over f
    updateGradInput    gx = crop_{n}(  F^-1( W . GY ) )           summed over f'
    accGradParameters  gw = crop_{k}(  F^-1( conj(GY) . X ) )     summed over the batch

Frequency representations are never kept between operations; each operation recomputes the transforms it needs from
spatial data, and all of them live in one workspace arena that is sized by the largest layer and reused by every layer.

"""
from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fftconv.config import LayerConfig
from fftconv.data import RealTensor4, WeightTensor4, crop, pad_to
from fftconv.dtypes import DType, dtypes
from fftconv.errors import CapacityError, ConfigError, ShapeError, SizeError
from fftconv.fft import BLOCK_PLANES, HalfSpectrum, fft_2d_real_batch, ifft_2d_real_batch, plan
from fftconv.helpers import parallel_chunks

logger = logging.getLogger(__name__)

ROLES = ("x", "w", "y")


@dataclass
class OpCounters:
    """Work done by the FFT engine: 2-D transforms (forward and inverse) and complex multiply-adds at frequency bins."""

    transforms: int = 0
    complex_macs: int = 0

    def reset(self):
        self.transforms, self.complex_macs = 0, 0

    def snapshot(self) -> tuple[int, int]:
        return self.transforms, self.complex_macs


def _bins(m: int) -> int:
    return m * (m // 2 + 1)


class ConvWorkspace:
    """Preallocated frequency-domain buffers shared by every layer it was sized for.

    The buffers form one arena of (S*f + f'*f + S*f') * m * (m/2 + 1) complex values for the largest registered layer.
    Each invocation carves its three role views (x: S*f planes, w: f'*f planes, y: S*f' planes, at the layer's own m)
    from the arena, so smaller layers reuse the same memory. Each worker also owns a scratch buffer for transforms.

    A workspace is owned by one operation at a time; parallelism lives inside an operation.

    Attributes:
        configs: The layer configurations the workspace was sized for.
        dtype: Real precision the operations compute in (inputs are cast to it).
        fft_size: Largest transform size m over the configs.
        capacity: Per-role maxima over the configs, in complex values.
        arena: Flat complex buffer holding all frequency representations.
        scratch: One flat complex transform buffer per worker.
        counters: Transforms and complex MACs performed so far.

    """

    def __init__(self, configs: Sequence[LayerConfig], dtype: DType = dtypes.float32, threads: int = 1):
        self.configs = tuple(configs)
        self.dtype = dtype
        self.complex_dtype = dtypes.complex_of(dtype)
        self.threads = max(1, int(threads))
        self.fft_size = max(c.fft_size for c in self.configs)
        self.capacity = {r: max(c.planes[r] * _bins(c.fft_size) for c in self.configs) for r in ROLES}
        arena_size = max(sum(c.planes.values()) * _bins(c.fft_size) for c in self.configs)
        self.arena = np.empty(arena_size, dtype=self.complex_dtype.np)
        m = self.fft_size
        self.scratch = [np.empty(BLOCK_PLANES * m * m, dtype=self.complex_dtype.np) for _ in range(self.threads)]
        self.counters = OpCounters()
        logger.debug("workspace for %d configs: m=%d, %d bytes arena, %d bytes scratch",
                     len(self.configs), m, self.nbytes, self.scratch_nbytes)

    @property
    def nbytes(self) -> int:
        """Bytes allocated for frequency representations."""
        return self.arena.nbytes

    @property
    def scratch_nbytes(self) -> int:
        return sum(s.nbytes for s in self.scratch)

    def role_views(self, config: LayerConfig) -> dict[str, np.ndarray]:
        """Arena views for the x, w and y roles of config, shaped (S, f, m, h), (f', f, m, h) and (S, f', m, h).

        Raises:
            CapacityError: If the layer needs more frequency storage than the arena holds.

        """
        m, bins = config.fft_size, _bins(config.fft_size)
        sizes = {r: config.planes[r] * bins for r in ROLES}
        if sum(sizes.values()) > self.arena.size:
            need = sum(sizes.values())
            raise CapacityError(f"layer {config} needs {need} complex values, the workspace holds {self.arena.size}")
        h = m // 2 + 1
        shapes = {
            "x": (config.S, config.f, m, h),
            "w": (config.f_prime, config.f, m, h),
            "y": (config.S, config.f_prime, m, h),
        }
        views, offset = {}, 0
        for r in ROLES:
            views[r] = self.arena[offset : offset + sizes[r]].reshape(shapes[r])
            offset += sizes[r]
        return views

    def __repr__(self):
        return f"<ConvWorkspace m={self.fft_size} dtype={self.dtype} nbytes={self.nbytes} threads={self.threads}>"


def workspace_for(configs: Sequence[LayerConfig], dtype: DType = dtypes.float32, threads: int = 1) -> ConvWorkspace:
    """Builds the workspace whose memory is determined by the largest of the given layers.

    Raises:
        ConfigError: If configs is empty.

    """
    configs = list(configs)
    if not configs:
        raise ConfigError("a workspace needs at least one layer config")
    return ConvWorkspace(configs, dtype, threads)


# ----------------------------------------------------------------------------------------------------------------------
# per-bin accumulation


def _bin_matmul(lhs: np.ndarray, rhs: np.ndarray, out: np.ndarray, threads: int) -> None:
    """out[p] = lhs[p] @ rhs[p] for every frequency bin p; all three operands are bin-major views (bins, rows, cols).

    Each worker copies its range of bins into contiguous tiles, so the inner products are dense complex GEMMs.

    """

    def work(worker: int, p0: int, p1: int):
        a = np.ascontiguousarray(lhs[p0:p1])
        b = np.ascontiguousarray(rhs[p0:p1])
        out[p0:p1] = np.matmul(a, b)

    parallel_chunks(lhs.shape[0], threads, work)


def _bin_major(spec: np.ndarray, order: tuple[int, int, int]) -> np.ndarray:
    """View of a (A, B, m, h) spectrum as (A, B, bins) with the axes permuted by order."""
    return spec.reshape(spec.shape[0], spec.shape[1], -1).transpose(order)


def _transform(ws: ConvWorkspace, t, out: np.ndarray) -> HalfSpectrum:
    m = out.shape[2]
    return fft_2d_real_batch(plan(m), pad_to(t.cast(ws.dtype), m, m), out=out, scratch=ws.scratch, threads=ws.threads)


def _inverse(ws: ConvWorkspace, spec: np.ndarray) -> RealTensor4:
    return ifft_2d_real_batch(plan(spec.shape[2]), HalfSpectrum(spec), scratch=ws.scratch, threads=ws.threads)


def _count(ws: ConvWorkspace, config: LayerConfig):
    ws.counters.transforms += sum(config.planes.values())
    ws.counters.complex_macs += config.S * config.f_prime * config.f * _bins(config.fft_size)


def _square(t: RealTensor4, what: str) -> int:
    if t.rows != t.cols:
        raise ShapeError(f"{what} feature maps must be square, got {t.rows}x{t.cols}")
    return t.rows


# ----------------------------------------------------------------------------------------------------------------------
# operations


def forward_fft(ws: ConvWorkspace, x: RealTensor4, w: WeightTensor4) -> RealTensor4:
    """updateOutput in the Fourier domain; equals conv_direct.forward_direct(x, w) up to rounding.

    Raises:
        SizeError: If the kernel is larger than the image.
        ShapeError: If w.in_maps does not match x.maps.
        CapacityError: If the workspace is too small for the layer.

    """
    n = _square(x, "input")
    if w.in_maps != x.maps:
        raise ShapeError(f"weights expect {w.in_maps} input maps, input has {x.maps}")
    if w.k > n:
        raise SizeError(f"kernel {w.k}x{w.k} is larger than the {n}x{n} image")
    config = LayerConfig(w.k, n, x.maps, w.out_maps, x.batch)
    views = ws.role_views(config)

    X = _transform(ws, x, views["x"]).data
    W = _transform(ws, w, views["w"]).data
    np.conjugate(W, out=W)
    Y = views["y"]
    _bin_matmul(_bin_major(W, (2, 0, 1)), _bin_major(X, (2, 1, 0)), _bin_major(Y, (2, 1, 0)), ws.threads)
    y = _inverse(ws, Y)

    _count(ws, config)
    logger.debug("forward_fft %s at m=%d", config, config.fft_size)
    return crop(y, 0, 0, config.n_out, config.n_out)


def grad_input_fft(ws: ConvWorkspace, gy: RealTensor4, w: WeightTensor4) -> RealTensor4:
    """updateGradInput in the Fourier domain; equals conv_direct.grad_input_direct(gy, w) up to rounding.

    The full convolution needs no wrap-around room: gy is n' x n' and the result n x n with n <= m.

    Raises:
        ShapeError: If w.out_maps does not match gy.maps.
        CapacityError: If the workspace is too small for the layer.

    """
    no = _square(gy, "output gradient")
    if w.out_maps != gy.maps:
        raise ShapeError(f"weights produce {w.out_maps} output maps, gradient has {gy.maps}")
    n = no + w.k - 1
    config = LayerConfig(w.k, n, w.in_maps, w.out_maps, gy.batch)
    views = ws.role_views(config)

    GY = _transform(ws, gy, views["y"]).data
    W = _transform(ws, w, views["w"]).data
    GX = views["x"]
    _bin_matmul(_bin_major(W, (2, 1, 0)), _bin_major(GY, (2, 1, 0)), _bin_major(GX, (2, 1, 0)), ws.threads)
    gx = _inverse(ws, GX)

    _count(ws, config)
    logger.debug("grad_input_fft %s at m=%d", config, config.fft_size)
    return crop(gx, 0, 0, n, n)


def grad_weight_fft(ws: ConvWorkspace, gy: RealTensor4, x: RealTensor4) -> WeightTensor4:
    """accGradParameters in the Fourier domain; equals conv_direct.grad_weight_direct(gy, x) up to rounding.

    The kernel here is as large as the output map, the case FFTs suit best.

    Raises:
        ShapeError: If the batch sizes differ.
        SizeError: If the output gradient is larger than the input.
        CapacityError: If the workspace is too small for the layer.

    """
    n, no = _square(x, "input"), _square(gy, "output gradient")
    if gy.batch != x.batch:
        raise ShapeError(f"batch sizes differ: gradient {gy.batch}, input {x.batch}")
    if no > n:
        raise SizeError(f"output gradient {no}x{no} is larger than the {n}x{n} input")
    k = n - no + 1
    config = LayerConfig(k, n, x.maps, gy.maps, x.batch)
    views = ws.role_views(config)

    GY = _transform(ws, gy, views["y"]).data
    np.conjugate(GY, out=GY)
    X = _transform(ws, x, views["x"]).data
    GW = views["w"]
    _bin_matmul(_bin_major(GY, (2, 1, 0)), _bin_major(X, (2, 0, 1)), _bin_major(GW, (2, 0, 1)), ws.threads)
    gw = _inverse(ws, GW)

    _count(ws, config)
    logger.debug("grad_weight_fft %s at m=%d", config, config.fft_size)
    return WeightTensor4(crop(gw, 0, 0, k, k).data)
