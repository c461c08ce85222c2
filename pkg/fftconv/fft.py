"""Batched radix-2 Cooley-Tukey FFTs driven by immutable, precomputed plans.

The transforms are iterative decimation-in-time: the input is permuted into bit-reversed order once, then log2(m)
butterfly stages run in place over a scratch buffer. A stage pairs elements half = 2^s apart inside groups of 2*half
and multiplies the lower element by the stage twiddle exp(-2*pi*i*j / 2^(s+1)). Every stage is vectorized over all
transforms in the batch at once, which is what the leading axes of the buffers are for.

2-D transforms of real m x m planes are decomposed into a pass of 1-D FFTs over the rows followed by a pass over the
columns. Since the input is real, only the columns 0..m/2 of the row spectra are kept (Hermitian symmetry supplies the
others), so the column pass and the stored result are m x (m/2 + 1) complex values per plane.

Conventions: the forward transform is unnormalized, the inverse carries the 1/m (1-D) or 1/m^2 (2-D) factor, so round
trips are the identity and a pointwise product of spectra is a circular convolution without extra scaling.

Sizes must be powers of 2. Anything else is rejected with a PlanError; padding is the caller's job.

"""
from __future__ import annotations
import functools
import logging
from dataclasses import dataclass

import numpy as np

from fftconv.data import RealTensor4
from fftconv.dtypes import DType, dtypes
from fftconv.errors import PlanError, ShapeError, SizeError
from fftconv.helpers import ilog2, is_pow2, parallel_chunks, prod

logger = logging.getLogger(__name__)

# Planes a worker transforms per step; bounds the scratch memory of a worker to BLOCK_PLANES * m * m complex values
BLOCK_PLANES = 16


@dataclass(frozen=True, eq=False)
class FftPlan:
    """Precomputed twiddle factors and bit-reversal permutation for transforms of a fixed power-of-2 size.

    Attributes:
        size: Transform length m.
        twiddles: One array per butterfly stage s, holding exp(-2*pi*i*j / 2^(s+1)) for j < 2^s (forward direction;
            inverse transforms use the conjugates).
        bit_reversal: Permutation of range(m) mapping each index to its bit-reversed counterpart. Self-inverse.

    """

    size: int
    twiddles: tuple[np.ndarray, ...]
    bit_reversal: np.ndarray

    @property
    def stages(self) -> int:
        return len(self.twiddles)

    @property
    def packed_cols(self) -> int:
        return self.size // 2 + 1

    def __repr__(self):
        return f"<FftPlan size={self.size} stages={self.stages}>"


def _bit_reversal(size: int) -> np.ndarray:
    bits = ilog2(size)
    idx = np.arange(size)
    rev = np.zeros_like(idx)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@functools.lru_cache(maxsize=None)
def plan(size: int) -> FftPlan:
    """Builds (or returns the cached) plan for transforms of length `size`.

    Raises:
        PlanError: If size is not a power of 2.

    """
    if not isinstance(size, (int, np.integer)) or not is_pow2(int(size)):
        raise PlanError(f"FFT size must be a power of 2, got {size}; pad the input first")
    size = int(size)
    twiddles = []
    for s in range(ilog2(size)):
        half = 1 << s
        tw = np.exp(-2j * np.pi * np.arange(half) / (2 * half))
        tw.flags.writeable = False
        twiddles.append(tw)
    rev = _bit_reversal(size)
    rev.flags.writeable = False
    logger.debug("planned FFT of size %d with %d stages", size, len(twiddles))
    return FftPlan(size, tuple(twiddles), rev)


@functools.lru_cache(maxsize=None)
def _stage_twiddles(size: int, complex_np: type, inverse: bool) -> tuple[np.ndarray, ...]:
    """Stage twiddles of plan(size) cast to the working precision, conjugated for the inverse direction."""
    return tuple((np.conj(tw) if inverse else tw).astype(complex_np) for tw in plan(size).twiddles)


@functools.lru_cache(maxsize=None)
def _mirror_index(size: int) -> tuple[np.ndarray, np.ndarray]:
    """For a row spectrum stored as columns 0..m/2, where to read bin bit_reversal[j] from and whether to conjugate.

    Bins v > m/2 are the conjugates of bins m - v.

    """
    rev = plan(size).bit_reversal
    half = size // 2
    conj = rev > half
    src = np.where(conj, size - rev, rev)
    return src, conj


def _butterflies(buf: np.ndarray, p: FftPlan, axis: int, inverse: bool) -> None:
    """Runs all butterfly stages in place along `axis` (-1 or -2) of a C-contiguous buffer in bit-reversed order."""
    assert buf.flags.c_contiguous, "butterflies run on contiguous buffers only"
    m = p.size
    ax = buf.ndim + axis
    lead, trail = buf.shape[:ax], buf.shape[ax + 1 :]
    assert buf.shape[ax] == m, f"axis {axis} has length {buf.shape[ax]}, plan expects {m}"
    pre = (slice(None),) * (len(lead) + 1)
    up, lo = pre + (0,), pre + (1,)
    for s, tw in enumerate(_stage_twiddles(m, buf.dtype.type, inverse)):
        half = 1 << s
        blocks = buf.reshape(lead + (m // (2 * half), 2, half) + trail)
        t = blocks[lo] * tw.reshape((half,) + (1,) * len(trail))
        blocks[lo] = blocks[up] - t
        blocks[up] += t


def _complex_np(dtype: np.dtype) -> type:
    return np.complex64 if dtype in (np.float32, np.complex64) else np.complex128


# ----------------------------------------------------------------------------------------------------------------------
# 1-D transforms


def fft_1d(p: FftPlan, signal) -> np.ndarray:
    """Forward DFT X[u] = sum_t signal[t] * exp(-2*pi*i*u*t/m) along the last axis (leading axes are a batch).

    Raises:
        SizeError: If the last axis does not have length p.size.

    """
    arr = np.asarray(signal)
    if arr.ndim == 0 or arr.shape[-1] != p.size:
        raise SizeError(f"signal length {arr.shape[-1] if arr.ndim else 0} does not match plan size {p.size}")
    out = np.ascontiguousarray(arr[..., p.bit_reversal], dtype=_complex_np(arr.dtype))
    _butterflies(out, p, -1, inverse=False)
    return out


def ifft_1d(p: FftPlan, spectrum) -> np.ndarray:
    """Inverse DFT including the 1/m factor, so ifft_1d(p, fft_1d(p, x)) == x."""
    arr = np.asarray(spectrum)
    if arr.ndim == 0 or arr.shape[-1] != p.size:
        raise SizeError(f"spectrum length {arr.shape[-1] if arr.ndim else 0} does not match plan size {p.size}")
    out = np.ascontiguousarray(arr[..., p.bit_reversal], dtype=_complex_np(arr.dtype))
    _butterflies(out, p, -1, inverse=True)
    out /= p.size
    return out


# ----------------------------------------------------------------------------------------------------------------------
# Hermitian-packed 2-D spectra


class HalfSpectrum:
    """Frequency representation of a batch of real m x m planes, dims (batch, maps, m, m/2 + 1).

    Only the columns 0..m/2 of each 2-D spectrum are stored; the rest follows from Hermitian symmetry,
    full[u, v] = conj(full[(m-u) % m, (m-v) % m]). The wrapped array is not copied, so a HalfSpectrum may be a view
    into a workspace buffer.

    """

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        if data.ndim != 4 or not np.iscomplexobj(data):
            raise ShapeError(f"a HalfSpectrum wraps a rank-4 complex array, got {data.dtype} {data.shape}")
        if data.shape[3] != data.shape[2] // 2 + 1:
            raise ShapeError(f"{data.shape[2]} rows need {data.shape[2] // 2 + 1} packed columns, got {data.shape[3]}")
        self.data = data

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[2]

    @property
    def packed_cols(self) -> int:
        return self.data.shape[3]

    @property
    def dtype(self) -> DType:
        return dtypes.from_np(self.data.dtype)

    def unpack(self) -> np.ndarray:
        """The full m x m spectra, shape (batch, maps, m, m)."""
        m, h = self.rows, self.packed_cols
        full = np.empty(self.shape[:2] + (m, m), dtype=self.data.dtype)
        full[..., :h] = self.data
        if h < m:
            mirrored = self.data[..., (-np.arange(m)) % m, :][..., m - np.arange(h, m)]
            full[..., h:] = np.conj(mirrored)
        return full

    @staticmethod
    def pack(full: np.ndarray) -> HalfSpectrum:
        """Keeps the non-redundant columns 0..m/2 of full (batch, maps, m, m) spectra."""
        return HalfSpectrum(np.ascontiguousarray(full[..., : full.shape[-1] // 2 + 1]))

    def __repr__(self):
        return f"<HalfSpectrum shape={self.shape} dtype={self.dtype}>"


def _enforce_hermitian(packed: np.ndarray) -> None:
    """Makes the self-conjugate stored columns (0 and m/2) exactly Hermitian along the row axis."""
    m = packed.shape[-2]
    for c in sorted({0, m // 2} if m > 1 else {0}):
        col = packed[..., c]
        if m > 2:
            col[..., m // 2 + 1 :] = np.conj(col[..., 1 : m // 2][..., ::-1])
        col.imag[..., 0] = 0
        if m > 1:
            col.imag[..., m // 2] = 0


def _scratch_view(scratch: np.ndarray | None, nb: int, shape: tuple[int, ...], complex_np: type) -> np.ndarray:
    need = nb * prod(shape)
    if scratch is None or scratch.dtype != complex_np or scratch.size < need:
        return np.empty((nb,) + shape, dtype=complex_np)
    return scratch[:need].reshape((nb,) + shape)


def fft_2d_real_batch(
    p: FftPlan,
    t: RealTensor4,
    out: np.ndarray | None = None,
    scratch: list[np.ndarray] | None = None,
    threads: int = 1,
) -> HalfSpectrum:
    """Hermitian-packed forward 2-D DFT of every (batch, map) plane of t, which must already be padded to m x m.

    Args:
        p: Plan of size m.
        t: Real planes of size m x m.
        out: Optional C-contiguous complex buffer of at least plane_count * m * (m/2 + 1) elements to write into.
        scratch: Optional per-worker flat complex buffers of at least BLOCK_PLANES * m * m elements.
        threads: Number of workers; planes are split into contiguous ranges, one per worker.

    Raises:
        SizeError: If t is not m x m.

    """
    m = p.size
    if t.rows != m or t.cols != m:
        raise SizeError(f"expected planes padded to {m}x{m}, got {t.rows}x{t.cols}")
    h = p.packed_cols
    cnp = _complex_np(t.data.dtype)
    planes = t.planes()
    count = planes.shape[0]
    out = _output_buffer(out, (count, m, h), cnp)

    def work(worker: int, start: int, stop: int):
        buf = scratch[worker] if scratch else None
        for b0 in range(start, stop, BLOCK_PLANES):
            b1 = min(b0 + BLOCK_PLANES, stop)
            rows = _scratch_view(buf, b1 - b0, (m, m), cnp)
            rows[...] = planes[b0:b1][..., p.bit_reversal]
            _butterflies(rows, p, -1, inverse=False)
            dst = out[b0:b1]
            dst[...] = rows[:, p.bit_reversal, :h]
            _butterflies(dst, p, -2, inverse=False)
            _enforce_hermitian(dst)

    parallel_chunks(count, threads, work)
    return HalfSpectrum(out.reshape(t.shape[:2] + (m, h)))


def ifft_2d_real_batch(
    p: FftPlan,
    s: HalfSpectrum,
    out: np.ndarray | None = None,
    scratch: list[np.ndarray] | None = None,
    threads: int = 1,
) -> RealTensor4:
    """Inverse of fft_2d_real_batch: real m x m planes from Hermitian-packed spectra, including the 1/m^2 factor.

    Raises:
        SizeError: If the spectrum rows do not match the plan size.

    """
    m = p.size
    if s.rows != m:
        raise SizeError(f"spectrum has {s.rows} rows, plan expects {m}")
    h = p.packed_cols
    cnp = s.data.dtype.type
    rnp = np.float32 if cnp == np.complex64 else np.float64
    spec = s.data.reshape(-1, m, h)
    count = spec.shape[0]
    out = _output_buffer(out, (count, m, m), rnp)
    src, conj = _mirror_index(m)
    scale = 1.0 / (m * m)

    def work(worker: int, start: int, stop: int):
        buf = scratch[worker] if scratch else None
        for b0 in range(start, stop, BLOCK_PLANES):
            b1 = min(b0 + BLOCK_PLANES, stop)
            cols = np.ascontiguousarray(spec[b0:b1][:, p.bit_reversal, :])
            _butterflies(cols, p, -2, inverse=True)
            rows = _scratch_view(buf, b1 - b0, (m, m), cnp)
            np.take(cols, src, axis=-1, out=rows)
            np.conjugate(rows, out=rows, where=conj)
            _butterflies(rows, p, -1, inverse=True)
            np.multiply(rows.real, scale, out=out[b0:b1])

    parallel_chunks(count, threads, work)
    return RealTensor4(out.reshape(s.shape[:2] + (m, m)))


def _output_buffer(out: np.ndarray | None, shape: tuple[int, ...], np_dtype: type) -> np.ndarray:
    if out is None:
        return np.empty(shape, dtype=np_dtype)
    if out.dtype != np_dtype or out.size < prod(shape) or not out.flags.c_contiguous:
        raise ShapeError(f"output buffer {out.dtype} {out.shape} cannot hold {np.dtype(np_dtype)} {shape}")
    return out.reshape(-1)[: prod(shape)].reshape(shape)


# ----------------------------------------------------------------------------------------------------------------------
# O(m^2) oracles


def naive_dft(signal) -> np.ndarray:
    """Forward DFT along the last axis by explicit matrix product with the DFT matrix."""
    arr = np.asarray(signal, dtype=np.complex128)
    n = arr.shape[-1]
    i, j = np.ogrid[0:n, 0:n]
    return arr @ np.exp((i * j) * (-2j * np.pi / n)).T


def naive_dft_2d(planes) -> np.ndarray:
    """Forward 2-D DFT over the last two axes by explicit matrix products."""
    arr = np.asarray(planes, dtype=np.complex128)
    n = arr.shape[-1]
    i, j = np.ogrid[0:n, 0:n]
    F = np.exp((i * j) * (-2j * np.pi / n))
    return F @ arr @ F.T
