"""Arithmetic cost model of the three convolution operations, direct versus FFT-based, and of the FFT workspace memory.

Operation counts, for a layer (k, n, f, f') with minibatch S, n' = n - k + 1 and the hidden FFT constant C:

    op                  direct              FFT
    updateOutput        S f' f n'^2 k^2     2C n^2  log n  (f'S + fS + f'f) + 4 S f' f n^2
    updateGradInput     S f' f n^2  k^2     2C n'^2 log n' (f'S + fS + f'f) + 4 S f' f n'^2
    accGradParameters   S f' f k^2  n'^2    2C n^2  log n  (f'S + fS + f'f) + 4 S f' f n^2

log is base 2. Transform terms split into forward transforms of the two operand sets and the inverse transforms of the
result set, so every FFT count also comes with a (transform, pointwise, inverse) breakdown.

Counts are exact: powers of 2 have integer logarithms and C is taken as a Fraction, so integer inputs with a rational
C give rational (mostly integer) results. Sizes that are not powers of 2 fall back to a float logarithm unless the
model pads them (CostParams.pad_to_pow2).

"""
from __future__ import annotations
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

from fftconv.config import RAM_TABLE_ROWS, LayerConfig
from fftconv.dtypes import DType, dtypes
from fftconv.errors import ConfigError
from fftconv.helpers import ilog2, is_pow2, next_pow2
from fftconv.report import Table

Number = Union[int, Fraction, float]

DEFAULT_C = Fraction(5, 2)

# The memory table reports decimal megabytes
MB = 10**6


def _exact(x: Number) -> Number:
    """Demotes integral Fractions to int."""
    if isinstance(x, Fraction) and x.denominator == 1:
        return int(x)
    return x


def _log2(n: int) -> Number:
    return ilog2(n) if is_pow2(n) else math.log2(n)


@dataclass(frozen=True)
class CostParams:
    """A layer together with the hidden FFT constant C and the padding mode of the FFT sizes.

    pad_to_pow2 evaluates the FFT terms at the next power of 2 of each transform size, the size the engine actually
    transforms at. Off, the sizes are used as given.

    """

    config: LayerConfig
    C: Number = DEFAULT_C
    pad_to_pow2: bool = False

    def __post_init__(self):
        if not self.C > 0:
            raise ConfigError(f"the FFT constant must be positive, got C={self.C}")
        if not isinstance(self.C, Fraction):
            object.__setattr__(self, "C", Fraction(self.C))

    def fft_width(self, n: int) -> int:
        return next_pow2(n) if self.pad_to_pow2 else n


@dataclass(frozen=True)
class OpCounts:
    """Operation counts of one operation by both methods; breakdown is (transform_ops, pointwise_ops, inverse_ops)."""

    direct_ops: Number
    fft_ops: Number
    breakdown: tuple[Number, Number, Number]

    def __post_init__(self):
        assert self.fft_ops == sum(self.breakdown), f"breakdown {self.breakdown} does not add up to {self.fft_ops}"

    @property
    def ratio(self) -> float:
        """direct_ops / fft_ops, above 1 where the FFT method does less work."""
        return float(self.direct_ops) / float(self.fft_ops)


def _fft_counts(p: CostParams, width: int, forward_planes: int, inverse_planes: int) -> tuple[Number, ...]:
    c = p.config
    w = p.fft_width(width)
    per_transform = 2 * p.C * w * w * _log2(w)
    transform = _exact(per_transform * forward_planes)
    pointwise = 4 * c.S * c.f_prime * c.f * w * w
    inverse = _exact(per_transform * inverse_planes)
    return transform, pointwise, inverse


def _counts(direct: int, breakdown: tuple[Number, ...]) -> OpCounts:
    return OpCounts(direct, _exact(sum(breakdown)), tuple(breakdown))


def ops_forward(p: CostParams) -> OpCounts:
    """updateOutput: transforms of x (f*S planes) and w (f'*f), inverse transforms of y (f'*S)."""
    c = p.config
    direct = c.S * c.f_prime * c.f * c.n_out**2 * c.k**2
    return _counts(direct, _fft_counts(p, c.n, c.f * c.S + c.f_prime * c.f, c.f_prime * c.S))


def ops_grad_input(p: CostParams) -> OpCounts:
    """updateGradInput: transforms of dL/dy (f'*S) and w (f'*f), inverse transforms of dL/dx (f*S), all at width n'."""
    c = p.config
    direct = c.S * c.f_prime * c.f * c.n**2 * c.k**2
    return _counts(direct, _fft_counts(p, c.n_out, c.f_prime * c.S + c.f_prime * c.f, c.f * c.S))


def ops_grad_weight(p: CostParams) -> OpCounts:
    """accGradParameters: transforms of dL/dy (f'*S) and x (f*S), inverse transforms of dL/dw (f'*f)."""
    c = p.config
    direct = c.S * c.f_prime * c.f * c.k**2 * c.n_out**2
    return _counts(direct, _fft_counts(p, c.n, c.f_prime * c.S + c.f * c.S, c.f_prime * c.f))


OPS = {"updateOutput": ops_forward, "updateGradInput": ops_grad_input, "accGradParameters": ops_grad_weight}


# ----------------------------------------------------------------------------------------------------------------------
# memory


def memory_bytes(c: LayerConfig) -> int:
    """Frequency-buffer bytes 4n(n+1)(S*f + S*f' + f*f'): n(n+1)/2 complex values of 8 bytes per representation."""
    return 4 * c.n * (c.n + 1) * (c.S * c.f + c.S * c.f_prime + c.f * c.f_prime)


def packed_memory_bytes(c: LayerConfig, dtype: DType = dtypes.float32) -> int:
    """Bytes the engine allocates for the layer: m x (m/2 + 1) complex values per representation, m = next_pow2(n)."""
    m = c.fft_size
    return dtypes.complex_of(dtype).itemsize * m * (m // 2 + 1) * sum(c.planes.values())


@dataclass(frozen=True)
class RamRow:
    config: LayerConfig
    printed_mb: int
    computed_bytes: int

    @property
    def computed_mb(self) -> int:
        return round(self.computed_bytes / MB)

    @property
    def matches(self) -> bool:
        return self.computed_mb == self.printed_mb


def ram_rows() -> list[RamRow]:
    """memory_bytes for the eight rows of the reference RAM table next to their printed values."""
    rows = []
    for S, n, f, fp, mb in RAM_TABLE_ROWS:
        c = LayerConfig(1, n, f, fp, S)
        rows.append(RamRow(c, mb, memory_bytes(c)))
    return rows


def ram_table() -> Table:
    """The RAM table: printed MB, MB computed from memory_bytes, and whether the two agree after rounding.

    Only the first four rows follow from the formula; for the others the printed values are smaller than the formula
    gives (196, 761, 267 and 1038 MB against 151, 588, 214 and 830 MB). The table shows both and flags them.

    """
    table = Table(("S", "n", "f", "fprime", "printed_MB", "computed_MB", "bytes", "match"), title="FFT memory")
    for r in ram_rows():
        c = r.config
        table.add(c.S, c.n, c.f, c.f_prime, r.printed_mb, r.computed_mb, r.computed_bytes, "yes" if r.matches else "no")
    return table


def printed_mb(c: LayerConfig) -> int | None:
    """The RAM table entry for the layer's (S, n, f, f'), if it has one."""
    for S, n, f, fp, mb in RAM_TABLE_ROWS:
        if (S, n, f, fp) == (c.S, c.n, c.f, c.f_prime):
            return mb
    return None


def memory_table(c: LayerConfig) -> Table:
    """Memory estimate for one layer, by the formula and by the engine's actual packing in both precisions.

    Layers that appear in the RAM table also show the printed value.

    """
    columns = ("S", "n", "f", "fprime", "printed_MB", "formula_MB", "packed_f32_MB", "packed_f64_MB")
    table = Table(columns, title="FFT memory")
    table.add(
        c.S,
        c.n,
        c.f,
        c.f_prime,
        printed_mb(c),
        round(memory_bytes(c) / MB),
        round(packed_memory_bytes(c, dtypes.float32) / MB),
        round(packed_memory_bytes(c, dtypes.float64) / MB),
    )
    return table


# ----------------------------------------------------------------------------------------------------------------------
# comparison tables


def op_count_table(p: CostParams) -> Table:
    """The three operations with their direct and FFT counts and the FFT breakdown."""
    table = Table(("op", "direct_ops", "fft_ops", "transform_ops", "pointwise_ops", "inverse_ops", "ratio"))
    table.title = f"operation counts {p.config} C={float(p.C):g}{' pow2' if p.pad_to_pow2 else ''}"
    for op, fn in OPS.items():
        counts = fn(p)
        table.add(op, counts.direct_ops, counts.fft_ops, *counts.breakdown, counts.ratio)
    return table


def crossover_table(
    f: int,
    f_prime: int,
    S: int,
    k: int,
    C: Number = DEFAULT_C,
    n_values: Iterable[int] = (),
    pad_to_pow2: bool = False,
) -> Table:
    """Direct and FFT operation counts of updateOutput over a range of image widths n.

    Raises:
        ConfigError: If n_values is empty or a width is smaller than the kernel.

    """
    n_values = list(n_values)
    if not n_values:
        raise ConfigError("the crossover table needs at least one image width")
    title = f"updateOutput f={f} f'={f_prime} S={S} k={k}"
    table = Table(("n", "direct_ops", "fft_ops", "ratio", "fft_wins"), title=title)
    for n in n_values:
        counts = ops_forward(CostParams(LayerConfig(k, n, f, f_prime, S), C, pad_to_pow2))
        wins = "yes" if counts.fft_ops < counts.direct_ops else "no"
        table.add(n, counts.direct_ops, counts.fft_ops, counts.ratio, wins)
    return table
