"""Layer configurations, the reference benchmark workloads and process-wide settings read from the environment."""

from __future__ import annotations
import os
from dataclasses import dataclass, replace

from fftconv.errors import ConfigError
from fftconv.helpers import all_int, getenv, next_pow2

# Default bound on within-operation parallelism (--threads falls back to it)
THREADS = max(1, getenv("FFTCONV_THREADS", os.cpu_count() or 1))


@dataclass(frozen=True)
class LayerConfig:
    """A convolution workload: kernel width k, image width n, f input maps, f_prime output maps, minibatch S."""

    k: int
    n: int
    f: int
    f_prime: int
    S: int = 1

    def __post_init__(self):
        if not all_int((self.k, self.n, self.f, self.f_prime, self.S)):
            raise ConfigError(f"layer config fields must be integers, got {self}")
        if not 1 <= self.k <= self.n:
            raise ConfigError(f"kernel width must satisfy 1 <= k <= n, got k={self.k}, n={self.n}")
        if min(self.f, self.f_prime, self.S) < 1:
            raise ConfigError(f"map counts and batch size must be >= 1, got {self}")

    @property
    def n_out(self) -> int:
        """Width of the valid output feature map, n' = n - k + 1."""
        return self.n - self.k + 1

    @property
    def fft_size(self) -> int:
        """Transform size m, the next power of 2 >= n."""
        return next_pow2(self.n)

    @property
    def planes(self) -> dict[str, int]:
        """Number of 2-D frequency representations per workspace role."""
        return {"x": self.S * self.f, "w": self.f_prime * self.f, "y": self.S * self.f_prime}

    def with_batch(self, S: int) -> LayerConfig:
        return replace(self, S=S)

    @staticmethod
    def parse(text: str, batch: int = 1) -> LayerConfig:
        """Parse the CLI form "k,n,f,fp" (a fifth field, if present, is the batch size)."""
        try:
            fields = [int(v) for v in text.replace(" ", "").split(",")]
        except ValueError as e:
            raise ConfigError(f"cannot parse layer config {text!r}: {e}") from e
        if len(fields) == 4:
            fields.append(batch)
        if len(fields) != 5:
            raise ConfigError(f"layer config needs 4 fields k,n,f,fp, got {text!r}")
        return LayerConfig(*fields)

    def __str__(self):
        return f"({self.k},{self.n},{self.f},{self.f_prime}) S={self.S}"


# The five (k, n, f, f') layer configurations of the per-layer benchmark, first layer first
REFERENCE_LAYERS = ((11, 32, 3, 96), (7, 32, 96, 256), (5, 16, 256, 384), (5, 16, 384, 384), (3, 16, 384, 384))
REFERENCE_BATCH = 128

# (S, n, f, f', printed RAM in MB) rows of the frequency-buffer memory table
RAM_TABLE_ROWS = (
    (128, 16, 96, 256, 76),
    (128, 32, 96, 256, 294),
    (64, 64, 96, 256, 784),
    (128, 64, 96, 256, 1159),
    (128, 16, 256, 384, 151),
    (128, 32, 256, 384, 588),
    (128, 16, 384, 384, 214),
    (128, 32, 384, 384, 830),
)


def reference_configs(batch: int = REFERENCE_BATCH) -> list[LayerConfig]:
    return [LayerConfig(*layer, S=batch) for layer in REFERENCE_LAYERS]
