"""Contains helper functions and the DEBUG integer for verbose debugging used throughout the package."""

from typing import Callable, Union, Tuple
from concurrent.futures import ThreadPoolExecutor
import os
import functools
from math import prod  # noqa: F401 # pylint:disable=unused-import


def make_pair(x: Union[int, Tuple[int, ...]], cnt=2) -> Tuple[int, ...]:
    """Create a tuple pair from a single integer or a tuple."""
    return (x,) * cnt if isinstance(x, int) else x


def all_int(t) -> bool:
    """Check if all elements in a tuple are integers."""
    return all(isinstance(s, int) for s in t)


def is_pow2(x: int) -> bool:
    """Check if a positive integer is a power of 2 (1 included)."""
    return x >= 1 and (x & (x - 1)) == 0


def next_pow2(x: int) -> int:
    """Smallest power of 2 that is >= x."""
    assert x >= 1, f"next_pow2 needs a positive size, got {x}"
    return 1 << (x - 1).bit_length()


def ilog2(x: int) -> int:
    """Exact base-2 logarithm of a power of 2."""
    assert is_pow2(x), f"{x} is not a power of 2"
    return x.bit_length() - 1


def split_range(total: int, parts: int) -> list[tuple[int, int]]:
    """Split [0, total) into at most `parts` contiguous, non-empty ranges of near-equal size.

    The split only depends on (total, parts), so work handed to a fixed number of workers is always carved the same way.

    """
    parts = max(1, min(parts, total))
    step, rest = divmod(total, parts)
    bounds, start = [], 0
    for i in range(parts):
        stop = start + step + (1 if i < rest else 0)
        bounds.append((start, stop))
        start = stop
    return bounds


def parallel_chunks(total: int, threads: int, fn: Callable[[int, int, int], None]) -> None:
    """Run fn(worker, start, stop) over a contiguous split of range(total).

    Workers write to disjoint output slices, so the result does not depend on scheduling. numpy releases the GIL inside
    its kernels, which is what makes threads worth it here.

    """
    if total <= 0:
        return
    bounds = split_range(total, threads)
    if len(bounds) == 1:
        fn(0, *bounds[0])
        return
    with ThreadPoolExecutor(max_workers=len(bounds)) as pool:
        futures = [pool.submit(fn, worker, start, stop) for worker, (start, stop) in enumerate(bounds)]
        for future in futures:
            future.result()


@functools.lru_cache(maxsize=None)
def getenv(key, default=0):
    """Get an environment variable and convert it to the type of 'default'."""
    return type(default)(os.getenv(key, default))


# Global flags for debugging
DEBUG = getenv("DEBUG")
