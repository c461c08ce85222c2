"""Defines the scalar types the convolution engine computes in.

Real data is float32 (the default, matching float-sized frequency buffers) or float64 (used for tight numerical
oracles). Every real type has a complex companion that frequency-domain buffers are allocated in.

"""
from typing import ClassVar, Dict, Final
import numpy as np
from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class DType:
    """Data type class for managing different data types."""

    priority: int  # Priority for upcasting
    itemsize: int  # Size of the data type in bytes
    name: str  # Name of the data type
    np: type  # Corresponding numpy data type

    def __repr__(self):
        return f"dtypes.{self.name}"


class dtypes:
    """Container for the supported data types and conversion helpers."""

    @staticmethod
    def is_float(x: DType) -> bool:
        """Check if a data type is a real floating point type."""
        return x in (dtypes.float32, dtypes.float64)

    @staticmethod
    def is_complex(x: DType) -> bool:
        return x in (dtypes.complex64, dtypes.complex128)

    @staticmethod
    def from_np(x) -> DType:
        """Convert a numpy data type to a DType."""
        return DTYPES_DICT[np.dtype(x).name]

    @staticmethod
    def from_name(name: str) -> DType:
        """Look up a DType by its CLI spelling (f32, f64) or its full name."""
        aliases = {"f32": "float32", "f64": "float64"}
        return DTYPES_DICT[aliases.get(name, name)]

    @staticmethod
    def complex_of(x: DType) -> DType:
        """Return the complex type with real and imaginary parts of type x."""
        return {dtypes.float32: dtypes.complex64, dtypes.float64: dtypes.complex128}[x]

    @staticmethod
    def fields() -> Dict[str, DType]:
        return DTYPES_DICT

    float32: Final[DType] = DType(1, 4, "float32", np.float32)
    float64: Final[DType] = DType(2, 8, "float64", np.float64)
    complex64: Final[DType] = DType(3, 8, "complex64", np.complex64)
    complex128: Final[DType] = DType(4, 16, "complex128", np.complex128)

    default_float: ClassVar[DType] = float32


# Dictionary mapping data type names to DType objects
DTYPES_DICT = {
    k: v
    for k, v in dtypes.__dict__.items()
    if not k.startswith("__") and not k.startswith("default") and not callable(v) and not v.__class__ == staticmethod
}
