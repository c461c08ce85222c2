"""Exceptions raised by fftconv. Every error the engine reports on bad input derives from FFTConvError."""


class FFTConvError(Exception):
    """Base class of all fftconv errors."""


class SizeError(FFTConvError, ValueError):
    """A spatial size is out of range, e.g. a crop window outside the tensor or a kernel larger than the image."""


class ShapeError(FFTConvError, ValueError):
    """Map, batch or rank dimensions of the operands do not fit together."""


class PlanError(FFTConvError, ValueError):
    """An FFT plan was requested for a size that is not a power of 2."""


class CapacityError(FFTConvError, RuntimeError):
    """A workspace is too small for the layer it is asked to process."""


class ConfigError(FFTConvError, ValueError):
    """A layer configuration, network spec or config file is invalid."""
