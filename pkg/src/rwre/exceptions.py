"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """A parameter lies outside its admissible range."""


class SiteRangeError(IndexError):
    """A lattice site or vertex is outside the materialized window or tree."""


class WindowExitError(RuntimeError):
    """A simulated walk left the finite window its environment lives on.

    Carries the offending position and window so the caller can widen it.
    """

    def __init__(self, message, position=None, window=None):
        super().__init__(message)
        self.position = position
        self.window = window


class SamplingError(RuntimeError):
    """A rejection-type sampler exhausted its retry budget."""


class ConsistencyError(ValueError):
    """Two objects that must describe the same tree or space do not."""


class ConfigError(ValueError):
    """An experiment configuration is malformed or names an unknown scenario."""


class NumericalError(ArithmeticError):
    """A factorization failed even after the allowed diagonal jitter."""
