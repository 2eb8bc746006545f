"""Random walks in random environments on lattices and trees, their
continuum limits, and a harness for checking scaling-limit claims
numerically."""

from . import continuum, env1d, errw, harness, rwre_tree, treecore
from .exceptions import (
    ConfigError,
    ConsistencyError,
    InvalidParameterError,
    NumericalError,
    SamplingError,
    SiteRangeError,
    WindowExitError,
)

__version__ = "0.1.0"

__all__ = [
    "continuum",
    "env1d",
    "errw",
    "harness",
    "rwre_tree",
    "treecore",
    "ConfigError",
    "ConsistencyError",
    "InvalidParameterError",
    "NumericalError",
    "SamplingError",
    "SiteRangeError",
    "WindowExitError",
]
