import numbers

import numpy as np

from .exceptions import InvalidParameterError


def check_random_state(seed):
    """Turn ``seed`` into a ``np.random.Generator``.

    Accepts None, an int, a SeedSequence or an existing Generator (returned
    unchanged, so callers share the stream).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise InvalidParameterError(f"cannot build a Generator from {seed!r}")


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, numbers.Integral) or value < minimum:
        raise InvalidParameterError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_probability(value, name, *, open_left=True, open_right=True):
    lo_ok = value > 0 if open_left else value >= 0
    hi_ok = value < 1 if open_right else value <= 1
    if not (np.isfinite(value) and lo_ok and hi_ok):
        lb = "(" if open_left else "["
        rb = ")" if open_right else "]"
        raise InvalidParameterError(f"{name} must lie in {lb}0, 1{rb}, got {value!r}")
    return float(value)


def check_positive(value, name):
    if not (np.isfinite(value) and value > 0):
        raise InvalidParameterError(f"{name} must be positive and finite, got {value!r}")
    return float(value)
