"""Small input-validation helpers in the spirit of ``sklearn.utils.validation``."""

import math

import numpy as np

from .exceptions import ConfigurationError


def check_scalar(value, name, *, lo=None, hi=None, include_lo=True, include_hi=True,
                 error=ConfigurationError):
    """Return ``value`` as float after checking it is finite and within bounds."""
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise error(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(x):
        raise error(f"{name} must be finite, got {x}")
    if lo is not None and (x < lo or (x == lo and not include_lo)):
        op = ">=" if include_lo else ">"
        raise error(f"{name} must be {op} {lo}, got {x}")
    if hi is not None and (x > hi or (x == hi and not include_hi)):
        op = "<=" if include_hi else "<"
        raise error(f"{name} must be {op} {hi}, got {x}")
    return x


def check_positive(value, name, error=ConfigurationError):
    return check_scalar(value, name, lo=0.0, include_lo=False, error=error)


def check_1d(array, name, *, dtype=float, allow_empty=False):
    """Coerce to a finite 1-D array."""
    a = np.asarray(array, dtype=dtype)
    if a.ndim != 1:
        raise ConfigurationError(f"{name} must be one-dimensional, got shape {a.shape}")
    if not allow_empty and a.size == 0:
        raise ConfigurationError(f"{name} must not be empty")
    if a.dtype.kind == "f" and not np.all(np.isfinite(a)):
        raise ConfigurationError(f"{name} contains non-finite values")
    return a
