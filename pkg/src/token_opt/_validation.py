"""Input validation helpers shared by the public constructors."""

import numbers

import numpy as np


def check_int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_real(value, name, low=None, high=None, low_open=False, high_open=False):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    if low is not None and (value < low or (low_open and value == low)):
        raise ValueError(f"{name}={value} is below the allowed range")
    if high is not None and (value > high or (high_open and value == high)):
        raise ValueError(f"{name}={value} is above the allowed range")
    return value


def check_vector(x, dim, name="x"):
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise ValueError(f"{name} must have shape ({dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"{name} has non-finite entries")
    return x


def check_stochastic_matrix(P, atol=1e-12):
    """Validate a dense row-stochastic matrix and return it as a float array."""
    P = np.array(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
        raise ValueError(f"transition matrix must be square and non-empty, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ValueError("transition matrix has non-finite entries")
    if np.any(P < 0):
        raise ValueError("transition matrix has negative entries")
    rows = P.sum(axis=1)
    if np.max(np.abs(rows - 1.0)) > atol:
        raise ValueError(f"rows of the transition matrix must sum to 1 (max deviation {np.max(np.abs(rows - 1.0)):.3e})")
    return P
