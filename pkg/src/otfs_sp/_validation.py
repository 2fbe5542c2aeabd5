"""Input validation helpers.

scikit-learn's ``check_array`` rejects complex data, so the complex-valued
checks used across the package live here.
"""
import numbers

import numpy as np

from .exceptions import InvalidConfigError, InvalidInputError


def check_complex_vector(x, length=None, name="x"):
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be 1-D, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise InvalidInputError(f"{name} must have length {length}, got {arr.shape[0]}")
    arr = arr.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def check_complex_matrix(x, shape=None, name="X"):
    arr = np.asarray(x)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise InvalidInputError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    arr = arr.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def check_bits(bits, multiple_of=1):
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise InvalidInputError("bits must be a 1-D sequence")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise InvalidInputError("bits must contain only 0 and 1")
    if arr.size % multiple_of:
        raise InvalidInputError(
            f"number of bits ({arr.size}) is not divisible by {multiple_of}"
        )
    return arr.astype(np.int8)


def check_positive_int(value, name, minimum=1, error=InvalidConfigError):
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise error(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise error(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_open_unit(value, name):
    value = float(value)
    if not 0.0 < value < 1.0:
        raise InvalidInputError(f"{name} must lie in (0, 1), got {value}")
    return value


def check_divides(divisor, n, name="beta"):
    if divisor < 1 or n % divisor:
        raise InvalidConfigError(f"{name}={divisor} does not divide frame length {n}")
