"""Dense reference matrices, only for verification paths.

Every builder checks the active size limit. The receiver main path never calls
these; tests wrap it in ``oracle_guard(0)`` to prove it.
"""
from contextlib import contextmanager
from contextvars import ContextVar

import numpy as np

from .exceptions import OracleGuardError

DEFAULT_MAX_DIM = 4096

_max_dim = ContextVar("oracle_max_dim", default=DEFAULT_MAX_DIM)


@contextmanager
def oracle_guard(max_dim):
    """Temporarily cap the dimension of dense oracle matrices (0 forbids them)."""
    token = _max_dim.set(int(max_dim))
    try:
        yield
    finally:
        _max_dim.reset(token)


def check_dim(n, what="dense matrix"):
    limit = _max_dim.get()
    if n > limit:
        raise OracleGuardError(f"{what} of size {n}x{n} exceeds oracle bound {limit}")


def dft_matrix(n):
    """Normalized DFT matrix, F[p, q] = exp(-2j*pi*p*q/n) / sqrt(n)."""
    check_dim(n, "DFT matrix")
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)
