"""QPSK mapping, pilot/data superposition and the OTFS transform pair.

Flattening is column-major with delay as the fast axis: flat index
``i = m + n*M`` for delay bin ``m`` and Doppler bin ``n``.
"""
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import (
    check_bits,
    check_complex_matrix,
    check_complex_vector,
    check_open_unit,
    check_positive_int,
)
from .exceptions import InvalidConfigError, InvalidInputError

# Gray-labelled QPSK: first bit picks the sign of the real part, second bit
# the sign of the imaginary part. Row k holds the label of constellation[k].
QPSK_POINTS = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)
QPSK_LABELS = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.int8)


@dataclass(frozen=True)
class ModemConfig:
    M: int = 128
    N: int = 16
    bits_per_symbol: int = 2
    constellation: np.ndarray = field(default_factory=lambda: QPSK_POINTS.copy())
    labels: np.ndarray = field(default_factory=lambda: QPSK_LABELS.copy())

    def __post_init__(self):
        check_positive_int(self.M, "M", minimum=2)
        check_positive_int(self.N, "N", minimum=2)
        k = check_positive_int(self.bits_per_symbol, "bits_per_symbol")
        points = np.asarray(self.constellation, dtype=np.complex128)
        if points.shape != (2**k,):
            raise InvalidConfigError(f"constellation must have exactly {2**k} points")
        if not np.isclose(np.mean(np.abs(points) ** 2), 1.0, atol=1e-12):
            raise InvalidConfigError("constellation must have unit average energy")
        if np.asarray(self.labels).shape != (2**k, k):
            raise InvalidConfigError("labels must be a (2**K, K) bit table")

    @property
    def frame_len(self):
        return self.M * self.N


def vec(X):
    """Column-major flattening of an M x N grid."""
    return np.asarray(X).reshape(-1, order="F")


def unvec(x, M, N):
    """Inverse of :func:`vec`."""
    return np.asarray(x).reshape((M, N), order="F")


def map_bits(bits, cfg=None):
    cfg = cfg or ModemConfig()
    k = cfg.bits_per_symbol
    bits = check_bits(bits, multiple_of=k)
    weights = 1 << np.arange(k - 1, -1, -1)
    label_codes = cfg.labels @ weights
    lookup = np.empty(2**k, dtype=np.intp)
    lookup[label_codes] = np.arange(2**k)
    codes = bits.reshape(-1, k) @ weights
    return cfg.constellation[lookup[codes]]


def symbols_to_bits(indices, cfg=None):
    """Inverse Gray map from constellation indices to a flat bit array."""
    cfg = cfg or ModemConfig()
    return cfg.labels[np.asarray(indices)].reshape(-1)


def superimpose(x_d, x_p, rho):
    """Power-split superposition ``sqrt(rho)*x_p + sqrt(1-rho)*x_d``."""
    rho = check_open_unit(rho, "rho")
    x_d = check_complex_vector(x_d, name="x_d")
    x_p = check_complex_vector(x_p, length=x_d.shape[0], name="x_p")
    return np.sqrt(rho) * x_p + np.sqrt(1.0 - rho) * x_d


def dd_to_time(X_dd):
    """Map an M x N delay-Doppler grid to the MN time samples ``vec(X F_N^H)``.

    Inverse FFTs of length N run along the Doppler axis of every delay row,
    rescaled to the unitary DFT convention.
    """
    X_dd = check_complex_matrix(X_dd, name="X_dd")
    return vec(np.fft.ifft(X_dd, axis=1, norm="ortho"))


def time_to_dd(x_t, M, N):
    """Exact inverse of :func:`dd_to_time`, returning the M x N grid."""
    x_t = check_complex_vector(x_t, length=M * N, name="x_t")
    return np.fft.fft(unvec(x_t, M, N), axis=1, norm="ortho")


def decide_symbols(beliefs, cfg=None):
    """Hard decisions from per-symbol probability tables.

    ``np.argmax`` returns the first maximum, so ties resolve to the lowest
    constellation index.
    """
    cfg = cfg or ModemConfig()
    beliefs = np.asarray(beliefs, dtype=float)
    if beliefs.ndim != 2 or beliefs.shape[1] != cfg.constellation.size:
        raise InvalidInputError(
            f"beliefs must have shape (n, {cfg.constellation.size}), got {beliefs.shape}"
        )
    idx = np.argmax(beliefs, axis=1)
    return cfg.constellation[idx], symbols_to_bits(idx, cfg)


def check_beliefs(beliefs, atol=1e-12):
    beliefs = np.asarray(beliefs, dtype=float)
    if np.any(beliefs < 0) or not np.allclose(beliefs.sum(axis=1), 1.0, atol=atol):
        raise InvalidInputError("belief rows must be non-negative and sum to one")
    return beliefs


class OTFSModulator(TransformerMixin, BaseEstimator):
    """Delay-Doppler to time-domain modulator as a stateless transformer.

    ``transform`` accepts a batch of flattened frames ``(n_frames, M*N)`` and
    returns the matching time-domain samples; ``inverse_transform`` undoes it.
    """

    def __init__(self, M=128, N=16):
        self.M = M
        self.N = N

    def fit(self, X=None, y=None):
        check_positive_int(self.M, "M", minimum=2)
        check_positive_int(self.N, "N", minimum=2)
        self.frame_len_ = self.M * self.N
        return self

    def _batch(self, X):
        X = np.asarray(X)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.M * self.N:
            raise InvalidInputError(
                f"frames must have {self.M * self.N} samples, got {X.shape[1]}"
            )
        return X.astype(np.complex128, copy=False), single

    def transform(self, X):
        X, single = self._batch(X)
        grids = X.reshape(-1, self.N, self.M).transpose(0, 2, 1)
        out = np.fft.ifft(grids, axis=2, norm="ortho").transpose(0, 2, 1)
        out = out.reshape(X.shape[0], -1)
        return out[0] if single else out

    def inverse_transform(self, X):
        X, single = self._batch(X)
        grids = X.reshape(-1, self.N, self.M).transpose(0, 2, 1)
        out = np.fft.fft(grids, axis=2, norm="ortho").transpose(0, 2, 1)
        out = out.reshape(X.shape[0], -1)
        return out[0] if single else out
