"""Generalized complex-exponential basis expansion of time-varying taps.

Two coefficient scalings appear in this package. :class:`BemCoeffs` holds the
tap-domain coefficients, so ``h(n, l) = sum_q b_q(n) * C[l, q]``. The receiver
works with ``sqrt(MN)`` times these (see :func:`to_receiver_scale`), which is the
scaling :func:`build_cq_matrix` expects.
"""
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._oracle import check_dim, dft_matrix
from ._validation import check_complex_vector, check_positive_int
from .channel import ChannelTaps
from .exceptions import InvalidConfigError, InvalidInputError


@dataclass(frozen=True)
class BemBasis:
    B: np.ndarray
    Q: int
    K_os: int
    frame_len: int

    @property
    def center(self):
        return (self.Q - 1) // 2


@dataclass
class BemCoeffs:
    C: np.ndarray  # (L, Q)

    @property
    def n_taps(self):
        return self.C.shape[0]


def gce_basis(frame_len, Q, K_os=2):
    """Basis with ``b_q(n) = exp(2j*pi*n*(q - (Q-1)/2) / (K_os*frame_len))``."""
    frame_len = check_positive_int(frame_len, "frame_len")
    Q = check_positive_int(Q, "Q")
    K_os = check_positive_int(K_os, "K_os")
    if Q % 2 == 0:
        raise InvalidConfigError(f"BEM order Q must be odd, got {Q}")
    n = np.arange(frame_len)[:, None]
    freq = np.arange(Q)[None, :] - (Q - 1) // 2
    B = np.exp(2j * np.pi * n * freq / (K_os * frame_len))
    return BemBasis(B=B, Q=Q, K_os=K_os, frame_len=frame_len)


def max_modeled_doppler(Q, K_os, frame_duration):
    """Largest Doppler (Hz) represented by the outermost basis function."""
    return (Q - 1) / (2 * K_os * frame_duration)


def _tap_matrix(taps):
    return taps.taps if isinstance(taps, ChannelTaps) else np.asarray(taps, dtype=np.complex128)


def ls_fit(taps, basis):
    """Least-squares coefficients for every delay tap, via normal equations."""
    h = _tap_matrix(taps)
    if h.shape[0] != basis.frame_len:
        raise InvalidInputError(
            f"taps have {h.shape[0]} samples but basis expects {basis.frame_len}"
        )
    B = basis.B
    gram = B.conj().T @ B
    assert np.linalg.matrix_rank(gram) == basis.Q, "GCE basis is rank deficient"
    coef = np.linalg.solve(gram, B.conj().T @ h)  # (Q, L)
    return BemCoeffs(C=coef.T.copy())


def reconstruct_taps(coeffs, basis, **meta):
    C = coeffs.C if isinstance(coeffs, BemCoeffs) else np.asarray(coeffs)
    if C.shape[1] != basis.Q:
        raise InvalidInputError(f"coefficients have {C.shape[1]} columns, basis has Q={basis.Q}")
    return ChannelTaps(taps=basis.B @ C.T, **meta)


def residual_mse(taps, basis):
    """MSE between taps and their least-squares BEM reconstruction."""
    h = _tap_matrix(taps)
    fit = reconstruct_taps(ls_fit(h, basis), basis).taps
    return float(np.mean(np.abs(h - fit) ** 2))


def to_receiver_scale(coeffs, frame_len):
    """Tap-domain coefficients (L, Q) -> receiver coefficients c_q, shape (Q, L)."""
    C = coeffs.C if isinstance(coeffs, BemCoeffs) else np.asarray(coeffs)
    return np.sqrt(frame_len) * C.T


def from_receiver_scale(c_q, frame_len):
    return BemCoeffs(C=np.asarray(c_q).T / np.sqrt(frame_len))


def build_cq_matrix(c_q, frame_len):
    """Dense circulant ``F^H diag(F[:, :L] c_q) F`` (oracle use only)."""
    c_q = check_complex_vector(c_q, name="c_q")
    check_dim(frame_len, "C_q matrix")
    F = dft_matrix(frame_len)
    spectrum = F[:, : c_q.size] @ c_q
    return F.conj().T @ (spectrum[:, None] * F)


class GCEBasisExpansion(TransformerMixin, BaseEstimator):
    """Fit GCE-BEM coefficients to channel tap matrices.

    Parameters
    ----------
    n_basis : int
        Odd BEM order Q.
    oversampling : int
        Frequency oversampling factor K_os of the exponentials.

    ``fit`` stores the basis for the frame length of the given taps and the
    coefficients of that realization in ``coef_`` (shape ``(L, Q)``).
    ``transform`` maps further tap matrices to coefficients and
    ``inverse_transform`` maps coefficients back to taps.
    """

    def __init__(self, n_basis=5, oversampling=2):
        self.n_basis = n_basis
        self.oversampling = oversampling

    def fit(self, X, y=None):
        h = _tap_matrix(X)
        self.basis_ = gce_basis(h.shape[0], self.n_basis, self.oversampling)
        self.coef_ = ls_fit(h, self.basis_).C
        self.residual_mse_ = float(
            np.mean(np.abs(h - self.basis_.B @ self.coef_.T) ** 2)
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        return ls_fit(_tap_matrix(X), self.basis_).C

    def inverse_transform(self, X):
        check_is_fitted(self, "basis_")
        return reconstruct_taps(np.asarray(X), self.basis_).taps
