"""Superimposed pilot construction.

``sp-dd`` draws i.i.d. QPSK pilots directly on the delay-Doppler grid.
``sp-dd-d`` repeats a length ``P = MN/beta`` sequence ``beta`` times in time,
which leaves energy only on every ``beta``-th frequency tone, then maps that
time sequence back to the delay-Doppler grid.
"""
from dataclasses import dataclass

import numpy as np

from ._validation import check_divides, check_open_unit
from .exceptions import InvalidConfigError
from .modem import QPSK_POINTS, dd_to_time, time_to_dd, unvec, vec

SCHEMES = ("sp-dd", "sp-dd-d")


@dataclass
class PilotSet:
    scheme: str
    M: int
    N: int
    beta: int
    P: int
    x_p1: np.ndarray
    x_p2: np.ndarray
    x_p3: np.ndarray
    x_p_dd: np.ndarray
    rho: float
    rho_f: float

    @property
    def frame_len(self):
        return self.x_p_dd.size

    @property
    def comb(self):
        return comb_indices(self.frame_len, self.beta)


def comb_indices(frame_len, beta):
    check_divides(beta, frame_len)
    return np.arange(0, frame_len, beta)


def _qpsk(rng, n):
    return QPSK_POINTS[rng.integers(0, 4, size=n)]


def zadoff_chu(length, root=1):
    """Unit-modulus Zadoff-Chu sequence; its DFT has constant magnitude."""
    n = np.arange(length)
    shift = length % 2
    return np.exp(-1j * np.pi * root * n * (n + shift) / length)


def random_dd_pilots(M, N, seed=None, rho_f=0.1):
    rho_f = check_open_unit(rho_f, "rho_f")
    rng = np.random.default_rng(seed)
    x_p_dd = _qpsk(rng, M * N)
    x_p2 = dd_to_time(unvec(x_p_dd, M, N))
    x_p3 = np.fft.fft(x_p2, norm="ortho")
    return PilotSet(
        scheme="sp-dd", M=M, N=N, beta=1, P=M * N, x_p1=x_p2.copy(), x_p2=x_p2, x_p3=x_p3,
        x_p_dd=x_p_dd, rho=rho_f, rho_f=rho_f,
    )


def designed_pilots(M, N, beta, seed=None, rho_f=0.1, n_taps=14, sequence="qpsk"):
    """Frequency-comb pilots with power concentration factor ``beta``.

    The DD-domain power split is ``rho = rho_f / beta`` so that every occupied
    tone carries pilot power ``rho_f``.
    """
    rho_f = check_open_unit(rho_f, "rho_f")
    MN = M * N
    check_divides(beta, MN)
    P = MN // beta
    if P <= n_taps:
        raise InvalidConfigError(
            f"comb length P={P} must exceed the channel length L={n_taps} (P > L)"
        )
    if sequence == "qpsk":
        x_p1 = _qpsk(np.random.default_rng(seed), P)
    elif sequence == "zadoff-chu":
        x_p1 = zadoff_chu(P)
    else:
        raise InvalidConfigError(f"unknown pilot sequence {sequence!r}")
    x_p2 = np.tile(x_p1, beta)
    x_p3 = np.fft.fft(x_p2, norm="ortho")
    x_p_dd = vec(time_to_dd(x_p2, M, N))
    return PilotSet(
        scheme="sp-dd-d", M=M, N=N, beta=int(beta), P=P, x_p1=x_p1, x_p2=x_p2, x_p3=x_p3,
        x_p_dd=x_p_dd, rho=rho_f / beta, rho_f=rho_f,
    )


def make_pilots(scheme, M, N, beta=1, seed=None, rho_f=0.1, n_taps=14, sequence="qpsk"):
    if scheme == "sp-dd":
        return random_dd_pilots(M, N, seed=seed, rho_f=rho_f)
    if scheme == "sp-dd-d":
        return designed_pilots(M, N, beta, seed=seed, rho_f=rho_f, n_taps=n_taps, sequence=sequence)
    raise InvalidConfigError(f"unknown pilot scheme {scheme!r}; expected {SCHEMES}")
