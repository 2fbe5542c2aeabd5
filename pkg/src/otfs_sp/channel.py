"""Time-varying multipath channels sampled on the OTFS time grid.

Taps are stored as an ``(MN, L)`` matrix whose entry ``(n, l)`` is the gain of
delay ``l`` at sample ``n``. The cyclic prefix is implicit: the channel acts as
a cyclic convolution over the frame, which is what remains after CP removal.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from ._oracle import check_dim
from ._validation import check_complex_vector
from .exceptions import InvalidConfigError, InvalidInputError

SPEED_OF_LIGHT = 3e8

# TDL-E (TR 38.901 Table 7.7.2-5). The first tap carries a LOS component with
# power -0.03 dB on top of its Rayleigh part at -22.03 dB (K = 22 dB).
TDL_E_DELAYS = np.array([
    0.0, 0.5133, 0.5440, 0.5630, 0.5440, 0.7112, 1.9092,
    1.9293, 1.9589, 2.6426, 3.7136, 5.4524, 12.0034, 20.6519,
])
TDL_E_POWERS_DB = np.array([
    -22.03, -15.8, -18.1, -19.8, -22.9, -22.4, -18.6,
    -20.8, -22.6, -22.3, -25.6, -20.2, -29.8, -29.2,
])
TDL_E_LOS_POWER_DB = -0.03

PROFILES = ("tdl-e", "rayleigh-uniform")


@dataclass(frozen=True)
class ChannelConfig:
    profile: str = "tdl-e"
    speed_kmh: float = 125.0
    carrier_freq: float = 4e9
    subcarrier_spacing: float = 15e3
    n_taps: int = 14
    delay_spread: float | None = None
    n_sinusoids: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise InvalidConfigError(f"unknown profile {self.profile!r}; expected {PROFILES}")
        if self.n_taps < 1:
            raise InvalidConfigError("n_taps must be >= 1")
        if self.speed_kmh < 0:
            raise InvalidConfigError("speed must be non-negative")
        if self.carrier_freq <= 0 or self.subcarrier_spacing <= 0:
            raise InvalidConfigError("frequencies must be positive")
        if self.delay_spread is not None and self.delay_spread <= 0:
            raise InvalidConfigError("delay_spread must be positive")
        if self.n_sinusoids < 1:
            raise InvalidConfigError("n_sinusoids must be >= 1")

    @property
    def max_doppler(self):
        return self.speed_kmh / 3.6 * self.carrier_freq / SPEED_OF_LIGHT


@dataclass
class ChannelTaps:
    taps: np.ndarray
    max_doppler: float = 0.0
    tap_powers: np.ndarray = field(default=None)
    sample_rate: float = 1.0

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=np.complex128)
        if self.taps.ndim != 2:
            raise InvalidInputError("taps must be an (MN, L) matrix")
        if self.tap_powers is None:
            self.tap_powers = np.mean(np.abs(self.taps) ** 2, axis=0)

    @property
    def frame_len(self):
        return self.taps.shape[0]

    @property
    def n_taps(self):
        return self.taps.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    variance: float
    snr_db: float | None = None

    def __post_init__(self):
        if not self.variance > 0:
            raise InvalidConfigError("noise variance must be positive")

    @classmethod
    def from_snr_db(cls, snr_db):
        return cls(variance=10.0 ** (-snr_db / 10.0), snr_db=snr_db)


def tdl_e_profile():
    """Return (normalized delays, linear path powers, LOS power) before scaling."""
    return (
        TDL_E_DELAYS.copy(),
        10.0 ** (TDL_E_POWERS_DB / 10.0),
        10.0 ** (TDL_E_LOS_POWER_DB / 10.0),
    )


def _path_table(cfg, sample_rate):
    """Per-path integer sample delays, Rayleigh powers and LOS power, unit total."""
    L = cfg.n_taps
    if cfg.profile == "rayleigh-uniform":
        return np.arange(L), np.full(L, 1.0 / L), 0.0
    delays, powers, los = tdl_e_profile()
    spread = cfg.delay_spread
    if spread is None:
        # largest normalized delay lands on sample L-1
        spread = max(L - 1, 0) / (delays[-1] * sample_rate) if L > 1 else 0.0
    samples = np.rint(delays * spread * sample_rate).astype(int)
    if samples.max() > L - 1:
        raise InvalidConfigError(
            f"delay spread {spread:.3e}s maps to {samples.max()} samples, beyond L-1={L - 1}"
        )
    total = powers.sum() + los
    return samples, powers / total, los / total


def _sum_of_sinusoids(rng, n_paths, n_sin, f_d, t):
    """Unit-power Jakes processes, one row per path, via random-angle sinusoids."""
    theta = rng.uniform(-np.pi, np.pi, size=(n_paths, n_sin))
    phi = rng.uniform(-np.pi, np.pi, size=(n_paths, n_sin))
    doppler = f_d * np.cos(theta)
    phase = 2 * np.pi * doppler[:, :, None] * t[None, None, :] + phi[:, :, None]
    return np.exp(1j * phase).sum(axis=1) / np.sqrt(n_sin)


def generate_channel(cfg, M, N, seed=None):
    """Draw one channel realization for an M x N frame.

    Sampling period is ``1/(M*subcarrier_spacing)``. Paths sharing a quantized
    delay are summed into one tap. Deterministic for a given (cfg, seed).
    """
    if M * N < 1:
        raise InvalidInputError("frame length must be >= 1")
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    sample_rate = M * cfg.subcarrier_spacing
    f_d = cfg.max_doppler
    t = np.arange(M * N) / sample_rate

    delays, powers, los_power = _path_table(cfg, sample_rate)
    paths = _sum_of_sinusoids(rng, delays.size, cfg.n_sinusoids, f_d, t)
    paths *= np.sqrt(powers)[:, None]

    taps = np.zeros((M * N, cfg.n_taps), dtype=np.complex128)
    tap_powers = np.zeros(cfg.n_taps)
    np.add.at(taps.T, delays, paths)
    np.add.at(tap_powers, delays, powers)
    if los_power > 0:
        theta, phi = rng.uniform(-np.pi, np.pi, size=2)
        taps[:, 0] += np.sqrt(los_power) * np.exp(1j * (2 * np.pi * f_d * np.cos(theta) * t + phi))
        tap_powers[0] += los_power
    return ChannelTaps(taps=taps, max_doppler=f_d, tap_powers=tap_powers, sample_rate=sample_rate)


def apply_channel(taps, x_t, noise=None, seed=None):
    """Cyclic time-varying convolution plus circular complex Gaussian noise."""
    h = taps.taps if isinstance(taps, ChannelTaps) else np.asarray(taps)
    x_t = check_complex_vector(x_t, length=h.shape[0], name="x_t")
    y = np.zeros_like(x_t)
    for l in range(h.shape[1]):
        y += h[:, l] * np.roll(x_t, l)
    if noise is not None:
        var = noise.variance if isinstance(noise, NoiseSpec) else float(noise)
        if var > 0:
            rng = np.random.default_rng(seed)
            w = rng.standard_normal(y.shape[0]) + 1j * rng.standard_normal(y.shape[0])
            y += np.sqrt(var / 2) * w
    return y


def build_channel_matrix(taps):
    """Dense MN x MN time-domain channel matrix (oracle use only)."""
    h = taps.taps if isinstance(taps, ChannelTaps) else np.asarray(taps)
    n, L = h.shape
    check_dim(n, "channel matrix")
    H = np.zeros((n, n), dtype=np.complex128)
    rows = np.arange(n)
    for l in range(L):
        H[rows, (rows - l) % n] += h[:, l]
    return H


def channel_mse(truth, estimate):
    """Squared Frobenius error of the tap matrices normalised by M*N*L."""
    a = truth.taps if isinstance(truth, ChannelTaps) else np.asarray(truth)
    b = estimate.taps if isinstance(estimate, ChannelTaps) else np.asarray(estimate)
    if a.shape != b.shape:
        raise InvalidInputError(f"tap shapes differ: {a.shape} vs {b.shape}")
    return float(np.sum(np.abs(a - b) ** 2) / a.size)


def write_taps_csv(taps, path):
    h = taps.taps if isinstance(taps, ChannelTaps) else np.asarray(taps)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "l", "re", "im"])
        for n in range(h.shape[0]):
            for l in range(h.shape[1]):
                writer.writerow([n, l, repr(float(h[n, l].real)), repr(float(h[n, l].imag))])
