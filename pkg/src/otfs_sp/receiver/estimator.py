"""Iterative joint channel estimation and detection as an estimator object."""
import csv
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..bem import from_receiver_scale, reconstruct_taps, to_receiver_scale
from ..channel import ChannelTaps, channel_mse
from ..exceptions import InvalidInputError, ReceiverDivergedError
from ..modem import ModemConfig, dd_to_time, decide_symbols, unvec
from .messages import VAR_MIN, GaussMsg
from .parts import (
    part1_backward,
    part1_forward,
    part2_backward,
    part2_forward,
    part4_backward_d,
    part4_data_round,
    run_iteration,
)
from .state import ReceiverConfig, init_state, switch_basis

_CHECKED_SLOTS = ("x_F_bwd", "d_qF_fwd", "c_qF_bwd", "x_qF_fwd", "z_T_bwd", "x_d_fwd")


@dataclass
class Diagnostics:
    mse: list = field(default_factory=list)
    ber: list = field(default_factory=list)
    symbol_changes: list = field(default_factory=list)
    residual_norm: list = field(default_factory=list)

    def __len__(self):
        return len(self.residual_norm)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "mse", "ber_running", "residual_norm"])
            for i in range(len(self)):
                mse = self.mse[i] if self.mse else ""
                ber = self.ber[i] if self.ber else ""
                writer.writerow([i + 1, mse, ber, self.residual_norm[i]])


@dataclass
class ReceiverOutput:
    symbols: np.ndarray
    bits: np.ndarray
    c_hat: np.ndarray  # receiver-scale coefficients, (L, Q)
    taps: ChannelTaps
    diagnostics: Diagnostics
    n_iter: int


def estimated_taps(state):
    coeffs = from_receiver_scale(state.c_q_post.mean, state.MN)
    return reconstruct_taps(coeffs, state.basis)


def _check_finite(state):
    for slot in _CHECKED_SLOTS:
        msg = getattr(state, slot)
        if msg is not None and not (np.all(np.isfinite(msg.mean)) and np.all(np.isfinite(msg.var))):
            raise ReceiverDivergedError(state.iteration, slot)


def _inject_genie(state, true_coeffs, true_symbols):
    """Seed messages with the true symbols and/or BEM coefficients."""
    if true_symbols is not None:
        idx = np.argmin(np.abs(true_symbols[:, None] - state.constellation[None, :]), axis=1)
        beliefs = np.zeros_like(state.beliefs)
        beliefs[np.arange(idx.size), idx] = 1.0
        state.beliefs = beliefs
    if true_coeffs is not None:
        c_q = to_receiver_scale(true_coeffs, state.MN)
        padded = np.zeros((state.Q, state.MN), dtype=np.complex128)
        padded[:, : state.L] = c_q
        state.c_qF_fwd = GaussMsg(np.fft.fft(padded, axis=-1, norm="ortho"), np.full((state.Q, 1), VAR_MIN))
        state.c_q_post = GaussMsg(c_q.copy(), np.full((state.Q, 1), VAR_MIN), "backward")
    if true_coeffs is not None and true_symbols is not None:
        # component outputs consistent with the genie, so the first sum-node
        # pass already cancels the other components correctly
        rho = state.rho
        x_dd = np.sqrt(rho) * state.x_p + np.sqrt(1.0 - rho) * true_symbols
        x_F = np.fft.fft(dd_to_time(unvec(x_dd, state.M, state.N)), norm="ortho")
        z = np.fft.ifft(state.c_qF_fwd.mean * x_F, axis=-1, norm="ortho") * state.basis.B.T
        var = np.full((state.Q, 1), VAR_MIN)
        state.z_qT_bwd = GaussMsg(z, var, "backward")
        state.damp_memory = GaussMsg(z.copy(), var.copy(), "backward")
        state.z_T_bwd = GaussMsg(z.sum(axis=0), VAR_MIN * state.Q, "backward")


def run(y, pilots, cfg, noise_var, truth=None, true_bits=None, genie_coeffs=None,
        genie_symbols=None, fixed_channel=False, modem=None):
    """Run the full iteration schedule on one received frame.

    ``truth``/``true_bits`` only feed the per-iteration diagnostics.
    ``genie_coeffs`` (tap-domain, shape (L, Q_main)) and ``genie_symbols`` seed
    the state; with ``fixed_channel`` the channel messages stay at the genie
    values and only detection runs.
    """
    modem = modem or ModemConfig(M=pilots.M, N=pilots.N)
    if fixed_channel and genie_coeffs is None:
        raise InvalidInputError("fixed_channel requires genie_coeffs")
    genie = genie_coeffs is not None or genie_symbols is not None
    q0 = cfg.q_main if genie else cfg.q_initial
    state = init_state(cfg, y, pilots, noise_var, Q=q0)
    if genie:
        state.comb = None
        _inject_genie(state, genie_coeffs, genie_symbols)
    diag = Diagnostics()
    prev_symbols = None
    stable = 0
    truth_taps = truth.taps if isinstance(truth, ChannelTaps) else truth

    for it in range(1, cfg.max_iters + 1):
        state.iteration = it
        if it == 2 and state.Q != cfg.q_main:
            switch_basis(state, cfg.q_main, cfg.k_os)
        if fixed_channel:
            _detect_only_iteration(state, genie_coeffs)
        else:
            run_iteration(state)
        _check_finite(state)

        symbols, bits = decide_symbols(state.beliefs, modem)
        if truth_taps is not None:
            diag.mse.append(channel_mse(truth_taps, estimated_taps(state).taps))
        if true_bits is not None:
            diag.ber.append(float(np.mean(bits != true_bits)))
        changes = symbols.size if prev_symbols is None else int(np.sum(symbols != prev_symbols))
        diag.symbol_changes.append(changes)
        diag.residual_norm.append(float(np.linalg.norm(state.y - state.z_T_bwd.mean)))
        stable = stable + 1 if changes == 0 else 0
        prev_symbols = symbols
        if cfg.early_stop and stable >= 3:
            break

    return ReceiverOutput(
        symbols=symbols, bits=bits, c_hat=state.c_q_post.mean.T.copy(),
        taps=estimated_taps(state), diagnostics=diag, n_iter=state.iteration,
    ), state


def _detect_only_iteration(state, coeffs):
    part1_backward(state)
    part2_forward(state)
    c_fwd, c_post = state.c_qF_fwd, state.c_q_post
    part4_data_round(state)
    # channel known: keep the genie messages instead of re-estimating them
    state.c_qF_fwd, state.c_q_post = c_fwd, c_post
    state.c_qF_post = c_fwd.copy()
    energy = np.abs(c_fwd.mean) ** 2 + c_fwd.var
    d = state.d_qF_fwd
    state.x_qF_fwd = GaussMsg(d.mean * c_fwd.mean.conj() / energy, d.var / energy, "forward")
    part4_backward_d(state)
    part2_backward(state)
    part1_forward(state)


class SPDDReceiver(BaseEstimator):
    """Message-passing receiver for OTFS frames with superimposed pilots.

    Parameters mirror :class:`ReceiverConfig`. Calling ``fit`` runs the
    iterative schedule on one received frame and exposes

    ``coef_``          BEM coefficients in receiver scaling, shape (L, Q)
    ``taps_``          reconstructed channel taps, shape (MN, L)
    ``beliefs_``       final symbol probability table, shape (MN, |A|)
    ``symbols_``, ``bits_``   hard decisions
    ``diagnostics_``   per-iteration MSE/BER (when truth given) and residuals
    ``n_iter_``        iterations executed

    Examples
    --------
    >>> rx = SPDDReceiver(q_initial=3, q_main=5, max_iters=70)  # doctest: +SKIP
    >>> bits = rx.fit(y, pilots=pilots, noise_var=0.1).predict()  # doctest: +SKIP
    """

    def __init__(self, q_initial=3, q_main=5, k_os=2, damping=0.8, max_iters=70,
                 comb_init=True, early_stop=False, n_taps=14, x_for_channel="backward", coeff_fit="weighted",
                 extrinsic="averaged", residual_floor=True):
        self.q_initial = q_initial
        self.q_main = q_main
        self.k_os = k_os
        self.damping = damping
        self.max_iters = max_iters
        self.comb_init = comb_init
        self.early_stop = early_stop
        self.n_taps = n_taps
        self.x_for_channel = x_for_channel
        self.coeff_fit = coeff_fit
        self.extrinsic = extrinsic
        self.residual_floor = residual_floor

    @classmethod
    def from_config(cls, cfg):
        return cls(**cfg.__dict__)

    def _config(self):
        return ReceiverConfig(**self.get_params())

    def fit(self, y, pilots=None, noise_var=None, truth=None, true_bits=None):
        if pilots is None or noise_var is None:
            raise InvalidInputError("fit needs the pilot set and the noise variance")
        out, state = run(y, pilots, self._config(), noise_var, truth=truth, true_bits=true_bits)
        self.coef_ = out.c_hat
        self.taps_ = out.taps.taps
        self.beliefs_ = state.beliefs
        self.symbols_ = out.symbols
        self.bits_ = out.bits
        self.diagnostics_ = out.diagnostics
        self.n_iter_ = out.n_iter
        return self

    def predict(self, y=None, pilots=None, noise_var=None):
        """Hard bit decisions; refits first when a new frame is given."""
        if y is not None:
            self.fit(y, pilots=pilots, noise_var=noise_var)
        check_is_fitted(self, "bits_")
        return self.bits_

    def predict_proba(self):
        check_is_fitted(self, "beliefs_")
        return self.beliefs_
