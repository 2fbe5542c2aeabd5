"""Message updates of the SP-DD receiver, grouped by factor-graph part.

Every matrix-vector product is an FFT; no MN x MN matrix is formed. Each
function updates ``state`` in place and returns it.

Part I    symbols <-> frequency-domain transmit signal x_F
Part II   received samples <-> per-component products d_qF
Part III  BEM coefficients c_q <-> their frequency responses c_qF
Part IV   the bilinear node d_qF = x_F * c_qF (mean-field rule)
"""
import numpy as np

from ..modem import dd_to_time, time_to_dd, unvec, vec
from .messages import GaussMsg, clamp_var, combine, exclusive_sum, extrinsic, extrinsic_elementwise


def _fft(x):
    return np.fft.fft(x, axis=-1, norm="ortho")


def _ifft(x):
    return np.fft.ifft(x, axis=-1, norm="ortho")


def part1_backward(state):
    """Project symbol beliefs to Gaussians and push them to x_F."""
    post_mean = state.beliefs @ state.constellation
    post_var = clamp_var(1.0 - np.abs(post_mean) ** 2)
    divide = extrinsic if state.cfg.extrinsic == "averaged" else extrinsic_elementwise
    m_d, v_d = divide(post_mean, post_var, state.x_d_fwd.mean, state.x_d_fwd.var)
    state.x_d_bwd = GaussMsg(m_d, v_d, "backward")

    rho = state.rho
    m_dd = np.sqrt(rho) * state.x_p + np.sqrt(1.0 - rho) * m_d
    v_dd = (1.0 - rho) * v_d
    x_t = dd_to_time(unvec(m_dd, state.M, state.N))
    state.x_F_bwd = GaussMsg(_fft(x_t), clamp_var(np.mean(v_dd)), "backward")
    return state


def part2_forward(state):
    """Sum-node extrinsic messages towards every component, then to d_qF."""
    z_T_fwd, z_T_bwd, z_qT_bwd = state.z_T_fwd, state.z_T_bwd, state.z_qT_bwd
    mean = z_T_fwd.mean - z_T_bwd.mean + z_qT_bwd.mean
    var = clamp_var(z_T_fwd.var + z_T_bwd.var - z_qT_bwd.var)
    if state.cfg.residual_floor and state.Q > 1:
        # The sum node believes the other components to the stated variance.
        # Any residual power above noise + stated variance is unexplained
        # error of those components, so it is spread over the other Q-1.
        res = np.mean(np.abs(z_T_fwd.mean - z_T_bwd.mean) ** 2)
        excess = max(0.0, res - float(z_T_fwd.var) - float(np.mean(z_T_bwd.var)))
        var = var + excess * (state.Q - 1) / state.Q
    state.z_qT_fwd = GaussMsg(mean, var, "forward")
    # b_q has unit modulus, so dividing by it is a conjugate multiply and
    # leaves the variance unchanged
    d_qT = mean * state.basis.B.T.conj()
    state.d_qF_fwd = GaussMsg(_fft(d_qT), var.copy(), "forward")
    return state


def tap_fit(mean, var, L, tones=None):
    """Precision-weighted fit of per-tone messages onto L-tap responses.

    Solves ``(A^H W A) c = A^H W m`` with ``A`` the first L columns of the
    normalised DFT and ``W = diag(1/var)`` restricted to ``tones``. The Gram
    matrix is Hermitian Toeplitz with first column ``ifft(w)[:L]``, so the
    cost is one FFT pair plus an L x L solve per row. Returns the tap means
    (rows, L) and the average tap variance (rows, 1).
    """
    mean = np.atleast_2d(mean)
    w = np.broadcast_to(1.0 / var, mean.shape)
    if tones is not None:
        mask = np.zeros(mean.shape[-1])
        mask[tones] = 1.0
        w = w * mask
    g = np.fft.ifft(w, axis=-1)[:, :L]
    lag = np.arange(L)[:, None] - np.arange(L)[None, :]
    G = np.where(lag >= 0, g[:, np.abs(lag)], g[:, np.abs(lag)].conj())
    b = _ifft(w * mean)[:, :L]
    cov = np.linalg.inv(G)
    taps = np.einsum("qlk,qk->ql", cov, b)
    v = np.real(np.trace(cov, axis1=1, axis2=2))[:, None] / L
    return taps, clamp_var(v)


def _fit(state, mean, var, tones=None):
    var = var * np.ones(mean.shape)
    if state.cfg.coeff_fit == "average":
        # equal weights: truncate the inverse DFT and average the variances
        used = var if tones is None else var[:, tones]
        var = np.mean(used, axis=-1, keepdims=True) * np.ones(mean.shape)
    return tap_fit(mean, var, state.L, tones=tones)


def _taps_to_tones(taps, MN):
    padded = np.zeros((taps.shape[0], MN), dtype=np.complex128)
    padded[:, : taps.shape[1]] = taps
    return _fft(padded)


def part4_data_round(state):
    """Extrinsic x_qF, posteriors, and the two mean-field updates."""
    x_bwd, x_qF_fwd = state.x_F_bwd, state.x_qF_fwd
    prec_q = 1.0 / x_qF_fwd.var * np.ones(x_qF_fwd.mean.shape)
    weighted_q = x_qF_fwd.mean * prec_q

    # (a) everything except component q
    prec = 1.0 / x_bwd.var + exclusive_sum(prec_q)
    v_xb = clamp_var(1.0 / prec)
    m_xb = v_xb * (x_bwd.mean / x_bwd.var + exclusive_sum(weighted_q))
    state.x_qF_bwd = GaussMsg(m_xb, v_xb, "backward")

    # (b) posterior of x_F seen from component q
    m_xh, v_xh = combine(m_xb, v_xb, x_qF_fwd.mean, x_qF_fwd.var)
    state.x_qF_post = GaussMsg(m_xh, v_xh, "backward")

    # (c) mean-field estimate of c_qF; by default it reads the backward x_qF
    # message so the component's own (channel-dependent) x estimate does not
    # feed back into its channel estimate
    d = state.d_qF_fwd
    if state.cfg.x_for_channel == "posterior":
        m_xc, v_xc = m_xh, v_xh
    else:
        m_xc, v_xc = m_xb, v_xb
    energy = np.abs(m_xc) ** 2 + v_xc
    m_c = d.mean * m_xc.conj() / energy
    v_c = clamp_var(d.var / energy)
    if state.comb_active:
        # only the pilot comb is used; the other tones come from the L-tap fit
        taps, v_taps = _fit(state, m_c, v_c, tones=state.comb)
        m_c = _taps_to_tones(taps, state.MN)
        v_c = v_taps * np.ones(m_c.shape)
    state.c_qF_bwd = GaussMsg(m_c, v_c, "backward")

    # (d) posterior of c_qF
    c_fwd = state.c_qF_fwd
    m_ch, v_ch = combine(m_c, v_c, c_fwd.mean, c_fwd.var)
    state.c_qF_post = GaussMsg(m_ch, v_ch, "backward")

    # (e) mean-field estimate of x_qF
    energy_c = np.abs(m_ch) ** 2 + v_ch
    state.x_qF_fwd = GaussMsg(
        d.mean * m_ch.conj() / energy_c, clamp_var(d.var / energy_c), "forward"
    )
    return state


def part3_coeff_update(state):
    """Project the per-tone estimates onto L taps: c_q posterior and forward c_qF."""
    c_bwd = state.c_qF_bwd
    c_hat, v_cq = _fit(state, c_bwd.mean, c_bwd.var)
    state.c_q_post = GaussMsg(c_hat, v_cq, "backward")
    state.c_qF_fwd = GaussMsg(
        _taps_to_tones(c_hat, state.MN), clamp_var(state.L / state.MN * v_cq), "forward"
    )
    return state


def part4_backward_d(state):
    """Backward message of the product d_qF = c_qF * x_qF."""
    c, x = state.c_qF_fwd, state.x_qF_bwd
    mean = c.mean * x.mean
    var = x.var * np.abs(c.mean) ** 2 + c.var * np.abs(x.mean) ** 2 + c.var * x.var
    state.d_qF_bwd = GaussMsg(mean, clamp_var(var), "backward")
    return state


def part2_backward(state):
    """Component outputs z_qT (damped) and their sum z_T."""
    d = state.d_qF_bwd
    d_qT = _ifft(d.mean)
    v = clamp_var(np.mean(d.var * np.ones(d.mean.shape), axis=1, keepdims=True))
    z_raw = d_qT * state.basis.B.T

    pre = state.damp_memory
    if pre is None:
        z, v_z = z_raw, v
    else:
        eta = state.damping
        prec = (1.0 - eta) / pre.var + eta / v
        v_z = clamp_var(1.0 / prec)
        z = v_z * ((1.0 - eta) * pre.mean / pre.var + eta * z_raw / v)
    state.z_qT_bwd = GaussMsg(z, v_z, "backward")
    state.damp_memory = GaussMsg(z.copy(), np.array(v_z, copy=True), "backward")
    state.z_T_bwd = GaussMsg(z.sum(axis=0), clamp_var(float(np.sum(v_z))), "backward")
    return state


def part1_forward(state):
    """Combine component messages into x_F and update symbol beliefs."""
    x_q = state.x_qF_fwd
    prec_q = 1.0 / x_q.var * np.ones(x_q.mean.shape)
    v_F = clamp_var(1.0 / prec_q.sum(axis=0))
    m_F = v_F * (x_q.mean * prec_q).sum(axis=0)
    state.x_F_fwd = GaussMsg(m_F, v_F, "forward")

    rho = state.rho
    x_t = _ifft(m_F)
    v_t = clamp_var(np.mean(v_F))
    x_dd = vec(time_to_dd(x_t, state.M, state.N))
    m_d = (x_dd - np.sqrt(rho) * state.x_p) / np.sqrt(1.0 - rho)
    v_d = clamp_var(v_t / (1.0 - rho))
    state.x_d_fwd = GaussMsg(m_d, v_d, "forward")
    state.beliefs = symbol_beliefs(m_d, v_d, state.constellation)
    return state


def symbol_beliefs(mean, var, constellation):
    """Normalised ``exp(-|alpha - mean|^2 / var)`` over the constellation."""
    logits = -np.abs(constellation[None, :] - mean[:, None]) ** 2 / var
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    return p / p.sum(axis=1, keepdims=True)


def run_iteration(state):
    """One pass in the fixed schedule order."""
    part1_backward(state)
    part2_forward(state)
    part4_data_round(state)
    part3_coeff_update(state)
    part4_backward_d(state)
    part2_backward(state)
    part1_forward(state)
    return state
