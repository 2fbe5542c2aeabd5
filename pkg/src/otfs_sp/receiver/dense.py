"""Dense-matrix reference of every receiver part operation.

Same update equations as :mod:`.parts`, but every transform is an explicit
matrix product (DFT, Kronecker OTFS map, diagonal basis matrices) and the tap
fit is a dense weighted least-squares solve. Only usable on small frames;
the sizes are capped by the oracle guard.
"""
import numpy as np

from .._oracle import dft_matrix
from .messages import VAR_MAX, GaussMsg, clamp_var


def _mats(state):
    MN, M, N = state.MN, state.M, state.N
    F = dft_matrix(MN)
    # vec(X F_N^H) = (conj(F_N) kron I_M) vec(X)
    T = np.kron(dft_matrix(N).conj(), np.eye(M))
    return F, T


def _ext(m, v, mi, vi, mode):
    if mode == "averaged":
        va = float(np.mean(v))
        prec = 1.0 / va - 1.0 / float(np.mean(vi))
        if prec <= 1.0 / VAR_MAX:
            return m, np.full(m.shape, clamp_var(va))
        return (m / va - mi / vi) / prec, np.full(m.shape, clamp_var(1.0 / prec))
    out_m, out_v = m.copy(), np.broadcast_to(v, m.shape).astype(float).copy()
    vi = np.broadcast_to(vi, m.shape)
    for i in range(m.size):
        p = 1.0 / out_v[i] - 1.0 / vi[i]
        if p > 1.0 / VAR_MAX:
            out_m[i] = (m[i] / out_v[i] - mi[i] / vi[i]) / p
            out_v[i] = 1.0 / p
    return out_m, clamp_var(out_v)


def dense_tap_fit(mean, var, L, tones=None):
    MN = mean.shape[-1]
    A = dft_matrix(MN)[:, :L]
    taps, v = [], []
    for m_q, v_q in zip(np.atleast_2d(mean), np.broadcast_to(var, np.atleast_2d(mean).shape)):
        w = 1.0 / v_q
        if tones is not None:
            keep = np.zeros(MN)
            keep[tones] = 1.0
            w = w * keep
        G = A.conj().T @ np.diag(w) @ A
        cov = np.linalg.inv(G)
        taps.append(cov @ (A.conj().T @ (w * m_q)))
        v.append(np.real(np.trace(cov)) / L)
    return np.array(taps), clamp_var(np.array(v)[:, None])


def _fit(state, mean, var, tones=None):
    var = var * np.ones(mean.shape)
    if state.cfg.coeff_fit == "average":
        used = var if tones is None else var[:, tones]
        var = np.mean(used, axis=-1, keepdims=True) * np.ones(mean.shape)
    return dense_tap_fit(mean, var, state.L, tones)


def dense_part1_backward(state):
    F, T = _mats(state)
    m = state.beliefs @ state.constellation
    v = clamp_var(1.0 - np.abs(m) ** 2)
    m_d, v_d = _ext(m, v, state.x_d_fwd.mean, state.x_d_fwd.var, state.cfg.extrinsic)
    state.x_d_bwd = GaussMsg(m_d, v_d, "backward")
    rho = state.rho
    m_dd = np.sqrt(rho) * state.x_p + np.sqrt(1 - rho) * m_d
    state.x_F_bwd = GaussMsg(F @ (T @ m_dd), clamp_var(np.mean((1 - rho) * v_d)), "backward")
    return state


def dense_part2_forward(state):
    F, _ = _mats(state)
    zf, zb, zqb = state.z_T_fwd, state.z_T_bwd, state.z_qT_bwd
    mean = zf.mean[None, :] - zb.mean[None, :] + zqb.mean
    var = clamp_var(zf.var + zb.var - zqb.var)
    if state.cfg.residual_floor and state.Q > 1:
        r = zf.mean - zb.mean
        excess = max(0.0, float(np.real(np.vdot(r, r))) / state.MN - float(zf.var) - float(np.mean(zb.var)))
        var = var + excess * (state.Q - 1) / state.Q
    state.z_qT_fwd = GaussMsg(mean, var, "forward")
    d = np.array([F @ (np.diag(state.basis.B[:, q].conj()) @ mean[q]) for q in range(state.Q)])
    state.d_qF_fwd = GaussMsg(d, np.array(var, copy=True), "forward")
    return state


def dense_part4_data_round(state):
    Q = state.Q
    xb, xq = state.x_F_bwd, state.x_qF_fwd
    v_q = np.broadcast_to(xq.var, xq.mean.shape)
    m_xb = np.empty_like(xq.mean)
    v_xb = np.empty(xq.mean.shape)
    for q in range(Q):
        others = [j for j in range(Q) if j != q]
        prec = 1.0 / xb.var + sum(1.0 / v_q[j] for j in others)
        v_xb[q] = clamp_var(1.0 / prec)
        m_xb[q] = v_xb[q] * (xb.mean / xb.var + sum(xq.mean[j] / v_q[j] for j in others))
    state.x_qF_bwd = GaussMsg(m_xb, v_xb, "backward")
    p = 1.0 / v_xb + 1.0 / v_q
    v_xh = clamp_var(1.0 / p)
    m_xh = v_xh * (m_xb / v_xb + xq.mean / v_q)
    state.x_qF_post = GaussMsg(m_xh, v_xh, "backward")

    d = state.d_qF_fwd
    m_x, v_x = (m_xh, v_xh) if state.cfg.x_for_channel == "posterior" else (m_xb, v_xb)
    e = np.abs(m_x) ** 2 + v_x
    m_c = d.mean * m_x.conj() / e
    v_c = clamp_var(d.var / e)
    if state.comb_active:
        taps, vt = _fit(state, m_c, v_c, tones=state.comb)
        A = dft_matrix(state.MN)[:, : state.L]
        m_c = taps @ A.T
        v_c = vt * np.ones(m_c.shape)
    state.c_qF_bwd = GaussMsg(m_c, v_c, "backward")

    cf = state.c_qF_fwd
    v_cf = np.broadcast_to(cf.var, m_c.shape)
    v_ch = clamp_var(1.0 / (1.0 / v_c + 1.0 / v_cf))
    m_ch = v_ch * (m_c / v_c + cf.mean / v_cf)
    state.c_qF_post = GaussMsg(m_ch, v_ch, "backward")
    e_c = np.abs(m_ch) ** 2 + v_ch
    state.x_qF_fwd = GaussMsg(d.mean * m_ch.conj() / e_c, clamp_var(d.var / e_c), "forward")
    return state


def dense_part3_coeff_update(state):
    c = state.c_qF_bwd
    taps, v = _fit(state, c.mean, c.var)
    A = dft_matrix(state.MN)[:, : state.L]
    state.c_q_post = GaussMsg(taps, v, "backward")
    state.c_qF_fwd = GaussMsg(taps @ A.T, clamp_var(state.L / state.MN * v), "forward")
    return state


def dense_part4_backward_d(state):
    c, x = state.c_qF_fwd, state.x_qF_bwd
    var = x.var * np.abs(c.mean) ** 2 + c.var * np.abs(x.mean) ** 2 + c.var * x.var
    state.d_qF_bwd = GaussMsg(c.mean * x.mean, clamp_var(var), "backward")
    return state


def dense_part2_backward(state):
    F, _ = _mats(state)
    d = state.d_qF_bwd
    v = clamp_var(np.mean(np.broadcast_to(d.var, d.mean.shape), axis=1, keepdims=True))
    z_raw = np.array([np.diag(state.basis.B[:, q]) @ (F.conj().T @ d.mean[q]) for q in range(state.Q)])
    pre = state.damp_memory
    if pre is None:
        z, vz = z_raw, v
    else:
        eta = state.damping
        vz = clamp_var(1.0 / ((1 - eta) / pre.var + eta / v))
        z = vz * ((1 - eta) * pre.mean / pre.var + eta * z_raw / v)
    state.z_qT_bwd = GaussMsg(z, vz, "backward")
    state.damp_memory = GaussMsg(z.copy(), np.array(vz, copy=True), "backward")
    state.z_T_bwd = GaussMsg(z.sum(axis=0), clamp_var(float(np.sum(vz))), "backward")
    return state


def dense_part1_forward(state):
    F, T = _mats(state)
    xq = state.x_qF_fwd
    prec = 1.0 / np.broadcast_to(xq.var, xq.mean.shape)
    v_F = clamp_var(1.0 / prec.sum(axis=0))
    m_F = v_F * (xq.mean * prec).sum(axis=0)
    state.x_F_fwd = GaussMsg(m_F, v_F, "forward")
    x_dd = T.conj().T @ (F.conj().T @ m_F)
    rho = state.rho
    m_d = (x_dd - np.sqrt(rho) * state.x_p) / np.sqrt(1 - rho)
    v_d = clamp_var(clamp_var(np.mean(v_F)) / (1 - rho))
    state.x_d_fwd = GaussMsg(m_d, v_d, "forward")
    d2 = np.abs(state.constellation[None, :] - m_d[:, None]) ** 2
    logits = -d2 / v_d
    p = np.exp(logits - logits.max(axis=1, keepdims=True))
    state.beliefs = p / p.sum(axis=1, keepdims=True)
    return state


DENSE_SCHEDULE = (
    ("part1_backward", dense_part1_backward),
    ("part2_forward", dense_part2_forward),
    ("part4_data_round", dense_part4_data_round),
    ("part3_coeff_update", dense_part3_coeff_update),
    ("part4_backward_d", dense_part4_backward_d),
    ("part2_backward", dense_part2_backward),
    ("part1_forward", dense_part1_forward),
)
