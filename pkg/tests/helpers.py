"""Shared frame builders for the test suite."""
import copy

import numpy as np

from otfs_sp.channel import ChannelConfig, apply_channel, generate_channel
from otfs_sp.modem import ModemConfig, dd_to_time, map_bits, superimpose, unvec
from otfs_sp.pilots import make_pilots
from otfs_sp.receiver import parts
from otfs_sp.receiver.dense import DENSE_SCHEDULE

SLOTS = (
    "beliefs", "x_d_fwd", "x_d_bwd", "x_F_bwd", "x_F_fwd", "x_qF_fwd", "x_qF_bwd",
    "x_qF_post", "z_qT_fwd", "d_qF_fwd", "c_qF_bwd", "c_qF_post", "c_qF_fwd", "c_q_post",
    "d_qF_bwd", "z_qT_bwd", "z_T_bwd", "damp_memory",
)


def small_frame(seed, M=8, N=4, L=3, scheme="sp-dd-d", beta=4, snr_db=10.0, speed=500.0,
                rho_f=0.3):
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, 2 * M * N)
    pilots = make_pilots(scheme, M, N, beta=beta, seed=seed + 1, rho_f=rho_f, n_taps=L)
    x = superimpose(map_bits(bits), pilots.x_p_dd, pilots.rho)
    ch_cfg = ChannelConfig(profile="rayleigh-uniform", n_taps=L, speed_kmh=speed,
                           subcarrier_spacing=15e3)
    ch = generate_channel(ch_cfg, M, N, seed=seed + 2)
    nv = 10 ** (-snr_db / 10)
    y = apply_channel(ch, dd_to_time(unvec(x, M, N)), nv, seed=seed + 3)
    return dict(y=y, pilots=pilots, channel=ch, bits=bits, noise_var=nv,
                modem=ModemConfig(M=M, N=N))


def max_slot_diff(a, b):
    """Largest absolute difference over every message slot of two states."""
    worst = 0.0
    for name in SLOTS:
        u, v = getattr(a, name), getattr(b, name)
        if u is None or v is None:
            assert u is None and v is None, name
            continue
        if name == "beliefs":
            pairs = [(u, v)]
        else:
            pairs = [(u.mean, v.mean), (np.broadcast_to(u.var, np.shape(u.mean)),
                                        np.broadcast_to(v.var, np.shape(v.mean)))]
        for p, q in pairs:
            worst = max(worst, float(np.max(np.abs(np.asarray(p) - np.asarray(q)))))
    return worst


def compare_iteration(state):
    """Run one iteration op by op on the fast path, checking each op against
    the dense reference applied to a copy of the same input state.
    Returns {op name: max difference}."""
    diffs = {}
    for name, dense_op in DENSE_SCHEDULE:
        ref = dense_op(copy.deepcopy(state))
        getattr(parts, name)(state)
        diffs[name] = max_slot_diff(state, ref)
    return diffs


ACCEPTANCE_LINES = []


def record(criterion, ok, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    return line
