"""Receiver configuration and the mutable message state of one frame."""
from dataclasses import dataclass, field

import numpy as np

from .._validation import check_complex_vector
from ..bem import BemBasis, gce_basis
from ..exceptions import InvalidConfigError
from ..modem import QPSK_POINTS
from ..pilots import PilotSet, comb_indices
from .messages import VAR_MIN, GaussMsg


X_FOR_CHANNEL = ("backward", "posterior")
COEFF_FITS = ("weighted", "average")
EXTRINSIC_MODES = ("averaged", "elementwise")


@dataclass(frozen=True)
class ReceiverConfig:
    q_initial: int = 3
    q_main: int = 5
    k_os: int = 2
    damping: float = 0.8
    max_iters: int = 70
    comb_init: bool = True
    early_stop: bool = False
    n_taps: int = 14
    # stabilisers; the alternative values give the plain update rules
    x_for_channel: str = "backward"
    coeff_fit: str = "weighted"
    extrinsic: str = "averaged"
    residual_floor: bool = True

    def __post_init__(self):
        for name, allowed in (("x_for_channel", X_FOR_CHANNEL), ("coeff_fit", COEFF_FITS),
                              ("extrinsic", EXTRINSIC_MODES)):
            if getattr(self, name) not in allowed:
                raise InvalidConfigError(
                    f"{name} must be one of {allowed}, got {getattr(self, name)!r}"
                )
        if not 0.0 <= self.damping <= 1.0:
            raise InvalidConfigError(f"damping must lie in [0, 1], got {self.damping}")
        for name in ("q_initial", "q_main"):
            q = getattr(self, name)
            if q < 1 or q % 2 == 0:
                raise InvalidConfigError(f"{name} must be a positive odd integer, got {q}")
        if self.max_iters < 1:
            raise InvalidConfigError("max_iters must be >= 1")
        if self.k_os < 1 or self.n_taps < 1:
            raise InvalidConfigError("k_os and n_taps must be >= 1")


@dataclass
class ReceiverState:
    """All message slots of the factor graph for one received frame.

    Arrays indexed by BEM component have the component on axis 0. Variances
    averaged over a vector are kept as ``(Q, 1)`` columns (or scalars for the
    symbol-side messages) so they broadcast against the means.
    """

    # problem description
    y: np.ndarray
    x_p: np.ndarray
    rho: float
    noise_var: float
    M: int
    N: int
    L: int
    basis: BemBasis
    damping: float
    comb: np.ndarray | None
    beta: int
    cfg: ReceiverConfig = field(default_factory=ReceiverConfig)
    constellation: np.ndarray = field(default_factory=lambda: QPSK_POINTS.copy())

    # messages
    beliefs: np.ndarray = None
    x_d_fwd: GaussMsg = None
    x_d_bwd: GaussMsg = None
    x_F_bwd: GaussMsg = None
    x_F_fwd: GaussMsg = None
    x_qF_fwd: GaussMsg = None
    x_qF_bwd: GaussMsg = None
    x_qF_post: GaussMsg = None
    z_qT_fwd: GaussMsg = None
    d_qF_fwd: GaussMsg = None
    c_qF_bwd: GaussMsg = None
    c_qF_post: GaussMsg = None
    c_qF_fwd: GaussMsg = None
    c_q_post: GaussMsg = None
    d_qF_bwd: GaussMsg = None
    z_qT_bwd: GaussMsg = None
    z_T_bwd: GaussMsg = None
    z_T_fwd: GaussMsg = None
    damp_memory: GaussMsg | None = None
    iteration: int = 0

    @property
    def MN(self):
        return self.M * self.N

    @property
    def Q(self):
        return self.basis.Q

    @property
    def comb_active(self):
        return self.comb is not None and self.iteration <= 1


def reset_component_messages(state):
    """Put every BEM-component message back to its initial value."""
    Q, MN, L = state.Q, state.MN, state.L
    state.x_qF_fwd = GaussMsg.flat((Q, MN), "forward")
    state.c_qF_fwd = GaussMsg.flat((Q, MN), "forward")
    state.z_qT_bwd = GaussMsg.zero((Q, MN), (Q, 1), "backward")
    state.z_T_bwd = GaussMsg.zero(MN, (), "backward")
    state.c_q_post = GaussMsg(np.zeros((Q, L), dtype=np.complex128), np.full((Q, 1), VAR_MIN), "backward")
    state.x_qF_bwd = state.x_qF_post = None
    state.z_qT_fwd = state.d_qF_fwd = None
    state.c_qF_bwd = state.c_qF_post = state.d_qF_bwd = None
    state.damp_memory = None


def switch_basis(state, Q, K_os):
    """Rebuild the basis at order Q and restart all component messages."""
    state.basis = gce_basis(state.MN, Q, K_os)
    reset_component_messages(state)


def init_state(cfg, y, pilots, noise_var, Q=None):
    """Algorithm start: uniform beliefs, flat forward messages, zero backward ones."""
    if not isinstance(pilots, PilotSet):
        raise TypeError("pilots must be a PilotSet")
    MN = pilots.frame_len
    y = check_complex_vector(y, length=MN, name="y")
    if not noise_var > 0:
        raise InvalidConfigError("noise variance must be positive")
    M, N = pilots.M, pilots.N
    Q = cfg.q_initial if Q is None else Q
    comb = None
    if cfg.comb_init and pilots.scheme == "sp-dd-d":
        comb = comb_indices(MN, pilots.beta)
    state = ReceiverState(
        y=y, x_p=pilots.x_p_dd, rho=pilots.rho, noise_var=float(noise_var), M=M, N=N,
        L=cfg.n_taps, basis=gce_basis(MN, Q, cfg.k_os), damping=cfg.damping,
        comb=comb, beta=pilots.beta, cfg=cfg,
    )
    A = state.constellation.size
    state.beliefs = np.full((MN, A), 1.0 / A)
    state.x_d_fwd = GaussMsg.flat(MN, "forward")
    state.z_T_fwd = GaussMsg(y.copy(), float(noise_var), "forward")
    reset_component_messages(state)
    return state

