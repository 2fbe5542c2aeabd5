from .estimator import Diagnostics, ReceiverOutput, SPDDReceiver, estimated_taps, run
from .messages import VAR_MAX, VAR_MIN, GaussMsg
from .parts import (
    part1_backward,
    part1_forward,
    part2_backward,
    part2_forward,
    part3_coeff_update,
    part4_backward_d,
    part4_data_round,
    run_iteration,
)
from .state import ReceiverConfig, ReceiverState, init_state, switch_basis

__all__ = [
    "Diagnostics", "GaussMsg", "ReceiverConfig", "ReceiverOutput", "ReceiverState",
    "SPDDReceiver", "VAR_MAX", "VAR_MIN", "estimated_taps", "init_state", "part1_backward",
    "part1_forward", "part2_backward", "part2_forward", "part3_coeff_update",
    "part4_backward_d", "part4_data_round", "run", "run_iteration", "switch_basis",
]
