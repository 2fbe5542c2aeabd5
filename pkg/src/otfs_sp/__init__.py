"""OTFS link simulation with superimposed pilots and message-passing reception."""
from .bem import GCEBasisExpansion, gce_basis, ls_fit, reconstruct_taps
from .channel import ChannelConfig, ChannelTaps, NoiseSpec, apply_channel, generate_channel
from .modem import ModemConfig, OTFSModulator, map_bits
from .pilots import PilotSet, designed_pilots, random_dd_pilots
from .receiver import ReceiverConfig, SPDDReceiver

__version__ = "0.1.0"

__all__ = [
    "ChannelConfig", "ChannelTaps", "GCEBasisExpansion", "ModemConfig", "NoiseSpec",
    "OTFSModulator", "PilotSet", "ReceiverConfig", "SPDDReceiver", "apply_channel",
    "designed_pilots", "gce_basis", "generate_channel", "ls_fit", "map_bits",
    "random_dd_pilots", "reconstruct_taps",
]
