"""lorasim: software LoRa PHY modem, channel/DFE simulator and PER harness."""

from .core import (
    ModemError,
    ModemParams,
    OffsetEstimate,
    RateTag,
    SampleBuffer,
    make_params,
)
from .chirp import base_downchirp, base_upchirp, modulate_symbol
from .codec import decode_frame, encode_frame
from .channel import ChannelConfig, add_awgn, apply_offsets, upsample_tx
from .dfe import DfeConfig, DfeStream
from .demod import dechirp, demod_symbol, dft_spectrum
from .frame import DecodedFrame, Receiver, build_preamble, run_receiver, transmit_frame
from .iqio import read_iq, write_iq, write_per_csv

__version__ = "0.1.0"

__all__ = [
    "ModemError",
    "ModemParams",
    "OffsetEstimate",
    "RateTag",
    "SampleBuffer",
    "make_params",
    "base_upchirp",
    "base_downchirp",
    "modulate_symbol",
    "encode_frame",
    "decode_frame",
    "ChannelConfig",
    "upsample_tx",
    "apply_offsets",
    "add_awgn",
    "DfeConfig",
    "DfeStream",
    "dechirp",
    "dft_spectrum",
    "demod_symbol",
    "transmit_frame",
    "build_preamble",
    "Receiver",
    "DecodedFrame",
    "run_receiver",
    "read_iq",
    "write_iq",
    "write_per_csv",
    "__version__",
]
