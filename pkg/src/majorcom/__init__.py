"""Joint radar-communication link simulator based on carrier and antenna index modulation.

Submodules:
    core: configuration, codeword enumeration, bit mapping and waveforms.
    channel: channel matrices, noise and received blocks.
    decode: maximum-likelihood and low-complexity decoders.
    rate: achievable-rate bounds and dedicated-antenna baselines.
    codebook: reduced allocation codebook design.
    sim: experiment configuration and Monte-Carlo runs.
"""

__version__ = "0.1.0"

from .core import (AntennaAllocation, Codebook, Codeword, FrequencySelection, SystemConfig,
                   bits_to_codeword, codeword_to_bits, synthesize_transmit)
from .decode import DecodeResult, Decoder, decode_iter, decode_noniter, ml_decode

__all__ = ["AntennaAllocation", "Codebook", "Codeword", "DecodeResult", "Decoder",
           "FrequencySelection", "SystemConfig", "bits_to_codeword", "codeword_to_bits",
           "decode_iter", "decode_noniter", "ml_decode", "synthesize_transmit"]
