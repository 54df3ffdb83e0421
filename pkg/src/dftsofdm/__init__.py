"""DFT-s-OFDM link-level simulation with low-PAPR constellations (QPSK,
BPSK, pi/2-BPSK and repeated-and-offset QPSK)."""

__version__ = "0.1.0"

from .modem import Scheme, dft_precode, hann_weights, map_bits  # noqa: E402,F401
